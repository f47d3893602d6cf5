use crate::geocalc::GeoValue;
use crate::geometry::BBox2D;

use super::ToolArgs;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArgError {
    #[error("missing argument `{0}`")]
    Missing(String),
    #[error("argument `{name}`: expected {expected}, found {found}")]
    Type {
        name: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("argument `{name}`: {message}")]
    Invalid { name: String, message: String },
}

pub(crate) fn get<'a>(args: &'a ToolArgs, name: &str) -> Result<&'a GeoValue, ArgError> {
    args.get(name).ok_or_else(|| ArgError::Missing(name.to_string()))
}

fn type_err(name: &str, expected: &'static str, v: &GeoValue) -> ArgError {
    ArgError::Type {
        name: name.to_string(),
        expected,
        found: v.type_name(),
    }
}

pub(crate) fn text(args: &ToolArgs, name: &str) -> Result<String, ArgError> {
    let v = get(args, name)?;
    v.as_text().map(str::to_string).ok_or_else(|| type_err(name, "text", v))
}

fn as_index(name: &str, v: &GeoValue) -> Result<usize, ArgError> {
    match v {
        GeoValue::Scalar(x) if *x >= 0.0 && x.fract() == 0.0 && *x < u32::MAX as f64 => Ok(*x as usize),
        GeoValue::Scalar(x) => Err(ArgError::Invalid {
            name: name.to_string(),
            message: format!("{x} is not a non-negative integer"),
        }),
        _ => Err(type_err(name, "integer", v)),
    }
}

pub(crate) fn index(args: &ToolArgs, name: &str) -> Result<usize, ArgError> {
    as_index(name, get(args, name)?)
}

pub(crate) fn index_list(args: &ToolArgs, name: &str) -> Result<Vec<usize>, ArgError> {
    let v = get(args, name)?;
    match v {
        GeoValue::List(items) => items.iter().map(|i| as_index(name, i)).collect(),
        GeoValue::Scalar(_) => Ok(vec![as_index(name, v)?]),
        _ => Err(type_err(name, "list of integers", v)),
    }
}

pub(crate) fn text_list(args: &ToolArgs, name: &str) -> Result<Option<Vec<String>>, ArgError> {
    match args.get(name) {
        None => Ok(None),
        Some(GeoValue::List(items)) => items
            .iter()
            .map(|i| i.as_text().map(str::to_string).ok_or_else(|| type_err(name, "text", i)))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(v) => Err(type_err(name, "list of text", v)),
    }
}

/// A reconstruction handle, given either directly or as the record
/// returned by `reconstruct`.
pub(crate) fn handle(args: &ToolArgs, name: &str) -> Result<String, ArgError> {
    let v = get(args, name)?;
    match v {
        GeoValue::Text(t) => Ok(t.clone()),
        GeoValue::Record(r) => match r.get("handle") {
            Some(GeoValue::Text(t)) => Ok(t.clone()),
            _ => Err(ArgError::Invalid {
                name: name.to_string(),
                message: "record has no `handle` field".into(),
            }),
        },
        _ => Err(type_err(name, "reconstruction handle", v)),
    }
}

/// `[x1, y1, x2, y2]`, or a detection record holding a `box` field.
pub fn bbox_from_value(name: &str, v: &GeoValue) -> Result<BBox2D, ArgError> {
    let list = match v {
        GeoValue::Record(r) => match r.get("box") {
            Some(b) => return bbox_from_value(name, b),
            None => {
                return Err(ArgError::Invalid {
                    name: name.to_string(),
                    message: "record has no `box` field".into(),
                })
            }
        },
        GeoValue::List(items) => items,
        _ => return Err(type_err(name, "[x1, y1, x2, y2]", v)),
    };
    let nums: Vec<f64> = list.iter().filter_map(|i| i.as_scalar()).collect();
    if nums.len() != 4 || list.len() != 4 {
        return Err(ArgError::Invalid {
            name: name.to_string(),
            message: "expected four numbers".into(),
        });
    }
    BBox2D::new(nums[0], nums[1], nums[2], nums[3]).map_err(|e| ArgError::Invalid {
        name: name.to_string(),
        message: e.to_string(),
    })
}

pub fn bbox_to_value(b: &BBox2D) -> GeoValue {
    GeoValue::List(b.to_array().iter().map(|x| GeoValue::Scalar(*x)).collect())
}

pub(crate) fn bbox(args: &ToolArgs, name: &str) -> Result<BBox2D, ArgError> {
    bbox_from_value(name, get(args, name)?)
}
