use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{CardinalMap, PointCloud, ReferenceFrame, RigidTransform, Rotation, Vec3};

/// Deepest list/record nesting a value may have.
pub const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeoValue {
    Scalar(f64),
    Bool(bool),
    Text(String),
    Vec3(Vec3),
    Rotation(Rotation),
    Transform(RigidTransform),
    PointCloud(PointCloud),
    CardinalMap(CardinalMap),
    Frame(ReferenceFrame),
    List(Vec<GeoValue>),
    Record(BTreeMap<String, GeoValue>),
}

impl GeoValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            GeoValue::Scalar(_) => "scalar",
            GeoValue::Bool(_) => "bool",
            GeoValue::Text(_) => "text",
            GeoValue::Vec3(_) => "vec3",
            GeoValue::Rotation(_) => "rotation",
            GeoValue::Transform(_) => "transform",
            GeoValue::PointCloud(_) => "point_cloud",
            GeoValue::CardinalMap(_) => "cardinal_map",
            GeoValue::Frame(_) => "frame",
            GeoValue::List(_) => "list",
            GeoValue::Record(_) => "record",
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        GeoValue::Text(s.into())
    }

    pub fn record<K: Into<String>>(entries: impl IntoIterator<Item = (K, GeoValue)>) -> Self {
        GeoValue::Record(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            GeoValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            GeoValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[GeoValue]> {
        match self {
            GeoValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&BTreeMap<String, GeoValue>> {
        match self {
            GeoValue::Record(r) => Some(r),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&GeoValue> {
        self.as_record().and_then(|r| r.get(key))
    }

    /// Deepest list/record nesting, counting this value as depth 1.
    pub fn depth(&self) -> usize {
        match self {
            GeoValue::List(items) => 1 + items.iter().map(|v| v.depth()).max().unwrap_or(0),
            GeoValue::Record(r) => 1 + r.values().map(|v| v.depth()).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// All numeric payloads finite.
    pub fn is_finite(&self) -> bool {
        let v3 = |v: &Vec3| v.iter().all(|c| c.is_finite());
        match self {
            GeoValue::Scalar(v) => v.is_finite(),
            GeoValue::Bool(_) | GeoValue::Text(_) => true,
            GeoValue::Vec3(v) => v3(v),
            GeoValue::Rotation(r) => r.matrix().iter().all(|c| c.is_finite()),
            GeoValue::Transform(t) => {
                v3(&t.translation) && t.rotation.matrix().iter().all(|c| c.is_finite())
            }
            GeoValue::PointCloud(pc) => pc.points.iter().all(v3),
            GeoValue::CardinalMap(m) => [m.north, m.east, m.south, m.west].iter().all(v3),
            GeoValue::Frame(f) => [f.origin, f.x_axis, f.y_axis, f.z_axis].iter().all(v3),
            GeoValue::List(items) => items.iter().all(|v| v.is_finite()),
            GeoValue::Record(r) => r.values().all(|v| v.is_finite()),
        }
    }

    /// One-line human summary; large payloads are abbreviated.
    pub fn summary(&self) -> String {
        match self {
            GeoValue::Scalar(v) => format!("{v:.4}"),
            GeoValue::Bool(b) => b.to_string(),
            GeoValue::Text(s) => format!("{s:?}"),
            GeoValue::Vec3(v) => fmt_vec(v),
            GeoValue::Rotation(r) => format!("rotation(angle={:.4} rad)", r.angle()),
            GeoValue::Transform(t) => format!(
                "transform({} -> {}, t={})",
                t.source,
                t.target,
                fmt_vec(&t.translation)
            ),
            GeoValue::PointCloud(pc) => format!("point_cloud({} points, {})", pc.len(), pc.frame),
            GeoValue::CardinalMap(m) => format!("cardinal_map(N={})", fmt_vec(&m.north)),
            GeoValue::Frame(f) => format!("frame(origin={})", fmt_vec(&f.origin)),
            GeoValue::List(items) if items.len() > 8 => format!("list({} items)", items.len()),
            GeoValue::List(items) => {
                let parts: Vec<String> = items.iter().map(|v| v.summary()).collect();
                format!("[{}]", parts.join(", "))
            }
            GeoValue::Record(r) => {
                let parts: Vec<String> =
                    r.iter().map(|(k, v)| format!("{k}: {}", v.summary())).collect();
                format!("{{{}}}", parts.join(", "))
            }
        }
    }
}

fn fmt_vec(v: &Vec3) -> String {
    format!("({:.4}, {:.4}, {:.4})", v.x, v.y, v.z)
}

impl fmt::Display for GeoValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

impl From<f64> for GeoValue {
    fn from(v: f64) -> Self {
        GeoValue::Scalar(v)
    }
}

impl From<bool> for GeoValue {
    fn from(v: bool) -> Self {
        GeoValue::Bool(v)
    }
}

impl From<Vec3> for GeoValue {
    fn from(v: Vec3) -> Self {
        GeoValue::Vec3(v)
    }
}

impl From<&str> for GeoValue {
    fn from(v: &str) -> Self {
        GeoValue::Text(v.to_string())
    }
}

/// Name lookup for program evaluation.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<&GeoValue>;
}

impl Bindings for BTreeMap<String, GeoValue> {
    fn lookup(&self, name: &str) -> Option<&GeoValue> {
        self.get(name)
    }
}

impl Bindings for std::collections::HashMap<String, GeoValue> {
    fn lookup(&self, name: &str) -> Option<&GeoValue> {
        self.get(name)
    }
}
