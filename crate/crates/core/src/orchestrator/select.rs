//! Picking one detection out of several candidates.

use serde::{Deserialize, Serialize};

use crate::geocalc::GeoValue;
use crate::geometry::BBox2D;
use crate::toolbox::bbox_from_value;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox2D,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Leftmost,
    Rightmost,
    Largest,
    Topmost,
    /// Box center closest to `point`, the image position of `name`.
    NearestTo { name: String, point: [f64; 2] },
    Index(usize),
}

impl Selector {
    /// Ordinal adjective in front of an object name, e.g. "leftmost".
    pub fn from_word(word: &str) -> Option<Selector> {
        match word.to_ascii_lowercase().as_str() {
            "leftmost" => Some(Selector::Leftmost),
            "rightmost" => Some(Selector::Rightmost),
            "largest" | "biggest" => Some(Selector::Largest),
            "topmost" | "highest" => Some(Selector::Topmost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectError {
    #[error("no detections to choose from")]
    Empty,
    #[error("index {index} out of range for {len} detections")]
    OutOfRange { index: usize, len: usize },
    #[error("not a detection list: {0}")]
    NotDetections(String),
}

/// Reads a `detect` result.
pub fn detections_from_value(v: &GeoValue) -> Result<Vec<Detection>, SelectError> {
    let items = v
        .as_list()
        .ok_or_else(|| SelectError::NotDetections(v.type_name().to_string()))?;
    items
        .iter()
        .map(|d| {
            let bbox = bbox_from_value("box", d).map_err(|e| SelectError::NotDetections(e.to_string()))?;
            let label = d.get("label").and_then(GeoValue::as_text).unwrap_or_default().to_string();
            Ok(Detection { bbox, label })
        })
        .collect()
}

/// Index of the chosen detection. Ties go to the lower index.
pub fn resolve_ambiguity(detections: &[Detection], selector: &Selector) -> Result<usize, SelectError> {
    if detections.is_empty() {
        return Err(SelectError::Empty);
    }
    let score = |d: &Detection| -> f64 {
        let [cx, cy] = d.bbox.center();
        match selector {
            Selector::Leftmost => -cx,
            Selector::Rightmost => cx,
            Selector::Largest => d.bbox.area(),
            Selector::Topmost => -cy,
            Selector::NearestTo { point, .. } => -(cx - point[0]).hypot(cy - point[1]),
            Selector::Index(_) => 0.0,
        }
    };
    if let Selector::Index(i) = selector {
        return if *i < detections.len() {
            Ok(*i)
        } else {
            Err(SelectError::OutOfRange {
                index: *i,
                len: detections.len(),
            })
        };
    }
    let mut best = 0;
    for (i, d) in detections.iter().enumerate().skip(1) {
        if score(d) > score(&detections[best]) {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x1: f64, y1: f64, x2: f64, y2: f64) -> Detection {
        Detection {
            bbox: BBox2D::new(x1, y1, x2, y2).unwrap(),
            label: "chair".into(),
        }
    }

    #[test]
    fn leftmost_of_two_chairs() {
        let d = [det(80.0, 0.0, 120.0, 50.0), det(380.0, 0.0, 420.0, 50.0)];
        assert_eq!(resolve_ambiguity(&d, &Selector::Leftmost), Ok(0));
        assert_eq!(resolve_ambiguity(&d, &Selector::Rightmost), Ok(1));
    }

    #[test]
    fn single_detection_any_selector() {
        let d = [det(10.0, 10.0, 20.0, 20.0)];
        for s in [
            Selector::Leftmost,
            Selector::Rightmost,
            Selector::Largest,
            Selector::Topmost,
            Selector::Index(0),
            Selector::NearestTo {
                name: "x".into(),
                point: [500.0, 500.0],
            },
        ] {
            assert_eq!(resolve_ambiguity(&d, &s), Ok(0));
        }
    }

    #[test]
    fn equal_area_tie_goes_low() {
        let d = [det(0.0, 0.0, 10.0, 10.0), det(50.0, 50.0, 60.0, 60.0), det(0.0, 0.0, 5.0, 5.0)];
        assert_eq!(resolve_ambiguity(&d, &Selector::Largest), Ok(0));
    }

    #[test]
    fn errors() {
        assert_eq!(resolve_ambiguity(&[], &Selector::Largest), Err(SelectError::Empty));
        let d = [det(0.0, 0.0, 10.0, 10.0)];
        assert!(matches!(resolve_ambiguity(&d, &Selector::Index(3)), Err(SelectError::OutOfRange { .. })));
    }

    #[test]
    fn nearest_and_topmost() {
        let d = [det(0.0, 100.0, 10.0, 110.0), det(200.0, 0.0, 210.0, 10.0)];
        assert_eq!(resolve_ambiguity(&d, &Selector::Topmost), Ok(1));
        let near = Selector::NearestTo {
            name: "lamp".into(),
            point: [0.0, 90.0],
        };
        assert_eq!(resolve_ambiguity(&d, &near), Ok(0));
    }
}
