use serde::{Deserialize, Serialize};

use super::{ensure_finite, GeometryError, Result, Vec3};

/// Right-handed orthonormal frame with +z forward, +y down and +x to the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrame {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    pub z_axis: Vec3,
}

impl ReferenceFrame {
    /// Canonical world axes at the world origin.
    pub fn world() -> Self {
        ReferenceFrame {
            origin: Vec3::zeros(),
            x_axis: Vec3::x(),
            y_axis: Vec3::y(),
            z_axis: Vec3::z(),
        }
    }
}

/// Resolved ingredients of a frame: where it sits, where it looks, and which
/// way is down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameInputs {
    pub origin: Vec3,
    pub forward: Vec3,
    pub down: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Point,
    Direction,
}

pub fn build_reference_frame(inputs: &FrameInputs) -> Result<ReferenceFrame> {
    ensure_finite(&inputs.origin, "frame origin")?;
    ensure_finite(&inputs.forward, "frame forward")?;
    ensure_finite(&inputs.down, "frame down")?;
    let fwd_norm = inputs.forward.norm();
    let down_norm = inputs.down.norm();
    if fwd_norm == 0.0 || down_norm == 0.0 {
        return Err(GeometryError::Degenerate("zero-length frame vector".into()));
    }
    let z_axis = inputs.forward / fwd_norm;
    let down_perp = inputs.down - z_axis * inputs.down.dot(&z_axis);
    let perp_norm = down_perp.norm();
    if perp_norm <= 1e-9 * down_norm {
        return Err(GeometryError::Degenerate(
            "forward is parallel to down".into(),
        ));
    }
    let y_axis = down_perp / perp_norm;
    let x_axis = y_axis.cross(&z_axis);
    Ok(ReferenceFrame {
        origin: inputs.origin,
        x_axis,
        y_axis,
        z_axis,
    })
}

/// World vector → frame coordinates.
pub fn express_in_frame(frame: &ReferenceFrame, v: &Vec3, kind: VectorKind) -> Vec3 {
    let d = match kind {
        VectorKind::Point => v - frame.origin,
        VectorKind::Direction => *v,
    };
    Vec3::new(d.dot(&frame.x_axis), d.dot(&frame.y_axis), d.dot(&frame.z_axis))
}

/// Frame coordinates → world vector.
pub fn from_frame(frame: &ReferenceFrame, local: &Vec3, kind: VectorKind) -> Vec3 {
    let d = frame.x_axis * local.x + frame.y_axis * local.y + frame.z_axis * local.z;
    match kind {
        VectorKind::Point => frame.origin + d,
        VectorKind::Direction => d,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizontalRelation {
    Left,
    Right,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthRelation {
    Front,
    Behind,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerticalRelation {
    Above,
    Below,
    Centered,
}

macro_rules! relation_str {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl $t {
            pub fn as_str(&self) -> &'static str {
                match self { $(<$t>::$v => $s),* }
            }
        }
    };
}

relation_str!(HorizontalRelation { Left => "left", Right => "right", Centered => "centered" });
relation_str!(DepthRelation { Front => "front", Behind => "behind", Centered => "centered" });
relation_str!(VerticalRelation { Above => "above", Below => "below", Centered => "centered" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationLabels {
    pub horizontal: HorizontalRelation,
    pub depth: DepthRelation,
    pub vertical: VerticalRelation,
}

/// Left/right, front/behind and above/below of a world point as seen from
/// the frame origin. `|coord| <= eps` reads as centered on that axis.
pub fn qualitative_relation(frame: &ReferenceFrame, target: &Vec3, eps: f64) -> RelationLabels {
    let local = express_in_frame(frame, target, VectorKind::Point);
    let horizontal = if local.x > eps {
        HorizontalRelation::Right
    } else if local.x < -eps {
        HorizontalRelation::Left
    } else {
        HorizontalRelation::Centered
    };
    let depth = if local.z > eps {
        DepthRelation::Front
    } else if local.z < -eps {
        DepthRelation::Behind
    } else {
        DepthRelation::Centered
    };
    // +y points down
    let vertical = if local.y < -eps {
        VerticalRelation::Above
    } else if local.y > eps {
        VerticalRelation::Below
    } else {
        VerticalRelation::Centered
    };
    RelationLabels {
        horizontal,
        depth,
        vertical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn camera_like_inputs_give_identity_axes() {
        let f = build_reference_frame(&FrameInputs {
            origin: Vec3::zeros(),
            forward: Vec3::new(0.0, 0.0, 1.0),
            down: Vec3::new(0.0, 1.0, 0.0),
        })
        .unwrap();
        assert_eq!(f.x_axis, Vec3::x());
        assert_abs_diff_eq!(f.x_axis.cross(&f.y_axis), f.z_axis, epsilon = 1e-12);
    }

    #[test]
    fn parallel_forward_and_down_is_degenerate() {
        let r = build_reference_frame(&FrameInputs {
            origin: Vec3::zeros(),
            forward: Vec3::new(0.0, 2.0, 0.0),
            down: Vec3::new(0.0, 1.0, 0.0),
        });
        assert!(matches!(r, Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn express_world_frame_is_identity() {
        let v = Vec3::new(1.0, -2.0, 3.5);
        assert_eq!(express_in_frame(&ReferenceFrame::world(), &v, VectorKind::Point), v);
        let f = ReferenceFrame {
            origin: Vec3::new(1.0, 1.0, 1.0),
            ..ReferenceFrame::world()
        };
        assert_eq!(
            express_in_frame(&f, &Vec3::new(1.0, 1.0, 1.0), VectorKind::Point),
            Vec3::zeros()
        );
        assert_eq!(
            express_in_frame(&f, &Vec3::new(1.0, 1.0, 1.0), VectorKind::Direction),
            Vec3::new(1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn relation_axes() {
        let f = ReferenceFrame::world();
        let r = qualitative_relation(&f, &Vec3::new(1.0, 0.0, 0.0), 0.05);
        assert_eq!(r.horizontal, HorizontalRelation::Right);
        assert_eq!(r.depth, DepthRelation::Centered);
        let r = qualitative_relation(&f, &Vec3::new(0.0, -2.0, 0.0), 0.05);
        assert_eq!(r.vertical, VerticalRelation::Above);
        let r = qualitative_relation(&f, &Vec3::new(-0.3, 0.4, -1.0), 0.05);
        assert_eq!(r.horizontal, HorizontalRelation::Left);
        assert_eq!(r.vertical, VerticalRelation::Below);
        assert_eq!(r.depth, DepthRelation::Behind);
    }
}
