use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::rotation::{Axis, Rotation};
use super::{ensure_finite, GeometryError, Result, Vec3, ORTHO_TOL};

/// Coordinate frame a value is expressed in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameTag {
    World,
    Camera(usize),
    Object(String),
    Reference,
}

impl fmt::Display for FrameTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameTag::World => f.write_str("world"),
            FrameTag::Camera(i) => write!(f, "camera:{i}"),
            FrameTag::Object(id) => write!(f, "object:{id}"),
            FrameTag::Reference => f.write_str("reference"),
        }
    }
}

impl FromStr for FrameTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "world" => return Ok(FrameTag::World),
            "reference" => return Ok(FrameTag::Reference),
            _ => {}
        }
        if let Some(i) = s.strip_prefix("camera:") {
            return i
                .parse()
                .map(FrameTag::Camera)
                .map_err(|_| format!("bad camera index in frame tag `{s}`"));
        }
        if let Some(id) = s.strip_prefix("object:") {
            if !id.is_empty() {
                return Ok(FrameTag::Object(id.to_string()));
            }
        }
        Err(format!("unknown frame tag `{s}`"))
    }
}

impl Serialize for FrameTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FrameTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered points in a fixed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub frame: FrameTag,
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(frame: FrameTag, points: Vec<Vec3>) -> Self {
        PointCloud { frame, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rigid map `p ↦ R p + t` from `source` coordinates into `target` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
    pub source: FrameTag,
    pub target: FrameTag,
}

impl RigidTransform {
    /// World-to-world transform.
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
            source: FrameTag::World,
            target: FrameTag::World,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn between(mut self, source: FrameTag, target: FrameTag) -> Self {
        self.source = source;
        self.target = target;
        self
    }

    /// Parses a 4×4 homogeneous matrix. The bottom row must be `(0, 0, 0, 1)`
    /// within [`ORTHO_TOL`]; it is then dropped.
    pub fn from_matrix4(m: &Matrix4<f64>, source: FrameTag, target: FrameTag) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)] - 1.0];
        if bottom.iter().any(|v| !v.is_finite() || v.abs() > ORTHO_TOL) {
            return Err(GeometryError::NotARotation(
                "homogeneous row is not (0, 0, 0, 1)".into(),
            ));
        }
        let rotation = Rotation::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        ensure_finite(&translation, "translation")?;
        Ok(RigidTransform {
            rotation,
            translation,
            source,
            target,
        })
    }

    pub fn from_row_major(values: &[f64; 16], source: FrameTag, target: FrameTag) -> Result<Self> {
        Self::from_matrix4(&Matrix4::from_row_slice(values), source, target)
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix4();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn apply_direction(&self, d: &Vec3) -> Vec3 {
        self.rotation.apply(d)
    }

    /// Direction of the source frame's local `axis` expressed in the target frame.
    pub fn axis(&self, axis: Axis) -> Vec3 {
        self.rotation.column(axis)
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.transpose();
        let translation = -rotation.apply(&self.translation);
        RigidTransform {
            rotation,
            translation,
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    /// `self ∘ inner`: apply `inner` first. `inner.target` must equal `self.source`.
    pub fn compose(&self, inner: &RigidTransform) -> Result<Self> {
        if inner.target != self.source {
            return Err(GeometryError::FrameMismatch {
                expected: self.source.to_string(),
                found: inner.target.to_string(),
            });
        }
        Ok(RigidTransform {
            rotation: self.rotation.compose(&inner.rotation),
            translation: self.rotation.apply(&inner.translation) + self.translation,
            source: inner.source.clone(),
            target: self.target.clone(),
        })
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            matrix: [f64; 16],
            source: &'a FrameTag,
            target: &'a FrameTag,
        }
        Wire {
            matrix: self.to_row_major(),
            source: &self.source,
            target: &self.target,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            matrix: [f64; 16],
            #[serde(default = "world")]
            source: FrameTag,
            #[serde(default = "world")]
            target: FrameTag,
        }
        fn world() -> FrameTag {
            FrameTag::World
        }
        let w = Wire::deserialize(d)?;
        RigidTransform::from_row_major(&w.matrix, w.source, w.target)
            .map_err(serde::de::Error::custom)
    }
}

fn expect_frame(expected: &FrameTag, found: &FrameTag) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::FrameMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

pub fn transform_points(t: &RigidTransform, pts: &PointCloud) -> Result<PointCloud> {
    expect_frame(&t.source, &pts.frame)?;
    Ok(PointCloud {
        frame: t.target.clone(),
        points: pts.points.iter().map(|p| t.apply_point(p)).collect(),
    })
}

pub fn invert_rigid(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// Applies an extrinsic (world → camera) to world points.
pub fn world_to_camera(extrinsic: &RigidTransform, pts: &PointCloud) -> Result<PointCloud> {
    expect_frame(&FrameTag::World, &pts.frame)?;
    if !matches!(extrinsic.target, FrameTag::Camera(_)) {
        return Err(GeometryError::FrameMismatch {
            expected: "camera:<i>".into(),
            found: extrinsic.target.to_string(),
        });
    }
    transform_points(extrinsic, pts)
}

/// Maps object-local points into the world with `T_obj2world`.
pub fn object_to_world(obj_to_world: &RigidTransform, pts_local: &PointCloud) -> Result<PointCloud> {
    if !matches!(obj_to_world.source, FrameTag::Object(_)) {
        return Err(GeometryError::FrameMismatch {
            expected: "object:<id>".into(),
            found: obj_to_world.source.to_string(),
        });
    }
    expect_frame(&FrameTag::World, &obj_to_world.target)?;
    transform_points(obj_to_world, pts_local)
}

pub fn world_to_object(obj_to_world: &RigidTransform, pts_world: &PointCloud) -> Result<PointCloud> {
    if !matches!(obj_to_world.source, FrameTag::Object(_)) {
        return Err(GeometryError::FrameMismatch {
            expected: "object:<id>".into(),
            found: obj_to_world.source.to_string(),
        });
    }
    transform_points(&obj_to_world.inverse(), pts_world)
}

/// Rotation taking pose `i` to pose `j`, both camera → world: `R_j · R_iᵀ`.
pub fn relative_rotation(pose_i: &RigidTransform, pose_j: &RigidTransform) -> Rotation {
    pose_j.rotation.compose(&pose_i.rotation.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_and_translation() {
        let p = PointCloud::new(FrameTag::World, vec![Vec3::new(1.0, 2.0, 3.0)]);
        let out = transform_points(&RigidTransform::identity(), &p).unwrap();
        assert_eq!(out.points[0], Vec3::new(1.0, 2.0, 3.0));

        let t = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0));
        let p = PointCloud::new(FrameTag::World, vec![Vec3::new(1.0, 1.0, 1.0)]);
        assert_eq!(transform_points(&t, &p).unwrap().points[0], Vec3::new(1.0, 1.0, 3.0));
        assert_eq!(t.inverse().translation, Vec3::new(0.0, 0.0, -2.0));
    }

    #[test]
    fn frame_mismatch_is_rejected() {
        let t = RigidTransform::identity().between(FrameTag::Camera(0), FrameTag::World);
        let p = PointCloud::new(FrameTag::World, vec![Vec3::zeros()]);
        assert!(matches!(
            transform_points(&t, &p),
            Err(GeometryError::FrameMismatch { .. })
        ));
    }

    #[test]
    fn object_origin_maps_to_translation() {
        let t = RigidTransform::from_translation(Vec3::new(5.0, 0.0, 0.0))
            .between(FrameTag::Object("sink".into()), FrameTag::World);
        let local = PointCloud::new(FrameTag::Object("sink".into()), vec![Vec3::zeros()]);
        let world = object_to_world(&t, &local).unwrap();
        assert_eq!(world.frame, FrameTag::World);
        assert_eq!(world.points[0], Vec3::new(5.0, 0.0, 0.0));
        let back = world_to_object(&t, &world).unwrap();
        assert_eq!(back.frame, FrameTag::Object("sink".into()));
        assert_abs_diff_eq!(back.points[0], Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn world_to_camera_requires_camera_target() {
        let e = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0))
            .between(FrameTag::World, FrameTag::Camera(0));
        let p = PointCloud::new(FrameTag::World, vec![Vec3::new(1.0, 1.0, 1.0)]);
        let cam = world_to_camera(&e, &p).unwrap();
        assert_eq!(cam.frame, FrameTag::Camera(0));
        assert_eq!(cam.points[0], Vec3::new(1.0, 1.0, 3.0));
        assert!(world_to_camera(&RigidTransform::identity(), &p).is_err());
    }

    #[test]
    fn compose_checks_frames() {
        let a = RigidTransform::identity().between(FrameTag::Camera(0), FrameTag::World);
        let b = RigidTransform::identity().between(FrameTag::Object("x".into()), FrameTag::Camera(0));
        let ab = a.compose(&b).unwrap();
        assert_eq!(ab.source, FrameTag::Object("x".into()));
        assert_eq!(ab.target, FrameTag::World);
        assert!(b.compose(&a).is_err());
    }

    #[test]
    fn matrix4_bottom_row_enforced() {
        let mut m = Matrix4::identity();
        m[(3, 0)] = 0.5;
        assert!(RigidTransform::from_matrix4(&m, FrameTag::World, FrameTag::World).is_err());
    }

    #[test]
    fn frame_tag_text_roundtrip() {
        for tag in [
            FrameTag::World,
            FrameTag::Camera(3),
            FrameTag::Object("coffee_table".into()),
            FrameTag::Reference,
        ] {
            assert_eq!(tag.to_string().parse::<FrameTag>().unwrap(), tag);
        }
        assert!("camera:x".parse::<FrameTag>().is_err());
        assert!("object:".parse::<FrameTag>().is_err());
    }
}
