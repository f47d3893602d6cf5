use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, FrameTag, RigidTransform, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Ground-truth box object. `pose` maps object-local points to the world;
/// the box is centered on the local origin with +z at its front.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub class: String,
    pub pose: RigidTransform,
    pub extents: Vec3,
    pub text_label: Option<String>,
}

impl SceneObject {
    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    /// The eight world-space box corners.
    pub fn corners(&self) -> [Vec3; 8] {
        let e = self.extents;
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let local = Vec3::new(
                if i & 1 == 0 { -e.x } else { e.x },
                if i & 2 == 0 { -e.y } else { e.y },
                if i & 4 == 0 { -e.z } else { e.z },
            );
            *c = self.pose.apply_point(&local);
        }
        out
    }

    /// World-space samples on the six faces, `density × density` per face at
    /// cell centers. The samples are symmetric about the box center.
    pub fn surface_samples(&self, density: usize) -> Vec<Vec3> {
        let e = self.extents;
        let n = density.max(1);
        let grid = |i: usize| -1.0 + (2.0 * i as f64 + 1.0) / n as f64;
        let mut out = Vec::with_capacity(6 * n * n);
        for axis in 0..3 {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            for side in [-1.0, 1.0] {
                for i in 0..n {
                    for j in 0..n {
                        let mut local = Vec3::zeros();
                        local[axis] = side * e[axis];
                        local[a] = grid(i) * e[a];
                        local[b] = grid(j) * e[b];
                        out.push(self.pose.apply_point(&local));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneCamera {
    pub intrinsics: CameraIntrinsics,
    /// World → camera.
    pub extrinsic: RigidTransform,
    /// Capture session; cameras of different sessions do not share a
    /// reconstruction frame and must be aligned through shared objects.
    pub session: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub cameras: Vec<SceneCamera>,
    pub gravity_down: Vec3,
    pub scene_scale: f64,
    /// Metric size of one reconstruction unit. Reconstructions are reported
    /// in relative units `metric / reconstruction_scale`.
    pub reconstruction_scale: f64,
    /// Objects assumed static across sessions.
    pub static_objects: Option<Vec<String>>,
    /// Keep only the nearest sample per pixel.
    pub occlusion: bool,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    id: String,
    class: String,
    pose: Vec<f64>,
    extents: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text_label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawCamera {
    intrinsics: CameraIntrinsics,
    extrinsic: Vec<f64>,
    #[serde(default)]
    session: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
struct RawScene {
    objects: Vec<RawObject>,
    cameras: Vec<RawCamera>,
    gravity_down: [f64; 3],
    scene_scale: f64,
    #[serde(default = "one")]
    reconstruction_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    static_objects: Option<Vec<String>>,
    #[serde(default)]
    occlusion: bool,
}

fn matrix16(v: &[f64], what: &str) -> Result<[f64; 16], SceneError> {
    v.try_into()
        .map_err(|_| SceneError::Invalid(format!("{what}: expected 16 values, got {}", v.len())))
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let raw: RawScene = serde_json::from_str(text)?;
        let mut objects = Vec::with_capacity(raw.objects.len());
        for o in raw.objects {
            let m = matrix16(&o.pose, &format!("pose of `{}`", o.id))?;
            let pose = RigidTransform::from_row_major(&m, FrameTag::Object(o.id.clone()), FrameTag::World)
                .map_err(|e| SceneError::Invalid(format!("pose of `{}`: {e}", o.id)))?;
            objects.push(SceneObject {
                id: o.id,
                class: o.class,
                pose,
                extents: Vec3::from(o.extents),
                text_label: o.text_label,
            });
        }
        let mut cameras = Vec::with_capacity(raw.cameras.len());
        for (i, c) in raw.cameras.into_iter().enumerate() {
            let m = matrix16(&c.extrinsic, &format!("extrinsic of camera {i}"))?;
            let extrinsic = RigidTransform::from_row_major(&m, FrameTag::World, FrameTag::Camera(i))
                .map_err(|e| SceneError::Invalid(format!("extrinsic of camera {i}: {e}")))?;
            cameras.push(SceneCamera {
                intrinsics: c.intrinsics,
                extrinsic,
                session: c.session,
            });
        }
        let scene = SceneSpec {
            objects,
            cameras,
            gravity_down: Vec3::from(raw.gravity_down),
            scene_scale: raw.scene_scale,
            reconstruction_scale: raw.reconstruction_scale,
            static_objects: raw.static_objects,
            occlusion: raw.occlusion,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let raw = RawScene {
            objects: self
                .objects
                .iter()
                .map(|o| RawObject {
                    id: o.id.clone(),
                    class: o.class.clone(),
                    pose: o.pose.to_row_major().to_vec(),
                    extents: [o.extents.x, o.extents.y, o.extents.z],
                    text_label: o.text_label.clone(),
                })
                .collect(),
            cameras: self
                .cameras
                .iter()
                .map(|c| RawCamera {
                    intrinsics: c.intrinsics,
                    extrinsic: c.extrinsic.to_row_major().to_vec(),
                    session: c.session,
                })
                .collect(),
            gravity_down: [self.gravity_down.x, self.gravity_down.y, self.gravity_down.z],
            scene_scale: self.scene_scale,
            reconstruction_scale: self.reconstruction_scale,
            static_objects: self.static_objects.clone(),
            occlusion: self.occlusion,
        };
        serde_json::to_string_pretty(&raw).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Invalid(m));
        let mut ids = HashSet::new();
        for o in &self.objects {
            if o.id.is_empty() || !o.id.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return bad(format!("object id `{}` is not an identifier", o.id));
            }
            if !ids.insert(o.id.as_str()) {
                return bad(format!("duplicate object id `{}`", o.id));
            }
            if !o.extents.iter().all(|e| *e > 0.0 && e.is_finite()) {
                return bad(format!("object `{}` has non-positive extents", o.id));
            }
        }
        if let Some(cam0) = self.cameras.first() {
            let m = cam0.extrinsic.to_matrix4();
            let off: f64 = (m - nalgebra::Matrix4::identity()).abs().max();
            if off > 1e-9 {
                return bad("camera 0 extrinsic must be the identity".into());
            }
        }
        let g = self.gravity_down.norm();
        if !(g > 0.0 && g.is_finite()) {
            return bad("gravity_down must be a non-zero vector".into());
        }
        if !(self.scene_scale > 0.0 && self.scene_scale.is_finite()) {
            return bad("scene_scale must be positive".into());
        }
        if !(self.reconstruction_scale > 0.0 && self.reconstruction_scale.is_finite()) {
            return bad("reconstruction_scale must be positive".into());
        }
        if let Some(list) = &self.static_objects {
            if let Some(missing) = list.iter().find(|id| !ids.contains(id.as_str())) {
                return bad(format!("static object `{missing}` is not in the scene"));
            }
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_ids(&self) -> Vec<String> {
        self.objects.iter().map(|o| o.id.clone()).collect()
    }
}

/// Perturbations applied by the synthetic backend.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Radians.
    pub pose_rotation_sigma: f64,
    /// Fraction of `scene_scale`, per axis.
    pub centroid_sigma_rel: f64,
    pub depth_noise_rel: f64,
    pub detection_dropout: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        let sigmas = [
            ("pose_rotation_sigma", self.pose_rotation_sigma),
            ("centroid_sigma_rel", self.centroid_sigma_rel),
            ("depth_noise_rel", self.depth_noise_rel),
        ];
        for (name, v) in sigmas {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite value >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.detection_dropout) {
            return Err("detection_dropout must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn is_noise_free(&self) -> bool {
        self.pose_rotation_sigma == 0.0
            && self.centroid_sigma_rel == 0.0
            && self.depth_noise_rel == 0.0
            && self.detection_dropout == 0.0
    }
}
