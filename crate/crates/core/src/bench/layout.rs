//! Floor-plan scene construction.
//!
//! Layouts are built in a level floor frame (y down along gravity, origin on
//! the floor under the first camera) and re-expressed in the first camera's
//! frame when converted to a [`SceneSpec`].

use rand_chacha::ChaCha8Rng;

use crate::geometry::{Axis, CameraIntrinsics, FrameTag, RigidTransform, Rotation, Vec3};
use crate::toolbox::{SceneCamera, SceneObject, SceneSpec};

pub const CAMERA_HEIGHT: f64 = 1.5;
pub const IMAGE_WIDTH: u32 = 640;
pub const IMAGE_HEIGHT: u32 = 480;
pub const FOCAL: f64 = 500.0;
/// Fully visible objects keep this far from the image border, in pixels.
const EDGE_PX: f64 = 6.0;
const NEAR: f64 = 0.2;
/// Clearance between object footprints, in meters.
const CLEARANCE: f64 = 0.25;

/// Object classes and their half extents (x, y, z) in meters.
pub const CLASSES: &[(&str, [f64; 3])] = &[
    ("toaster", [0.15, 0.10, 0.12]),
    ("kettle", [0.11, 0.13, 0.11]),
    ("chair", [0.24, 0.45, 0.24]),
    ("lamp", [0.14, 0.32, 0.14]),
    ("plant", [0.20, 0.35, 0.20]),
    ("stool", [0.18, 0.30, 0.18]),
    ("bucket", [0.14, 0.16, 0.14]),
    ("vase", [0.09, 0.18, 0.09]),
    ("monitor", [0.28, 0.20, 0.08]),
    ("printer", [0.22, 0.12, 0.20]),
    ("basket", [0.20, 0.14, 0.16]),
    ("crate", [0.25, 0.20, 0.20]),
    ("fridge", [0.35, 0.85, 0.33]),
    ("oven", [0.30, 0.30, 0.30]),
    ("cabinet", [0.40, 0.45, 0.25]),
    ("heater", [0.25, 0.30, 0.10]),
    ("suitcase", [0.22, 0.32, 0.12]),
    ("backpack", [0.16, 0.22, 0.10]),
];

pub fn extents_of(class: &str) -> Vec3 {
    let e = CLASSES.iter().find(|(c, _)| *c == class).map(|(_, e)| *e).unwrap_or([0.15, 0.15, 0.15]);
    Vec3::from(e)
}

#[derive(Debug, Clone)]
pub struct PlacedObject {
    pub id: String,
    pub class: String,
    /// Box center in the floor frame.
    pub center: Vec3,
    /// Rotation about the floor's down axis.
    pub yaw: f64,
    pub extents: Vec3,
}

impl PlacedObject {
    pub fn rotation(&self) -> Rotation {
        Rotation::about_axis(Axis::Y, self.yaw)
    }

    fn corners(&self) -> [Vec3; 8] {
        let (r, e) = (self.rotation(), self.extents);
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let local = Vec3::new(
                if i & 1 == 0 { -e.x } else { e.x },
                if i & 2 == 0 { -e.y } else { e.y },
                if i & 4 == 0 { -e.z } else { e.z },
            );
            *c = self.center + r.apply(&local);
        }
        out
    }

    fn footprint_radius(&self) -> f64 {
        self.extents.x.hypot(self.extents.z)
    }
}

#[derive(Debug, Clone)]
pub struct PlacedCamera {
    pub position: Vec3,
    /// Camera → floor.
    pub rotation: Rotation,
}

impl PlacedCamera {
    /// Level camera at standing height, turned by `yaw` and pitched down.
    pub fn standing(x: f64, z: f64, yaw: f64, pitch: f64) -> Self {
        PlacedCamera {
            position: Vec3::new(x, -CAMERA_HEIGHT, z),
            rotation: Rotation::about_axis(Axis::Y, yaw).compose(&Rotation::about_axis(Axis::X, -pitch)),
        }
    }

    /// Floor point in this camera's coordinates.
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose().apply(&(p - self.position))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Full,
    Hidden,
    Partial,
}

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(
        FOCAL,
        FOCAL,
        IMAGE_WIDTH as f64 / 2.0,
        IMAGE_HEIGHT as f64 / 2.0,
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
    )
    .expect("fixed intrinsics are valid")
}

fn project(p: &Vec3) -> [f64; 2] {
    [
        FOCAL * p.x / p.z + IMAGE_WIDTH as f64 / 2.0,
        FOCAL * p.y / p.z + IMAGE_HEIGHT as f64 / 2.0,
    ]
}

/// Visibility from the projected corners: a box in front of the camera
/// projects inside the hull of its corner pixels.
pub fn visibility(obj: &PlacedObject, cam: &PlacedCamera) -> Visibility {
    let local: Vec<Vec3> = obj.corners().iter().map(|c| cam.to_camera(c)).collect();
    if local.iter().all(|p| p.z <= 0.0) {
        return Visibility::Hidden;
    }
    if local.iter().any(|p| p.z <= NEAR) {
        return Visibility::Partial;
    }
    let (w, h) = (IMAGE_WIDTH as f64, IMAGE_HEIGHT as f64);
    let px: Vec<[f64; 2]> = local.iter().map(project).collect();
    let inside = |q: &[f64; 2]| q[0] >= EDGE_PX && q[0] <= w - EDGE_PX && q[1] >= EDGE_PX && q[1] <= h - EDGE_PX;
    if px.iter().all(inside) {
        return Visibility::Full;
    }
    let (x1, x2) = px.iter().fold((f64::MAX, f64::MIN), |(a, b), q| (a.min(q[0]), b.max(q[0])));
    let (y1, y2) = px.iter().fold((f64::MAX, f64::MIN), |(a, b), q| (a.min(q[1]), b.max(q[1])));
    if x2 < -EDGE_PX || x1 > w + EDGE_PX || y2 < -EDGE_PX || y1 > h + EDGE_PX {
        Visibility::Hidden
    } else {
        Visibility::Partial
    }
}

/// Image-space box of a fully visible object: `[x1, y1, x2, y2]`.
pub fn image_box(obj: &PlacedObject, cam: &PlacedCamera) -> [f64; 4] {
    let px: Vec<[f64; 2]> = obj.corners().iter().map(|c| project(&cam.to_camera(c))).collect();
    let mut b = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];
    for q in px {
        b[0] = b[0].min(q[0]);
        b[1] = b[1].min(q[1]);
        b[2] = b[2].max(q[0]);
        b[3] = b[3].max(q[1]);
    }
    b
}

#[derive(Debug, Clone, Default)]
pub struct Layout {
    pub objects: Vec<PlacedObject>,
    pub cameras: Vec<PlacedCamera>,
    pub reconstruction_scale: f64,
}

impl Layout {
    pub fn new(pitch: f64) -> Self {
        Layout {
            objects: vec![],
            cameras: vec![PlacedCamera::standing(0.0, 0.0, 0.0, pitch)],
            reconstruction_scale: 1.0,
        }
    }

    pub fn object(&self, id: &str) -> &PlacedObject {
        self.objects.iter().find(|o| o.id == id).expect("placed object exists")
    }

    /// Would `obj` collide with a placed object or stand on a camera?
    pub fn clear(&self, obj: &PlacedObject) -> bool {
        let flat = |v: &Vec3| Vec3::new(v.x, 0.0, v.z);
        let objects_ok = self.objects.iter().all(|o| {
            (flat(&o.center) - flat(&obj.center)).norm() >= o.footprint_radius() + obj.footprint_radius() + CLEARANCE
        });
        let cameras_ok = self
            .cameras
            .iter()
            .all(|c| (flat(&c.position) - flat(&obj.center)).norm() >= obj.footprint_radius() + 0.5);
        objects_ok && cameras_ok
    }

    /// No object straddles the border of any camera in `strict`.
    pub fn clean_in(&self, strict: &[usize]) -> bool {
        strict.iter().all(|&c| {
            self.objects
                .iter()
                .all(|o| visibility(o, &self.cameras[c]) != Visibility::Partial)
        })
    }

    pub fn next_id(&self, class: &str) -> String {
        let n = self.objects.iter().filter(|o| o.class == class).count();
        format!("{class}_{n}")
    }

    pub fn to_scene(&self) -> SceneSpec {
        let cam0 = &self.cameras[0];
        let r0t = cam0.rotation.transpose();
        let to_world = |p: &Vec3| r0t.apply(&(p - cam0.position));
        let objects = self
            .objects
            .iter()
            .map(|o| SceneObject {
                id: o.id.clone(),
                class: o.class.clone(),
                pose: RigidTransform::new(r0t.compose(&o.rotation()), to_world(&o.center))
                    .between(FrameTag::Object(o.id.clone()), FrameTag::World),
                extents: o.extents,
                text_label: None,
            })
            .collect::<Vec<_>>();
        let cameras = self
            .cameras
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let extrinsic = if i == 0 {
                    RigidTransform::identity()
                } else {
                    RigidTransform::new(r0t.compose(&c.rotation), to_world(&c.position)).inverse()
                };
                SceneCamera {
                    intrinsics: intrinsics(),
                    extrinsic: extrinsic.between(FrameTag::World, FrameTag::Camera(i)),
                    session: 0,
                }
            })
            .collect();
        let mut lo = Vec3::repeat(f64::MAX);
        let mut hi = Vec3::repeat(f64::MIN);
        for o in &self.objects {
            for c in o.corners() {
                lo = lo.inf(&c);
                hi = hi.sup(&c);
            }
        }
        let scene_scale = if self.objects.is_empty() { 1.0 } else { (hi - lo).norm().max(1e-3) };
        SceneSpec {
            objects,
            cameras,
            gravity_down: r0t.apply(&Vec3::y()),
            scene_scale,
            reconstruction_scale: self.reconstruction_scale,
            static_objects: None,
            occlusion: false,
        }
    }
}

pub fn standing_object(id: String, class: &str, x: f64, z: f64, yaw: f64) -> PlacedObject {
    let extents = extents_of(class);
    PlacedObject {
        id,
        class: class.to_string(),
        center: Vec3::new(x, -extents.y, z),
        yaw,
        extents,
    }
}

/// Classes drawn without replacement.
pub fn pick_classes(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    use rand::seq::SliceRandom;
    let mut all: Vec<&str> = CLASSES.iter().map(|(c, _)| *c).collect();
    all.shuffle(rng);
    all.truncate(n);
    all
}
