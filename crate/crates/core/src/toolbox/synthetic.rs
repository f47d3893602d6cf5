//! Ground-truth oracle backend over a [`SceneSpec`].

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geocalc::GeoValue;
use crate::geometry::{
    points_in_box_where, umeyama_align, Axis, BBox2D, CameraIntrinsics, DepthMap, DepthScale,
    FrameTag, PointCloud, PointMap, PointMapBuilder, RigidTransform, Rotation, Vec3,
};

use super::args::{self, bbox_to_value};
use super::scene::{NoiseConfig, SceneObject, SceneSpec};
use super::{ApiName, ToolArgs, ToolBackend, ToolError, ToolOutput};

/// Samples per box face edge.
pub const DEFAULT_FACE_DENSITY: usize = 32;

/// Minimum box IoU for a query box to select an object's mask.
const MASK_IOU: f64 = 0.5;

/// Mean flow magnitude (pixels) below which motion reads as none.
const FLOW_DEADBAND: f64 = 0.5;

/// Faults wired into the perception tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolFault {
    /// `reconstruct` fails outright.
    CorruptReconstructionRaise,
    /// Reconstructed points are turned 180° about gravity while extrinsics
    /// stay put.
    CorruptReconstructionSkew,
    /// Poses are flipped 180° about the object's own y axis.
    CorruptPose,
    /// `detect` never finds anything.
    DropDetections,
}

/// Deterministic RNG for one logical draw, independent of call order.
pub(crate) fn draw_rng(seed: u64, api: &str, key: &str) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(api.as_bytes());
    h.update([0u8]);
    h.update(key.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn gaussian3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Rotation about a uniformly random axis by `sigma · |N(0,1)|`.
pub(crate) fn rotation_noise(rng: &mut ChaCha8Rng, sigma: f64) -> Rotation {
    if sigma == 0.0 {
        return Rotation::identity();
    }
    let mut axis = gaussian3(rng);
    while axis.norm() < 1e-12 {
        axis = gaussian3(rng);
    }
    let n: f64 = rng.sample(StandardNormal);
    Rotation::from_rotvec(&(axis.normalize() * sigma * n.abs()))
}

struct CameraView {
    scene_index: usize,
    /// Reconstruction world → camera, in reconstruction units.
    extrinsic: RigidTransform,
    points: PointMap,
    /// Row-major per cell: metric depth of the first sample, 0 when empty.
    metric_depth: Vec<f64>,
    /// Exact projected boxes of the objects sampled in this view.
    object_boxes: Vec<(usize, BBox2D)>,
}

struct ReconContext {
    views: Vec<CameraView>,
    /// Truth world → reconstruction world, rotation part per session.
    session_rotation: HashMap<usize, Rotation>,
    gravity: Vec3,
    diagonal: f64,
    perturbed: bool,
}

impl ReconContext {
    fn view(&self, camera: usize) -> Result<&CameraView, ToolError> {
        self.views
            .iter()
            .find(|v| v.scene_index == camera)
            .ok_or_else(|| ToolError::Failed(format!("camera {camera} is not part of this reconstruction")))
    }
}

pub struct SyntheticBackend {
    scene: Arc<SceneSpec>,
    noise: NoiseConfig,
    fault: Option<ToolFault>,
    density: usize,
    samples: Vec<Vec<Vec3>>,
    contexts: Mutex<HashMap<String, Arc<ReconContext>>>,
}

impl SyntheticBackend {
    pub fn new(scene: Arc<SceneSpec>, noise: NoiseConfig, fault: Option<ToolFault>) -> Self {
        Self::with_density(scene, noise, fault, DEFAULT_FACE_DENSITY)
    }

    pub fn with_density(
        scene: Arc<SceneSpec>,
        noise: NoiseConfig,
        fault: Option<ToolFault>,
        density: usize,
    ) -> Self {
        let samples = scene.objects.iter().map(|o| o.surface_samples(density)).collect();
        SyntheticBackend {
            scene,
            noise,
            fault,
            density,
            samples,
            contexts: Mutex::new(HashMap::new()),
        }
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    pub fn density(&self) -> usize {
        self.density
    }

    fn camera(&self, i: usize) -> Result<&super::SceneCamera, ToolError> {
        self.scene
            .cameras
            .get(i)
            .ok_or_else(|| ToolError::Failed(format!("unknown camera {i}")))
    }

    /// Image box of an object as seen by a truth camera: the clipped AABB of
    /// its corners in front of the camera.
    fn projected_box(&self, obj: &SceneObject, camera: usize) -> Option<BBox2D> {
        let cam = &self.scene.cameras[camera];
        let pix: Vec<[f64; 2]> = obj
            .corners()
            .iter()
            .filter_map(|c| cam.intrinsics.project_camera_point(&cam.extrinsic.apply_point(c)).pixel)
            .collect();
        if pix.is_empty() {
            return None;
        }
        let (mut x1, mut y1, mut x2, mut y2) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for [u, v] in pix {
            x1 = x1.min(u);
            y1 = y1.min(v);
            x2 = x2.max(u);
            y2 = y2.max(v);
        }
        BBox2D::new(x1, y1, x2, y2)
            .ok()?
            .clipped(cam.intrinsics.width, cam.intrinsics.height)
    }

    fn context(&self, handle: &str) -> Result<Arc<ReconContext>, ToolError> {
        self.contexts
            .lock()
            .expect("context cache poisoned")
            .get(handle)
            .cloned()
            .ok_or_else(|| ToolError::Failed(format!("unknown reconstruction handle `{handle}`")))
    }

    fn reconstruct(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        if self.fault == Some(ToolFault::CorruptReconstructionRaise) {
            return Err(ToolError::Failed("reconstruction failed: injected fault".into()));
        }
        let cameras = args::index_list(args, "cameras")?;
        if cameras.is_empty() {
            return Err(args::ArgError::Invalid {
                name: "cameras".into(),
                message: "at least one camera is required".into(),
            }
            .into());
        }
        for &c in &cameras {
            self.camera(c)?;
        }
        let shared = args::text_list(args, "shared_objects")?;
        let mut key = Sha256::new();
        key.update(format!("{cameras:?}|{shared:?}").as_bytes());
        let digest: [u8; 32] = key.finalize().into();
        let handle = format!("recon-{}", &hex::encode(digest)[..12]);

        let ctx = match self.context(&handle) {
            Ok(c) => c,
            Err(_) => {
                let built = Arc::new(self.build_context(&cameras, shared.as_deref())?);
                self.contexts
                    .lock()
                    .expect("context cache poisoned")
                    .insert(handle.clone(), built.clone());
                built
            }
        };
        let k = self.scene.reconstruction_scale;
        let value = GeoValue::record([
            ("handle", GeoValue::text(handle)),
            (
                "cameras",
                GeoValue::List(ctx.views.iter().map(|v| GeoValue::Scalar(v.scene_index as f64)).collect()),
            ),
            (
                "extrinsics",
                GeoValue::List(ctx.views.iter().map(|v| GeoValue::Transform(v.extrinsic.clone())).collect()),
            ),
            (
                "intrinsics",
                GeoValue::List(
                    ctx.views
                        .iter()
                        .map(|v| intrinsics_value(&self.scene.cameras[v.scene_index].intrinsics))
                        .collect(),
                ),
            ),
            ("gravity_down", GeoValue::Vec3(ctx.gravity)),
            ("scene_diagonal", GeoValue::Scalar(ctx.diagonal)),
            ("units", GeoValue::text(if k == 1.0 { "meters" } else { "relative" })),
        ]);
        Ok(ToolOutput {
            value,
            perturbed: ctx.perturbed,
        })
    }

    fn build_context(&self, cameras: &[usize], shared: Option<&[String]>) -> Result<ReconContext, ToolError> {
        let scene = &*self.scene;
        let k = scene.reconstruction_scale;
        let sigma = self.noise.centroid_sigma_rel * scene.scene_scale;
        let mut perturbed = sigma > 0.0;

        // session anchors: first requested camera of each session
        let mut anchors: BTreeMap<usize, usize> = BTreeMap::new();
        let mut session_order = Vec::new();
        for &c in cameras {
            let s = scene.cameras[c].session;
            if !anchors.contains_key(&s) {
                anchors.insert(s, c);
                session_order.push(s);
            }
        }

        struct Raw {
            scene_index: usize,
            session: usize,
            // per object: (pixel, session-frame point, metric depth)
            samples: Vec<(usize, [f64; 2], Vec3, f64)>,
            boxes: Vec<(usize, BBox2D)>,
        }
        let offset = |obj: &SceneObject, session: usize| -> Vec3 {
            if sigma == 0.0 {
                return Vec3::zeros();
            }
            let mut rng = draw_rng(self.noise.seed, "reconstruct", &format!("{}:{session}", obj.id));
            gaussian3(&mut rng) * sigma
        };

        let mut raws = Vec::new();
        for &c in cameras {
            let cam = &scene.cameras[c];
            let anchor = &scene.cameras[anchors[&cam.session]].extrinsic;
            let mut samples = Vec::new();
            let mut boxes = Vec::new();
            for (oi, obj) in scene.objects.iter().enumerate() {
                let off = offset(obj, cam.session);
                let mut any = false;
                for p in &self.samples[oi] {
                    let q = cam.extrinsic.apply_point(p);
                    let proj = cam.intrinsics.project_camera_point(&q);
                    if !proj.in_frustum {
                        continue;
                    }
                    let px = proj.pixel.expect("in-frustum points have pixels");
                    let local = (anchor.apply_point(p) + off) / k;
                    samples.push((oi, px, local, q.z));
                    any = true;
                }
                if any {
                    if let Some(b) = self.projected_box(obj, c) {
                        boxes.push((oi, b));
                    }
                }
            }
            raws.push(Raw {
                scene_index: c,
                session: cam.session,
                samples,
                boxes,
            });
        }

        // align secondary sessions onto the first through shared objects
        let primary = session_order[0];
        let mut align: HashMap<usize, RigidTransform> = HashMap::new();
        align.insert(primary, RigidTransform::identity());
        if session_order.len() > 1 {
            let ids: Vec<usize> = match shared.or(scene.static_objects.as_deref()) {
                Some(list) => list
                    .iter()
                    .map(|id| {
                        scene
                            .objects
                            .iter()
                            .position(|o| &o.id == id)
                            .ok_or_else(|| ToolError::Failed(format!("unknown shared object `{id}`")))
                    })
                    .collect::<Result<_, _>>()?,
                None => (0..scene.objects.len()).collect(),
            };
            let session_centroid = |s: usize, oi: usize| -> Option<Vec3> {
                let pts: Vec<Vec3> = raws
                    .iter()
                    .filter(|r| r.session == s)
                    .flat_map(|r| r.samples.iter().filter(|x| x.0 == oi).map(|x| x.2))
                    .collect();
                (!pts.is_empty()).then(|| pts.iter().sum::<Vec3>() / pts.len() as f64)
            };
            for &s in &session_order[1..] {
                let (mut src, mut dst) = (Vec::new(), Vec::new());
                for &oi in &ids {
                    if let (Some(a), Some(b)) = (session_centroid(s, oi), session_centroid(primary, oi)) {
                        src.push(a);
                        dst.push(b);
                    }
                }
                if src.len() < 3 {
                    return Err(ToolError::Failed(format!(
                        "cannot align session {s}: {} shared objects visible, need 3",
                        src.len()
                    )));
                }
                let (t, _) = umeyama_align(
                    &PointCloud::new(FrameTag::World, src),
                    &PointCloud::new(FrameTag::World, dst),
                    false,
                )
                .map_err(|e| ToolError::Failed(format!("cannot align session {s}: {e}")))?;
                align.insert(s, t.between(FrameTag::World, FrameTag::World));
            }
        }

        let primary_anchor = &scene.cameras[anchors[&primary]].extrinsic;
        let gravity = primary_anchor.rotation.apply(&scene.gravity_down).normalize();
        let skew = (self.fault == Some(ToolFault::CorruptReconstructionSkew))
            .then(|| Rotation::from_rotvec(&(gravity * std::f64::consts::PI)));
        perturbed |= skew.is_some();

        let mut lo = Vec3::repeat(f64::MAX);
        let mut hi = Vec3::repeat(f64::MIN);
        let mut views = Vec::new();
        let mut session_rotation = HashMap::new();
        for raw in raws {
            let cam = &scene.cameras[raw.scene_index];
            let a = &align[&raw.session];
            let anchor = &scene.cameras[anchors[&raw.session]].extrinsic;
            session_rotation
                .entry(raw.session)
                .or_insert_with(|| a.rotation.compose(&anchor.rotation));
            // camera ∘ anchor⁻¹ in reconstruction units, then undo the alignment
            let mut rel = cam
                .extrinsic
                .compose(&anchor.inverse().between(FrameTag::World, FrameTag::World))
                .map_err(|e| ToolError::Failed(e.to_string()))?;
            rel.translation /= k;
            let extrinsic = rel
                .between(FrameTag::World, FrameTag::Camera(raw.scene_index))
                .compose(&a.inverse())
                .map_err(|e| ToolError::Failed(e.to_string()))?;

            let (w, h) = (cam.intrinsics.width, cam.intrinsics.height);
            let mut metric_depth = vec![0.0; (w * h) as usize];
            let mut nearest = vec![f64::MAX; (w * h) as usize];
            if scene.occlusion {
                for (_, px, _, z) in &raw.samples {
                    let idx = px[1] as usize * w as usize + px[0] as usize;
                    nearest[idx] = nearest[idx].min(*z);
                }
            }
            let mut builder = PointMapBuilder::new(w, h);
            for (oi, px, local, z) in raw.samples {
                let idx = px[1] as usize * w as usize + px[0] as usize;
                if scene.occlusion && z > nearest[idx] {
                    continue;
                }
                let mut p = a.apply_point(&local);
                if let Some(r) = &skew {
                    p = r.apply(&p);
                }
                lo = lo.inf(&p);
                hi = hi.sup(&p);
                if builder.push_pixel(px, p, oi as u32) && metric_depth[idx] == 0.0 {
                    metric_depth[idx] = z;
                }
            }
            views.push(CameraView {
                scene_index: raw.scene_index,
                extrinsic,
                points: builder.build(),
                metric_depth,
                object_boxes: raw.boxes,
            });
        }
        let diagonal = if lo.x <= hi.x { (hi - lo).norm() } else { 0.0 };
        Ok(ReconContext {
            views,
            session_rotation,
            gravity,
            diagonal,
            perturbed,
        })
    }

    fn detect(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let camera = args::index(args, "camera")?;
        self.camera(camera)?;
        let prompt = args::text(args, "prompt")?.trim().to_lowercase();
        if self.fault == Some(ToolFault::DropDetections) {
            return Ok(ToolOutput {
                value: GeoValue::List(vec![]),
                perturbed: true,
            });
        }
        let mut out = Vec::new();
        let mut dropped = false;
        for obj in &self.scene.objects {
            if !class_matches(&obj.class, &prompt) {
                continue;
            }
            let Some(b) = self.projected_box(obj, camera) else {
                continue;
            };
            if self.noise.detection_dropout > 0.0 {
                let mut rng = draw_rng(self.noise.seed, "detect", &format!("{camera}:{}", obj.id));
                if rng.random_bool(self.noise.detection_dropout) {
                    dropped = true;
                    continue;
                }
            }
            out.push(GeoValue::record([
                ("box", bbox_to_value(&b)),
                ("label", GeoValue::text(obj.class.clone())),
                ("score", GeoValue::Scalar(1.0)),
            ]));
        }
        Ok(ToolOutput {
            value: GeoValue::List(out),
            perturbed: dropped,
        })
    }

    /// Object whose exact box best overlaps `query` (IoU ≥ 0.5).
    fn mask_object(&self, view: &CameraView, query: &BBox2D) -> Result<Option<usize>, ToolError> {
        let mut best: Option<(usize, f64)> = None;
        let mut tie = false;
        for &(oi, b) in &view.object_boxes {
            let iou = b.iou(query);
            match best {
                Some((_, bi)) if iou == bi && iou >= MASK_IOU => tie = true,
                Some((_, bi)) if iou <= bi => {}
                _ => {
                    best = Some((oi, iou));
                    tie = false;
                }
            }
        }
        match best {
            Some((_, iou)) if iou < MASK_IOU => Ok(None),
            Some(_) if tie => Err(ToolError::Failed("box matches several objects equally".into())),
            Some((oi, _)) => Ok(Some(oi)),
            None => Ok(None),
        }
    }

    fn project_box(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let ctx = self.context(&args::handle(args, "recon")?)?;
        let view = ctx.view(args::index(args, "camera")?)?;
        let query = args::bbox(args, "box")?;
        let cloud = match self.mask_object(view, &query)? {
            Some(oi) => points_in_box_where(&view.points, &query, |t| t == oi as u32)?,
            None => points_in_box_where(&view.points, &query, |_| true)?,
        };
        Ok(ToolOutput::exact(GeoValue::PointCloud(cloud)))
    }

    fn predict_obj_pose(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let ctx = self.context(&args::handle(args, "recon")?)?;
        let camera = args::index(args, "camera")?;
        let view = ctx.view(camera)?;
        let query = args::bbox(args, "box")?;
        let oi = self
            .mask_object(view, &query)?
            .ok_or_else(|| ToolError::Failed("box spans no object".into()))?;
        let obj = &self.scene.objects[oi];
        let cloud = points_in_box_where(&view.points, &query, |t| t == oi as u32)?;
        let center = crate::geometry::centroid(&cloud)?;
        let session = self.scene.cameras[camera].session;
        let mut rotation = ctx.session_rotation[&session].compose(&obj.pose.rotation);
        let mut perturbed = false;
        if self.noise.pose_rotation_sigma > 0.0 {
            let mut rng = draw_rng(self.noise.seed, "predict_obj_pose", &format!("{camera}:{}", obj.id));
            rotation = rotation_noise(&mut rng, self.noise.pose_rotation_sigma).compose(&rotation);
            perturbed = true;
        }
        if self.fault == Some(ToolFault::CorruptPose) {
            rotation = rotation.compose(&Rotation::about_axis(Axis::Y, std::f64::consts::PI));
            perturbed = true;
        }
        let pose =
            RigidTransform::new(rotation, center).between(FrameTag::Object(obj.id.clone()), FrameTag::World);
        Ok(ToolOutput {
            value: GeoValue::Transform(pose),
            perturbed,
        })
    }

    fn estimate_scale(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let ctx = self.context(&args::handle(args, "recon")?)?;
        let camera = args::index(args, "camera")?;
        let view = ctx.view(camera)?;
        let (w, h) = (view.points.width(), view.points.height());
        let mut rng = draw_rng(self.noise.seed, "estimate_scale", &camera.to_string());
        let sigma = self.noise.depth_noise_rel;
        let mut metric = Vec::with_capacity((w * h) as usize);
        let mut relative = Vec::with_capacity((w * h) as usize);
        for r in 0..h {
            for c in 0..w {
                let cell = view.points.cell(r, c);
                let idx = (r * w + c) as usize;
                if let Some(p) = cell.first() {
                    let z = view.metric_depth[idx];
                    let n: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                    metric.push(z * (1.0 + sigma * n));
                    relative.push(view.extrinsic.apply_point(p).z);
                } else {
                    metric.push(0.0);
                    relative.push(0.0);
                }
            }
        }
        let metric = DepthMap::new(w, h, metric, DepthScale::MetricMeters)?;
        let relative = DepthMap::new(w, h, relative, DepthScale::Relative)?;
        let s = crate::geometry::estimate_scale_factor(&metric, &relative, None)?;
        Ok(ToolOutput {
            value: GeoValue::Scalar(s),
            perturbed: sigma > 0.0,
        })
    }

    fn ocr(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let camera = args::index(args, "camera")?;
        self.camera(camera)?;
        let mut found: Vec<(BBox2D, usize, String)> = self
            .scene
            .objects
            .iter()
            .enumerate()
            .filter_map(|(i, o)| {
                let text = o.text_label.clone()?;
                Some((self.projected_box(o, camera)?, i, text))
            })
            .collect();
        found.sort_by(|a, b| a.0.x1.total_cmp(&b.0.x1).then(a.1.cmp(&b.1)));
        Ok(ToolOutput::exact(GeoValue::List(
            found
                .into_iter()
                .map(|(b, _, t)| GeoValue::record([("text", GeoValue::text(t)), ("box", bbox_to_value(&b))]))
                .collect(),
        )))
    }

    fn analyze_motion(&self, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        let ca = args::index(args, "camera_a")?;
        let cb = args::index(args, "camera_b")?;
        let (a, b) = (self.camera(ca)?, self.camera(cb)?);
        let mut sum = [0.0f64; 2];
        let mut n = 0usize;
        for samples in &self.samples {
            for p in samples {
                let pa = a.intrinsics.project_camera_point(&a.extrinsic.apply_point(p));
                let pb = b.intrinsics.project_camera_point(&b.extrinsic.apply_point(p));
                if let (true, true, Some(ua), Some(ub)) = (pa.in_frustum, pb.in_frustum, pa.pixel, pb.pixel) {
                    sum[0] += ub[0] - ua[0];
                    sum[1] += ub[1] - ua[1];
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(ToolError::Failed(format!("cameras {ca} and {cb} share no visible geometry")));
        }
        let mean = [sum[0] / n as f64, sum[1] / n as f64];
        let dominant = if mean[0].hypot(mean[1]) < FLOW_DEADBAND {
            "none"
        } else if mean[0].abs() >= mean[1].abs() {
            if mean[0] > 0.0 {
                "right"
            } else {
                "left"
            }
        } else if mean[1] > 0.0 {
            "down"
        } else {
            "up"
        };
        Ok(ToolOutput::exact(GeoValue::record([
            ("mean_flow", GeoValue::List(vec![GeoValue::Scalar(mean[0]), GeoValue::Scalar(mean[1])])),
            ("dominant", GeoValue::text(dominant)),
            ("correspondences", GeoValue::Scalar(n as f64)),
        ])))
    }
}

fn class_matches(class: &str, prompt: &str) -> bool {
    let class = class.to_lowercase();
    prompt == class
        || prompt.strip_suffix('s') == Some(class.as_str())
        || prompt.strip_suffix("es") == Some(class.as_str())
}

pub(crate) fn intrinsics_value(k: &CameraIntrinsics) -> GeoValue {
    GeoValue::record([
        ("fx", GeoValue::Scalar(k.fx)),
        ("fy", GeoValue::Scalar(k.fy)),
        ("cx", GeoValue::Scalar(k.cx)),
        ("cy", GeoValue::Scalar(k.cy)),
        ("width", GeoValue::Scalar(k.width as f64)),
        ("height", GeoValue::Scalar(k.height as f64)),
    ])
}

impl ToolBackend for SyntheticBackend {
    fn call(&self, api: ApiName, args: &ToolArgs) -> Result<ToolOutput, ToolError> {
        match api {
            ApiName::Reconstruct => self.reconstruct(args),
            ApiName::Detect => self.detect(args),
            ApiName::ProjectBoxTo3dPoints => self.project_box(args),
            ApiName::PredictObjPose => self.predict_obj_pose(args),
            ApiName::EstimateScale => self.estimate_scale(args),
            ApiName::Ocr => self.ocr(args),
            ApiName::AnalyzeMotion => self.analyze_motion(args),
            ApiName::Code => super::run_code(args),
        }
    }
}
