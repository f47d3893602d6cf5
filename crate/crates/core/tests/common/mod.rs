//! Independent oracles shared by the integration tests. Nothing here calls
//! back into the kernel to compute an expected value.
#![allow(dead_code)]

pub mod cassette;

use gca_core::geometry::{
    derive_cardinal_axes, estimate_scale_factor, invert_rigid, object_to_world, relative_rotation,
    transform_points, umeyama_align, world_to_object, Axis, Cardinal, DepthMap, DepthScale, EulerOrder,
    FrameTag, PointCloud, RigidTransform, Rotation, Vec3,
};
use nalgebra::{Matrix3, Matrix4, RowVector4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn unit_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = gaussian_vec(rng);
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

pub fn box_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Uniform rotation from a normalized Gaussian quaternion, expanded by hand.
pub fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    Rotation::from_matrix(random_matrix(rng)).expect("quaternion matrix is a rotation")
}

pub fn random_transform(rng: &mut ChaCha8Rng, source: FrameTag, target: FrameTag) -> RigidTransform {
    RigidTransform::new(random_rotation(rng), box_vec(rng, 10.0)).between(source, target)
}

/// `[[R, t], [0, 1]]` assembled entry by entry.
pub fn homogeneous(t: &RigidTransform) -> Matrix4<f64> {
    let r = t.rotation.matrix();
    let mut m = Matrix4::identity();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = r[(i, j)];
        }
        m[(i, 3)] = t.translation[i];
    }
    m
}

pub fn elemental(axis: Axis, a: f64) -> Matrix3<f64> {
    let (c, s) = (a.cos(), a.sin());
    match axis {
        Axis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// Rodrigues' formula `I + sinθ K + (1 − cosθ) K²`.
pub fn rodrigues(rv: &Vec3) -> Matrix3<f64> {
    let theta = rv.norm();
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let k = rv / theta;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}

pub fn max_abs(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

pub const TRANSFORM_TOL: f64 = 1e-9;
pub const ANGLE_TOL: f64 = 1e-6;
pub const RODRIGUES_TOL: f64 = 1e-9;
pub const EULER_TOL: f64 = 1e-9;

fn check(ok: bool, what: &str, detail: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{what}: {}", detail()))
    }
}

/// One round of every randomized geometry check. Returns the number of
/// checks performed.
pub fn geometry_round(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut n = 0;

    // transform application against the homogeneous product
    let t = random_transform(rng, FrameTag::World, FrameTag::World);
    let p = box_vec(rng, 10.0);
    let got = transform_points(&t, &PointCloud::new(FrameTag::World, vec![p])).map_err(|e| e.to_string())?;
    let want = homogeneous(&t) * Vector4::new(p.x, p.y, p.z, 1.0);
    let err = (got.points[0] - want.xyz()).amax();
    check(err <= TRANSFORM_TOL, "transform vs 4x4 product", || format!("{err:e}"))?;
    let back = invert_rigid(&t).apply_point(&got.points[0]);
    check((back - p).amax() <= TRANSFORM_TOL, "transform round trip", || format!("{:e}", (back - p).amax()))?;
    n += 2;

    // extrinsic ↔ pose inversion against a dense inverse, and the row-vector form
    let e = random_transform(rng, FrameTag::World, FrameTag::Camera(0));
    let dense = homogeneous(&e).try_inverse().ok_or("singular homogeneous matrix")?;
    let pose = invert_rigid(&e);
    let err = (homogeneous(&pose) - dense).amax();
    check(err <= TRANSFORM_TOL, "pose vs dense inverse", || format!("{err:e}"))?;
    check(
        pose.source == FrameTag::Camera(0) && pose.target == FrameTag::World,
        "pose frame tags",
        || format!("{} -> {}", pose.source, pose.target),
    )?;
    let p = box_vec(rng, 10.0);
    let row = RowVector4::new(p.x, p.y, p.z, 1.0) * homogeneous(&e).transpose();
    let cam = e.apply_point(&p);
    let err = (cam - Vec3::new(row[0], row[1], row[2])).amax();
    check(err <= TRANSFORM_TOL, "extrinsic vs row-vector form", || format!("{err:e}"))?;
    n += 3;

    // object ↔ world round trip
    let obj = random_transform(rng, FrameTag::Object("crate_0".into()), FrameTag::World);
    let local: Vec<Vec3> = (0..8).map(|_| box_vec(rng, 2.0)).collect();
    let world = object_to_world(&obj, &PointCloud::new(FrameTag::Object("crate_0".into()), local.clone()))
        .map_err(|e| e.to_string())?;
    let again = world_to_object(&obj, &world).map_err(|e| e.to_string())?;
    let err = local.iter().zip(&again.points).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    check(err <= TRANSFORM_TOL, "object/world round trip", || format!("{err:e}"))?;
    n += 1;

    // relative rotation recovers an angle built from axis-angle
    let pose_i = RigidTransform::new(random_rotation(rng), box_vec(rng, 5.0));
    let axis = unit_vec(rng);
    let theta = rng.random_range(0.0..std::f64::consts::PI - 0.01);
    let step = Rotation::from_matrix(rodrigues(&(axis * theta))).map_err(|e| e.to_string())?;
    let pose_j = RigidTransform::new(step.compose(&pose_i.rotation), box_vec(rng, 5.0));
    let rel = relative_rotation(&pose_i, &pose_j);
    let err = (rel.angle() - theta).abs();
    check(err <= ANGLE_TOL, "relative rotation angle", || format!("θ={theta} err={err:e}"))?;
    n += 1;

    // logarithm then Rodrigues exponential
    let r = random_rotation(rng);
    let err = max_abs(&(rodrigues(&r.to_rotvec()) - r.matrix()));
    check(err <= RODRIGUES_TOL, "rodrigues reconstruction", || format!("{err:e}"))?;
    n += 1;

    // Euler decomposition recomposed from elemental matrices, all six orders
    for order in ["xyz", "xzy", "yxz", "yzx", "zxy", "zyx"] {
        let ord: EulerOrder = order.parse().map_err(|e: gca_core::geometry::GeometryError| e.to_string())?;
        let ea = r.to_euler(ord);
        let m = elemental(ord.0[0], ea.angles[0]) * elemental(ord.0[1], ea.angles[1]) * elemental(ord.0[2], ea.angles[2]);
        let err = max_abs(&(m - r.matrix()));
        check(err <= EULER_TOL, "euler recomposition", || format!("{order}: {err:e}"))?;
        n += 1;
    }
    Ok(n)
}

pub const CARDINAL_TOL: f64 = 1e-9;

/// Random orthonormal `(y_ref, anchor)` pair, checked against the invariants
/// and the closed form `L, y×a, −a, −(y×a)` along `L → next(L) → …`.
pub fn cardinal_round(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let y = unit_vec(rng);
    let raw = unit_vec(rng);
    let a = (raw - y * raw.dot(&y)).normalize();
    let known = [Cardinal::North, Cardinal::East, Cardinal::South, Cardinal::West][rng.random_range(0..4)];
    let m = derive_cardinal_axes(known, &a, &y).map_err(|e| e.to_string())?;
    let close = |u: Vec3, v: Vec3| (u - v).amax() <= CARDINAL_TOL;
    check(close(m.south, -m.north), "S = -N", || format!("{m:?}"))?;
    check(close(m.west, -m.east), "W = -E", || format!("{m:?}"))?;
    check(m.north.dot(&m.east).abs() <= CARDINAL_TOL, "N ⟂ E", || format!("{m:?}"))?;
    check(close(m.north.cross(&m.east), y), "N × E ∥ y_ref", || format!("{m:?}"))?;
    for c in [Cardinal::North, Cardinal::East, Cardinal::South, Cardinal::West] {
        check((m.get(c).norm() - 1.0).abs() <= CARDINAL_TOL, "unit axes", || format!("{c:?}"))?;
    }
    let order = [Cardinal::North, Cardinal::East, Cardinal::South, Cardinal::West];
    let start = order.iter().position(|c| *c == known).expect("known label");
    let ya = y.cross(&a);
    let expected = [a, ya, -a, -ya];
    for (k, want) in expected.iter().enumerate() {
        let c = order[(start + k) % 4];
        check(close(m.get(c), *want), "analytic construction", || format!("{c:?}: {:?} vs {want:?}", m.get(c)))?;
    }
    Ok(())
}

pub const UMEYAMA_ROT_TOL: f64 = 1e-6;
pub const UMEYAMA_T_TOL: f64 = 1e-6;
pub const UMEYAMA_SCALE_TOL: f64 = 1e-9;

pub fn umeyama_round(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let r = random_rotation(rng);
    let t = box_vec(rng, 5.0);
    let s = rng.random_range(0.2..5.0);
    let n = rng.random_range(3..40);
    let src: Vec<Vec3> = (0..n).map(|_| box_vec(rng, 3.0)).collect();
    let dst: Vec<Vec3> = src.iter().map(|p| r.matrix() * p * s + t).collect();
    let (fit, scale) = umeyama_align(
        &PointCloud::new(FrameTag::World, src),
        &PointCloud::new(FrameTag::World, dst),
        true,
    )
    .map_err(|e| e.to_string())?;
    let rot_err = fit.rotation.geodesic_distance(&r);
    check(rot_err <= UMEYAMA_ROT_TOL, "umeyama rotation", || format!("{rot_err:e}"))?;
    let t_err = (fit.translation - t).amax();
    check(t_err <= UMEYAMA_T_TOL, "umeyama translation", || format!("{t_err:e}"))?;
    let s_err = (scale - s).abs() / s;
    check(s_err <= UMEYAMA_SCALE_TOL, "umeyama scale", || format!("{s_err:e}"))?;
    Ok(())
}

pub fn depth_pair(rng: &mut ChaCha8Rng, w: u32, h: u32, ratio: f64) -> (Vec<f64>, Vec<f64>) {
    let rel: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.5..4.0)).collect();
    let metric = rel.iter().map(|d| d * ratio).collect();
    (metric, rel)
}

pub fn scale_of(metric: Vec<f64>, rel: Vec<f64>, w: u32, h: u32) -> Result<f64, String> {
    let m = DepthMap::new(w, h, metric, DepthScale::MetricMeters).map_err(|e| e.to_string())?;
    let r = DepthMap::new(w, h, rel, DepthScale::Relative).map_err(|e| e.to_string())?;
    estimate_scale_factor(&m, &r, None).map_err(|e| e.to_string())
}

/// Connected components under `|a − b| <= tau`, by breadth-first flood fill.
pub fn component_count(points: &[Vec3], tau: f64) -> usize {
    let mut seen = vec![false; points.len()];
    let mut count = 0;
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..points.len() {
                if !seen[j] && (points[i] - points[j]).norm() <= tau {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

use gca_core::constraint::{FrameSpec, Sign};

const NAMES: &[&str] = &[
    "toaster", "sink", "owen", "chair", "dining_table", "lamp2", "Fridge", "tv_stand", "x", "red_mug_3", "cam",
    "camera", "sofa", "bed", "potted_plant",
];

/// Object name the grammar accepts as an anchor (never `cam<digits>` or `ref`).
pub fn random_name(rng: &mut ChaCha8Rng) -> String {
    let base = NAMES[rng.random_range(0..NAMES.len())];
    if rng.random_bool(0.3) {
        format!("{base}_{}", rng.random_range(0..20))
    } else {
        base.to_string()
    }
}

pub fn random_frame_spec(rng: &mut ChaCha8Rng) -> FrameSpec {
    let sign = if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus };
    let axis = [Axis::X, Axis::Y, Axis::Z][rng.random_range(0..3)];
    let spec = match rng.random_range(0..3) {
        0 => FrameSpec::object(&random_name(rng), sign, axis),
        1 => FrameSpec::camera(rng.random_range(0..12), sign, axis),
        _ => {
            let from = random_name(rng);
            let mut to = random_name(rng);
            while to == from {
                to = random_name(rng);
            }
            FrameSpec::direction(&from, &to)
        }
    };
    if rng.random_bool(0.4) {
        spec.with_cardinal([Cardinal::North, Cardinal::East, Cardinal::South, Cardinal::West][rng.random_range(0..4)])
    } else {
        spec
    }
}

/// Random bytes, half of them drawn from the grammar's own alphabet.
pub fn fuzz_bytes(rng: &mut ChaCha8Rng) -> Vec<u8> {
    const ALPHABET: &[u8] = b"+-=_()[]{}$\\ZXYzxyrefcamCentroidNorthSouth0123456789 \n\t,.;";
    let len = rng.random_range(0..64);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.5) {
                ALPHABET[rng.random_range(0..ALPHABET.len())]
            } else {
                rng.random()
            }
        })
        .collect()
}
