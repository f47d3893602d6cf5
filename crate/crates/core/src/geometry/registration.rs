use nalgebra::Matrix3;

use super::camera::DepthMap;
use super::rotation::Rotation;
use super::transform::{PointCloud, RigidTransform};
use super::{ensure_finite, GeometryError, Result, Vec3};

/// Default merge distance (meters) for [`dedup_count`].
pub const DEFAULT_DEDUP_TAU: f64 = 0.25;

pub fn centroid(pts: &PointCloud) -> Result<Vec3> {
    if pts.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let sum = pts.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    let c = sum / pts.len() as f64;
    ensure_finite(&c, "centroid")?;
    Ok(c)
}

/// Median of `metric / relative` over pixels valid in both maps (and in
/// `mask`, when given) with relative depth above a small floor.
pub fn estimate_scale_factor(
    metric: &DepthMap,
    relative: &DepthMap,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if metric.width != relative.width || metric.height != relative.height {
        return Err(GeometryError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            metric.width, metric.height, relative.width, relative.height
        )));
    }
    if let Some(m) = mask {
        if m.len() != metric.len() {
            return Err(GeometryError::DimensionMismatch(format!(
                "mask has {} cells, maps have {}",
                m.len(),
                metric.len()
            )));
        }
    }
    let mut ratios: Vec<f64> = (0..metric.len())
        .filter(|&i| {
            metric.valid[i]
                && relative.valid[i]
                && relative.depth[i] > 1e-9
                && mask.is_none_or(|m| m[i])
        })
        .map(|i| metric.depth[i] / relative.depth[i])
        .collect();
    if ratios.is_empty() {
        return Err(GeometryError::NoValidPixels);
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let s = if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    };
    if !(s > 0.0 && s.is_finite()) {
        return Err(GeometryError::NonPositiveScale(s));
    }
    Ok(s)
}

/// Least-squares similarity (or rigid, when `with_scale` is false) mapping
/// `src` onto `dst`. Returns the rigid part tagged `src.frame → dst.frame`
/// and the scale factor; `dst ≈ s · R · src + t`.
pub fn umeyama_align(
    src: &PointCloud,
    dst: &PointCloud,
    with_scale: bool,
) -> Result<(RigidTransform, f64)> {
    let n = src.len();
    if n != dst.len() {
        return Err(GeometryError::CardinalityMismatch(n, dst.len()));
    }
    if n < 3 {
        return Err(GeometryError::TooFewPairs(n));
    }
    for p in src.points.iter().chain(dst.points.iter()) {
        ensure_finite(p, "alignment input")?;
    }
    let mu_s = centroid(src)?;
    let mu_d = centroid(dst)?;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (a, b) in src.points.iter().zip(&dst.points) {
        let da = a - mu_s;
        let db = b - mu_d;
        cov += db * da.transpose();
        var_s += da.norm_squared();
    }
    cov /= n as f64;
    var_s /= n as f64;
    if var_s <= 1e-18 {
        return Err(GeometryError::Degenerate("source points coincide".into()));
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeometryError::Degenerate("SVD did not converge".into())),
    };
    // nalgebra does not sort singular values
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 || sv[1] < 1e-12 * sv[0] {
        return Err(GeometryError::Degenerate("points are collinear".into()));
    }
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // flip the smallest singular direction
        let min_idx = (0..3)
            .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
            .unwrap_or(2);
        d[(min_idx, min_idx)] = -1.0;
    }
    let r = u * d * v_t;
    let scale = if with_scale {
        let trace: f64 = (0..3).map(|i| svd.singular_values[i] * d[(i, i)]).sum();
        trace / var_s
    } else {
        1.0
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeometryError::NonPositiveScale(scale));
    }
    let rotation = Rotation::from_matrix(r)?;
    let t = mu_d - rotation.apply(&mu_s) * scale;
    Ok((
        RigidTransform::new(rotation, t).between(src.frame.clone(), dst.frame.clone()),
        scale,
    ))
}

/// Number of clusters when points within `tau` of each other are merged
/// transitively (single linkage).
pub fn dedup_count(points: &[Vec3], tau: f64) -> usize {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut clusters = n;
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                    clusters -= 1;
                }
            }
        }
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera::DepthScale;
    use crate::geometry::transform::FrameTag;

    #[test]
    fn centroid_of_empty_errors() {
        let pc = PointCloud::new(FrameTag::World, vec![]);
        assert_eq!(centroid(&pc), Err(GeometryError::EmptyCloud));
    }

    #[test]
    fn scale_median_even_count() {
        let metric = DepthMap::new(2, 2, vec![2.0, 4.0, 6.0, 8.0], DepthScale::MetricMeters).unwrap();
        let rel = DepthMap::new(2, 2, vec![1.0, 1.0, 1.0, 1.0], DepthScale::Relative).unwrap();
        assert_eq!(estimate_scale_factor(&metric, &rel, None).unwrap(), 5.0);
        let mask = [true, false, false, false];
        assert_eq!(estimate_scale_factor(&metric, &rel, Some(&mask)).unwrap(), 2.0);
        let none = [false; 4];
        assert_eq!(
            estimate_scale_factor(&metric, &rel, Some(&none)),
            Err(GeometryError::NoValidPixels)
        );
    }

    #[test]
    fn umeyama_recovers_similarity() {
        let r = Rotation::from_rotvec(&Vec3::new(0.3, -0.2, 0.9));
        let t = Vec3::new(1.0, 2.0, -0.5);
        let src = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(1.0, 1.0, 1.0),
        ];
        let dst: Vec<Vec3> = src.iter().map(|p| r.apply(p) * 1.7 + t).collect();
        let (rt, s) = umeyama_align(
            &PointCloud::new(FrameTag::World, src),
            &PointCloud::new(FrameTag::World, dst),
            true,
        )
        .unwrap();
        assert!((s - 1.7).abs() < 1e-9);
        assert!(rt.rotation.geodesic_distance(&r) < 1e-9);
        assert!((rt.translation - t).norm() < 1e-9);
    }

    #[test]
    fn umeyama_rejects_collinear() {
        let src: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let r = umeyama_align(
            &PointCloud::new(FrameTag::World, src.clone()),
            &PointCloud::new(FrameTag::World, src),
            true,
        );
        assert!(matches!(r, Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn dedup_is_transitive() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.2, 0.0, 0.0),
            Vec3::new(0.4, 0.0, 0.0),
            Vec3::new(5.0, 0.0, 0.0),
        ];
        assert_eq!(dedup_count(&pts, 0.25), 2);
        assert_eq!(dedup_count(&[], 0.25), 0);
    }
}
