use serde::{Deserialize, Serialize};

use super::transform::{FrameTag, PointCloud, RigidTransform};
use super::{GeometryError, Result, Vec3};

/// Camera-frame depth below which a point counts as behind the camera.
pub const DEPTH_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;
    fn try_from(r: RawIntrinsics) -> Result<Self> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let bad = |m: &str| Err(GeometryError::InvalidIntrinsics(m.to_string()));
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if !(cx >= 0.0 && cx < width as f64) {
            return bad("cx outside image");
        }
        if !(cy >= 0.0 && cy < height as f64) {
            return bad("cy outside image");
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn project_camera_point(&self, p: &Vec3) -> Projection {
        if p.z <= DEPTH_EPSILON {
            return Projection {
                pixel: None,
                depth: p.z,
                in_frustum: false,
            };
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        let inside = u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64;
        Projection {
            pixel: Some([u, v]),
            depth: p.z,
            in_frustum: inside,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `None` when the point is at or behind the camera plane.
    pub pixel: Option<[f64; 2]>,
    pub depth: f64,
    pub in_frustum: bool,
}

/// Projects world points through extrinsic (world → camera) and intrinsics.
pub fn pinhole_project(
    k: &CameraIntrinsics,
    extrinsic: &RigidTransform,
    pts: &PointCloud,
) -> Result<Vec<Projection>> {
    if pts.frame != FrameTag::World {
        return Err(GeometryError::FrameMismatch {
            expected: FrameTag::World.to_string(),
            found: pts.frame.to_string(),
        });
    }
    Ok(pts
        .points
        .iter()
        .map(|p| k.project_camera_point(&extrinsic.apply_point(p)))
        .collect())
}

/// Camera-frame point at `depth` along the ray through `pixel`.
pub fn back_project(k: &CameraIntrinsics, pixel: [f64; 2], depth: f64) -> Vec3 {
    Vec3::new(
        (pixel[0] - k.cx) / k.fx * depth,
        (pixel[1] - k.cy) / k.fy * depth,
        depth,
    )
}

/// Axis-aligned pixel box in `[x1, y1, x2, y2]` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox2D {
    /// Corner order is normalized; zero-area boxes are rejected.
    pub fn new(xa: f64, ya: f64, xb: f64, yb: f64) -> Result<Self> {
        if ![xa, ya, xb, yb].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidBox("non-finite coordinate".into()));
        }
        let (x1, x2) = if xa <= xb { (xa, xb) } else { (xb, xa) };
        let (y1, y2) = if ya <= yb { (ya, yb) } else { (yb, ya) };
        if x1 == x2 || y1 == y2 {
            return Err(GeometryError::InvalidBox("zero area".into()));
        }
        Ok(BBox2D { x1, y1, x2, y2 })
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0]
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x1 && u <= self.x2 && v >= self.y1 && v <= self.y2
    }

    pub fn intersection(&self, other: &BBox2D) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox2D) -> f64 {
        let inter = self.intersection(other);
        inter / (self.area() + other.area() - inter)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Clip to `[0, width] × [0, height]`; `None` when nothing remains.
    pub fn clipped(&self, width: u32, height: u32) -> Option<BBox2D> {
        BBox2D::new(
            self.x1.clamp(0.0, width as f64),
            self.y1.clamp(0.0, height as f64),
            self.x2.clamp(0.0, width as f64),
            self.y2.clamp(0.0, height as f64),
        )
        .ok()
    }
}

impl TryFrom<[f64; 4]> for BBox2D {
    type Error = GeometryError;
    fn try_from(a: [f64; 4]) -> Result<Self> {
        BBox2D::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox2D> for [f64; 4] {
    fn from(b: BBox2D) -> [f64; 4] {
        b.to_array()
    }
}

/// Per-pixel world points for one image.
///
/// Cell `(row, col)` covers pixels `[col, col+1) × [row, row+1)`. A cell may
/// hold several surface samples (front and back faces project to the same
/// pixel when visibility is frustum-only); a cell with none is invalid.
/// Each sample carries a `u32` instance tag used by segmentation masks.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    width: u32,
    height: u32,
    offsets: Vec<usize>,
    points: Vec<Vec3>,
    tags: Vec<u32>,
}

impl PointMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn cell_range(&self, row: u32, col: u32) -> std::ops::Range<usize> {
        let idx = (row * self.width + col) as usize;
        self.offsets[idx]..self.offsets[idx + 1]
    }

    pub fn is_valid(&self, row: u32, col: u32) -> bool {
        !self.cell_range(row, col).is_empty()
    }

    pub fn cell(&self, row: u32, col: u32) -> &[Vec3] {
        &self.points[self.cell_range(row, col)]
    }

    pub fn cell_tags(&self, row: u32, col: u32) -> &[u32] {
        &self.tags[self.cell_range(row, col)]
    }

    pub fn valid_count(&self) -> usize {
        self.offsets.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn sample_count(&self) -> usize {
        self.points.len()
    }

    /// `(row, col, point, tag)` for every stored sample.
    pub fn samples(&self) -> impl Iterator<Item = (u32, u32, &Vec3, u32)> + '_ {
        (0..self.height).flat_map(move |r| {
            (0..self.width).flat_map(move |c| {
                self.cell_range(r, c)
                    .map(move |i| (r, c, &self.points[i], self.tags[i]))
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct PointMapBuilder {
    width: u32,
    height: u32,
    entries: Vec<(u32, Vec3, u32)>,
}

impl PointMapBuilder {
    pub fn new(width: u32, height: u32) -> Self {
        PointMapBuilder {
            width,
            height,
            entries: Vec::new(),
        }
    }

    /// Adds a sample at the cell containing `pixel`; samples outside the
    /// image are dropped.
    pub fn push_pixel(&mut self, pixel: [f64; 2], point: Vec3, tag: u32) -> bool {
        let (u, v) = (pixel[0], pixel[1]);
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return false;
        }
        let idx = v as u32 * self.width + u as u32;
        self.entries.push((idx, point, tag));
        true
    }

    pub fn build(mut self) -> PointMap {
        // stable: samples within a cell keep insertion order
        self.entries.sort_by_key(|e| e.0);
        let cells = (self.width * self.height) as usize;
        let mut offsets = vec![0usize; cells + 1];
        for (idx, _, _) in &self.entries {
            offsets[*idx as usize + 1] += 1;
        }
        for i in 0..cells {
            offsets[i + 1] += offsets[i];
        }
        let (points, tags) = self.entries.into_iter().map(|(_, p, t)| (p, t)).unzip();
        PointMap {
            width: self.width,
            height: self.height,
            offsets,
            points,
            tags,
        }
    }
}

/// All valid samples in cells that overlap `bbox`.
pub fn points_in_box(pm: &PointMap, bbox: &BBox2D) -> Result<PointCloud> {
    points_in_box_where(pm, bbox, |_| true)
}

/// As [`points_in_box`], keeping only samples whose tag passes `keep`.
pub fn points_in_box_where(
    pm: &PointMap,
    bbox: &BBox2D,
    keep: impl Fn(u32) -> bool,
) -> Result<PointCloud> {
    let clipped = bbox
        .clipped(pm.width, pm.height)
        .ok_or(GeometryError::BoxOutsideImage)?;
    // every cell [c, c+1) × [r, r+1) the box overlaps
    let c0 = clipped.x1.floor().max(0.0) as u32;
    let r0 = clipped.y1.floor().max(0.0) as u32;
    let c1 = (clipped.x2.ceil() as i64 - 1).min(pm.width as i64 - 1);
    let r1 = (clipped.y2.ceil() as i64 - 1).min(pm.height as i64 - 1);
    let mut points = Vec::new();
    if c1 >= c0 as i64 && r1 >= r0 as i64 {
        for r in r0..=r1 as u32 {
            for c in c0..=c1 as u32 {
                let range = pm.cell_range(r, c);
                for i in range {
                    if keep(pm.tags[i]) {
                        points.push(pm.points[i]);
                    }
                }
            }
        }
    }
    if points.is_empty() {
        return Err(GeometryError::EmptySelection);
    }
    Ok(PointCloud::new(FrameTag::World, points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthScale {
    Relative,
    MetricMeters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
    pub scale: DepthScale,
}

impl DepthMap {
    /// Cells with non-positive or non-finite depth are marked invalid.
    pub fn new(width: u32, height: u32, depth: Vec<f64>, scale: DepthScale) -> Result<Self> {
        let n = (width * height) as usize;
        if depth.len() != n {
            return Err(GeometryError::DimensionMismatch(format!(
                "{} depths for a {width}x{height} map",
                depth.len()
            )));
        }
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(DepthMap {
            width,
            height,
            depth,
            valid,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let p = k().project_camera_point(&Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(p.pixel, Some([320.0, 240.0]));
        assert!(p.in_frustum);
        let behind = k().project_camera_point(&Vec3::new(0.0, 0.0, -1.0));
        assert!(!behind.in_frustum);
        assert_eq!(behind.pixel, None);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
        let bad: std::result::Result<CameraIntrinsics, _> = serde_json::from_str(
            r#"{"fx":1,"fy":1,"cx":-1,"cy":0,"width":4,"height":4}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn bbox_normalizes() {
        let b = BBox2D::new(10.0, 20.0, 0.0, 5.0).unwrap();
        assert_eq!(b.to_array(), [0.0, 5.0, 10.0, 20.0]);
        assert!(BBox2D::new(1.0, 1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn points_in_box_selects_cells() {
        let mut b = PointMapBuilder::new(4, 4);
        b.push_pixel([0.5, 0.5], Vec3::new(1.0, 0.0, 0.0), 1);
        b.push_pixel([3.2, 3.9], Vec3::new(2.0, 0.0, 0.0), 2);
        b.push_pixel([3.7, 3.1], Vec3::new(3.0, 0.0, 0.0), 3);
        assert!(!b.push_pixel([4.0, 0.0], Vec3::zeros(), 0));
        let pm = b.build();
        assert_eq!(pm.valid_count(), 2);
        assert_eq!(pm.cell(3, 3).len(), 2);
        let all = points_in_box(&pm, &BBox2D::new(0.0, 0.0, 4.0, 4.0).unwrap()).unwrap();
        assert_eq!(all.len(), 3);
        let one = points_in_box(&pm, &BBox2D::new(0.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(one.points, vec![Vec3::new(1.0, 0.0, 0.0)]);
        let tagged =
            points_in_box_where(&pm, &BBox2D::new(0.0, 0.0, 4.0, 4.0).unwrap(), |t| t == 3).unwrap();
        assert_eq!(tagged.points, vec![Vec3::new(3.0, 0.0, 0.0)]);
        assert_eq!(
            points_in_box(&pm, &BBox2D::new(1.0, 1.0, 2.0, 2.0).unwrap()),
            Err(GeometryError::EmptySelection)
        );
        assert_eq!(
            points_in_box(&pm, &BBox2D::new(10.0, 10.0, 20.0, 20.0).unwrap()),
            Err(GeometryError::BoxOutsideImage)
        );
    }
}
