//! Deterministic geometric kernel.
//!
//! Everything here is a pure function over immutable values. Internally all
//! transforms use column-vector semantics (`p' = R p + t`); the row-vector
//! form `P_homo @ T.T` used in formula documentation is the same map.

mod camera;
mod cardinal;
mod frame;
mod registration;
mod rotation;
mod transform;

pub use camera::{
    back_project, pinhole_project, points_in_box, points_in_box_where, BBox2D, CameraIntrinsics,
    DepthMap, DepthScale, PointMap, PointMapBuilder, Projection, DEPTH_EPSILON,
};
pub use cardinal::{
    classify_cardinal, derive_cardinal_axes, Cardinal, CardinalLabel, CardinalMap,
    DEFAULT_CARDINAL_MARGIN,
};
pub use frame::{
    build_reference_frame, express_in_frame, from_frame, qualitative_relation, DepthRelation,
    FrameInputs, HorizontalRelation, ReferenceFrame, RelationLabels, VectorKind, VerticalRelation,
};
pub use registration::{centroid, dedup_count, estimate_scale_factor, umeyama_align, DEFAULT_DEDUP_TAU};
pub use rotation::{
    classify_primary_rotation, Axis, EulerAngles, EulerOrder, MotionLabel, Rotation,
    ANGLE_EPSILON,
};
pub use transform::{
    invert_rigid, object_to_world, relative_rotation, transform_points, world_to_camera,
    world_to_object, FrameTag, PointCloud, RigidTransform,
};

/// Three-component real vector.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Tolerance used to validate orthonormality and handedness.
pub const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("matrix is not a proper rotation: {0}")]
    NotARotation(String),
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: String, found: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("need at least 3 point pairs, got {0}")]
    TooFewPairs(usize),
    #[error("point sets differ in size: {0} vs {1}")]
    CardinalityMismatch(usize, usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("grid dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("no jointly valid pixels")]
    NoValidPixels,
    #[error("estimated scale is not positive: {0}")]
    NonPositiveScale(f64),
    #[error("selection is empty")]
    EmptySelection,
    #[error("box does not intersect the image")]
    BoxOutsideImage,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid axis order token `{0}`")]
    InvalidOrder(String),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

pub(crate) fn ensure_finite(v: &Vec3, what: &'static str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite(what))
    }
}
