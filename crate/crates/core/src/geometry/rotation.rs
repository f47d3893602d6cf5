use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Result, Vec3, ORTHO_TOL};

/// Rotation magnitude below which a motion is reported as negligible (radians).
pub const ANGLE_EPSILON: f64 = 0.01;

/// Components within this distance are considered tied when picking the
/// primary rotation axis.
const AXIS_TIE_TOL: f64 = 1e-12;

/// Below this `|cos(middle angle)|` an Euler decomposition is in gimbal lock.
const GIMBAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i % 3 {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }

    pub fn unit(self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        })
    }
}

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and handedness within [`ORTHO_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite("rotation"));
        }
        let gram = m.transpose() * m;
        let err = (gram - Matrix3::identity()).abs().max();
        if err > ORTHO_TOL {
            return Err(GeometryError::NotARotation(format!(
                "R^T R deviates from identity by {err:e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(GeometryError::NotARotation(format!("determinant {det}")));
        }
        Ok(Rotation(m))
    }

    pub fn from_row_major(rows: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(rows))
    }

    /// Rodrigues exponential of an axis-angle vector.
    pub fn from_rotvec(rv: &Vec3) -> Self {
        Rotation(*Rotation3::new(*rv).matrix())
    }

    /// Elemental rotation about a coordinate axis (right-hand rule).
    pub fn about_axis(axis: Axis, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let m = match axis {
            Axis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            Axis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            Axis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        };
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Column `axis` of the matrix: where the local axis points in the parent frame.
    pub fn column(&self, axis: Axis) -> Vec3 {
        self.0.column(axis.index()).into_owned()
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.to_rotvec().norm()
    }

    /// Angle of `self^T other`.
    pub fn geodesic_distance(&self, other: &Rotation) -> f64 {
        self.transpose().compose(other).angle()
    }

    /// Logarithm map. The norm of the result is the rotation angle in `[0, π]`.
    ///
    /// At exactly π the axis sign is ambiguous; the first non-zero component
    /// is made positive.
    pub fn to_rotvec(&self) -> Vec3 {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let q = q.into_inner();
        let (mut w, mut v) = (q.w, q.imag());
        if w < 0.0 {
            w = -w;
            v = -v;
        }
        let n = v.norm();
        if n == 0.0 {
            return Vec3::zeros();
        }
        let angle = 2.0 * n.atan2(w);
        let mut rv = if n > 1e-12 { v * (angle / n) } else { v * (2.0 / w) };
        if w.abs() < 1e-12 {
            if let Some(first) = rv.iter().copied().find(|c| c.abs() > 1e-12) {
                if first < 0.0 {
                    rv = -rv;
                }
            }
        }
        rv
    }

    /// Intrinsic Tait–Bryan decomposition: `R = R_a(θ0) · R_b(θ1) · R_c(θ2)`
    /// for the order `abc`.
    pub fn to_euler(&self, order: EulerOrder) -> EulerAngles {
        let [i, j, k] = order.indices();
        let s = order.parity();
        let r = &self.0;

        let first = (-s * r[(j, k)]).atan2(r[(k, k)]);
        let cos_mid = r[(i, i)].hypot(r[(i, j)]);
        let mid = (s * r[(i, k)]).atan2(cos_mid);

        let gimbal_lock = cos_mid < GIMBAL_TOL;
        let (first, third) = if gimbal_lock {
            // R = R_i(a) R_j(mid) with the third angle pinned to zero.
            let rest = self.0 * Rotation::about_axis(order.0[1], mid).0.transpose();
            (axis_angle_of_elemental(&rest, i), 0.0)
        } else {
            // Remove the first rotation; row j of the remainder belongs to R_k(third).
            let rest = Rotation::about_axis(order.0[0], first).0.transpose() * self.0;
            let p = (k + 1) % 3;
            let q = (k + 2) % 3;
            let third = if j == p {
                (-rest[(j, q)]).atan2(rest[(j, p)])
            } else {
                rest[(j, p)].atan2(rest[(j, q)])
            };
            (first, third)
        };

        EulerAngles {
            order,
            angles: [first, mid, third],
            gimbal_lock,
        }
    }

    pub fn from_euler(order: EulerOrder, angles: [f64; 3]) -> Self {
        let EulerOrder([a, b, c]) = order;
        Rotation::about_axis(a, angles[0])
            .compose(&Rotation::about_axis(b, angles[1]))
            .compose(&Rotation::about_axis(c, angles[2]))
    }
}

fn axis_angle_of_elemental(m: &Matrix3<f64>, axis: usize) -> f64 {
    let p = (axis + 1) % 3;
    let q = (axis + 2) % 3;
    m[(q, p)].atan2(m[(p, p)])
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[f64; 9]>::deserialize(d)?;
        Rotation::from_row_major(&rows).map_err(serde::de::Error::custom)
    }
}

/// Permutation of `{x, y, z}` naming an intrinsic rotation sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EulerOrder(pub [Axis; 3]);

impl EulerOrder {
    fn indices(&self) -> [usize; 3] {
        [self.0[0].index(), self.0[1].index(), self.0[2].index()]
    }

    /// +1 for cyclic orders (xyz, yzx, zxy), -1 otherwise.
    fn parity(&self) -> f64 {
        let [i, j, _] = self.indices();
        if (i + 1) % 3 == j {
            1.0
        } else {
            -1.0
        }
    }
}

impl FromStr for EulerOrder {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        let axes: Vec<Axis> = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'x' => Ok(Axis::X),
                'y' => Ok(Axis::Y),
                'z' => Ok(Axis::Z),
                _ => Err(GeometryError::InvalidOrder(s.to_string())),
            })
            .collect::<Result<_>>()?;
        if axes.len() != 3 || axes[0] == axes[1] || axes[1] == axes[2] || axes[0] == axes[2] {
            return Err(GeometryError::InvalidOrder(s.to_string()));
        }
        Ok(EulerOrder([axes[0], axes[1], axes[2]]))
    }
}

impl fmt::Display for EulerOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.0 {
            write!(f, "{}", a.to_string().to_lowercase())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub order: EulerOrder,
    pub angles: [f64; 3],
    /// The middle angle is ±π/2; the third angle was fixed to zero.
    pub gimbal_lock: bool,
}

/// Camera motion named from the dominant rotation-vector component, using
/// the OpenCV axes (+x right, +y down, +z forward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionLabel {
    PanRight,
    PanLeft,
    TiltUp,
    TiltDown,
    RollClockwise,
    RollCounterclockwise,
    Negligible,
}

impl MotionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionLabel::PanRight => "pan_right",
            MotionLabel::PanLeft => "pan_left",
            MotionLabel::TiltUp => "tilt_up",
            MotionLabel::TiltDown => "tilt_down",
            MotionLabel::RollClockwise => "roll_clockwise",
            MotionLabel::RollCounterclockwise => "roll_counterclockwise",
            MotionLabel::Negligible => "negligible",
        }
    }

    pub const ALL: [MotionLabel; 7] = [
        MotionLabel::PanRight,
        MotionLabel::PanLeft,
        MotionLabel::TiltUp,
        MotionLabel::TiltDown,
        MotionLabel::RollClockwise,
        MotionLabel::RollCounterclockwise,
        MotionLabel::Negligible,
    ];
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionLabel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        MotionLabel::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown motion label `{s}`"))
    }
}

/// Labels the primary axis of a rotation vector: `ry > 0` pans right,
/// `rx > 0` tilts up, `rz > 0` rolls clockwise.
///
/// The sign reading applies to rotation vectors of [`super::relative_rotation`]
/// output expressed in the reference camera's axes. Reading the same vector as
/// an extrinsic delta would flip every label.
///
/// Ties within 1e-12 prefer y, then x, then z.
pub fn classify_primary_rotation(rv: &Vec3, angle_epsilon: f64) -> MotionLabel {
    if rv.norm() <= angle_epsilon {
        return MotionLabel::Negligible;
    }
    let largest = rv.amax();
    let axis = [Axis::Y, Axis::X, Axis::Z]
        .into_iter()
        .find(|a| rv[a.index()].abs() >= largest - AXIS_TIE_TOL)
        .unwrap_or(Axis::Y);
    let positive = rv[axis.index()] > 0.0;
    match (axis, positive) {
        (Axis::Y, true) => MotionLabel::PanRight,
        (Axis::Y, false) => MotionLabel::PanLeft,
        (Axis::X, true) => MotionLabel::TiltUp,
        (Axis::X, false) => MotionLabel::TiltDown,
        (Axis::Z, true) => MotionLabel::RollClockwise,
        (Axis::Z, false) => MotionLabel::RollCounterclockwise,
    }
}
