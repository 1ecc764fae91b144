//! Rotation and rigid-transform algebra.
//!
//! Quaternions are kept unit-norm and sign-canonical (`w >= 0`, and when
//! `w == 0` the first nonzero vector component is positive) so that every
//! rotation has exactly one serialized representation.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum deviation from unit norm accepted by [`UnitQuaternion::from_normalized`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Pitch magnitude (degrees) above which Euler extraction reports gimbal lock.
pub const GIMBAL_LOCK_PITCH_DEG: f64 = 89.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Se3Error {
    #[error("quaternion has non-finite components")]
    NonFinite,
    #[error("quaternion has zero norm")]
    ZeroNorm,
    #[error("quaternion norm {norm} is not within {tolerance} of 1")]
    NotUnitNorm { norm: f64, tolerance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, Se3Error> {
        if ![w, x, y, z].iter().all(|c| c.is_finite()) {
            return Err(Se3Error::NonFinite);
        }
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if norm == 0.0 {
            return Err(Se3Error::ZeroNorm);
        }
        Ok(Self::canonical(w / norm, x / norm, y / norm, z / norm))
    }

    /// Accepts components that are already unit-norm within
    /// [`UNIT_NORM_TOLERANCE`] and keeps them unscaled, so parsed values
    /// re-serialize to the same digits.
    pub fn from_normalized(w: f64, x: f64, y: f64, z: f64) -> Result<Self, Se3Error> {
        if ![w, x, y, z].iter().all(|c| c.is_finite()) {
            return Err(Se3Error::NonFinite);
        }
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Se3Error::NotUnitNorm {
                norm,
                tolerance: UNIT_NORM_TOLERANCE,
            });
        }
        Ok(Self::canonical(w, x, y, z))
    }

    /// Rotation of `angle_rad` about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle_rad == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle_rad * 0.5).sin_cos();
        let a = axis / n;
        Self::new(c, a.x * s, a.y * s, a.z * s).unwrap_or(Self::IDENTITY)
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let (w, x, y, z) = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            (
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        Self::new(w, x, y, z).unwrap_or(Self::IDENTITY)
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else {
            [x, y, z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        // `+ 0.0` folds negative zeros so that equal rotations compare and print equal.
        if flip {
            Self {
                w: -w + 0.0,
                x: -x + 0.0,
                y: -y + 0.0,
                z: -z + 0.0,
            }
        } else {
            Self {
                w: w + 0.0,
                x: x + 0.0,
                y: y + 0.0,
                z: z + 0.0,
            }
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Components in `[w, x, y, z]` order.
    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
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

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Geodesic rotation angle in radians, in `[0, pi]`.
    ///
    /// Evaluated as `4 atan2(|a - b|, |a + b|)` after aligning signs, which is
    /// exact at zero and bitwise symmetric in its arguments.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let a = self.wxyz();
        let mut b = other.wxyz();
        if self.dot(other) < 0.0 {
            b.iter_mut().for_each(|c| *c = -*c);
        }
        let diff = norm4([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]);
        let sum = norm4([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
        4.0 * diff.atan2(sum)
    }
}

fn norm4(v: [f64; 4]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt()
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, r: UnitQuaternion) -> UnitQuaternion {
        let l = self;
        let w = l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z;
        let x = l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y;
        let y = l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x;
        let z = l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w;
        UnitQuaternion::new(w, x, y, z).unwrap_or(UnitQuaternion::IDENTITY)
    }
}

impl Serialize for UnitQuaternion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.wxyz().serialize(s)
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        UnitQuaternion::new(w, x, y, z).map_err(serde::de::Error::custom)
    }
}

/// Rigid transform. Applied to a point as `R p + t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: UnitQuaternion,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rotation: UnitQuaternion::IDENTITY,
        translation: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn new(rotation: UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::IDENTITY, t)
    }

    pub fn from_rotation(q: UnitQuaternion) -> Self {
        Self::new(q, Vector3::zeros())
    }

    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv = self.rotation.inverse();
        Transform {
            rotation: inv,
            translation: -inv.rotate(&self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.to_rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_parts(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Transform {
        Transform::new(UnitQuaternion::from_rotation_matrix(rotation), translation)
    }
}

impl Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.translation;
        let q = &self.rotation;
        write!(
            f,
            "t=[{:.6}, {:.6}, {:.6}] q=[{:.9}, {:.9}, {:.9}, {:.9}]",
            t.x, t.y, t.z, q.w, q.x, q.y, q.z
        )
    }
}

pub fn compose(a: &Transform, b: &Transform) -> Transform {
    a.compose(b)
}

pub fn invert(t: &Transform) -> Transform {
    t.inverse()
}

pub fn transform_point(t: &Transform, p: &Vector3<f64>) -> Vector3<f64> {
    t.transform_point(p)
}

/// Geodesic angle between two rotations, degrees in `[0, 180]`.
pub fn rotation_angle_between(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    a.angle_to(b).to_degrees()
}

pub fn translation_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm()
}

/// Order in which the three elementary rotations of an Euler triple are applied.
///
/// Angles are always given as rotations about X, Y and Z respectively; the
/// convention decides how they are multiplied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EulerConvention {
    /// Rotate about X, then the new Y, then the new Z: `R = Rx Ry Rz`.
    #[default]
    IntrinsicXyz,
    /// Rotate about fixed X, then fixed Y, then fixed Z: `R = Rz Ry Rx`.
    ExtrinsicXyz,
    /// Rotate about Z, then the new Y, then the new X: `R = Rz Ry Rx`.
    /// Same matrix as [`EulerConvention::ExtrinsicXyz`].
    IntrinsicZyx,
}

impl EulerConvention {
    pub const ALL: [EulerConvention; 3] = [
        EulerConvention::IntrinsicXyz,
        EulerConvention::ExtrinsicXyz,
        EulerConvention::IntrinsicZyx,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EulerConvention::IntrinsicXyz => "intrinsic_xyz",
            EulerConvention::ExtrinsicXyz => "extrinsic_xyz",
            EulerConvention::IntrinsicZyx => "intrinsic_zyx",
        }
    }
}

impl fmt::Display for EulerConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Euler angles about X, Y, Z in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAnglesDeg {
    pub x_deg: f64,
    pub y_deg: f64,
    pub z_deg: f64,
}

impl EulerAnglesDeg {
    pub fn new(x_deg: f64, y_deg: f64, z_deg: f64) -> Self {
        Self {
            x_deg,
            y_deg,
            z_deg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerDecomposition {
    pub angles: EulerAnglesDeg,
    /// Pitch within 0.01 degrees of +-90; `x_deg` then carries the whole
    /// residual rotation and `z_deg` is 0.
    pub gimbal_lock: bool,
}

pub fn quat_from_euler(e: &EulerAnglesDeg) -> UnitQuaternion {
    quat_from_euler_with(e, EulerConvention::default())
}

pub fn quat_from_euler_with(e: &EulerAnglesDeg, convention: EulerConvention) -> UnitQuaternion {
    let qx = UnitQuaternion::from_axis_angle(&Vector3::x(), e.x_deg.to_radians());
    let qy = UnitQuaternion::from_axis_angle(&Vector3::y(), e.y_deg.to_radians());
    let qz = UnitQuaternion::from_axis_angle(&Vector3::z(), e.z_deg.to_radians());
    match convention {
        EulerConvention::IntrinsicXyz => qx * qy * qz,
        EulerConvention::ExtrinsicXyz | EulerConvention::IntrinsicZyx => qz * qy * qx,
    }
}

pub fn euler_from_quat(q: &UnitQuaternion) -> EulerDecomposition {
    euler_from_quat_with(q, EulerConvention::default())
}

pub fn euler_from_quat_with(q: &UnitQuaternion, convention: EulerConvention) -> EulerDecomposition {
    let r = q.to_rotation_matrix();
    let (x, y, z, lock) = match convention {
        EulerConvention::IntrinsicXyz => {
            let pitch = r[(0, 2)].atan2(r[(1, 2)].hypot(r[(2, 2)]));
            if pitch.to_degrees().abs() > GIMBAL_LOCK_PITCH_DEG {
                (r[(2, 1)].atan2(r[(1, 1)]), pitch, 0.0, true)
            } else {
                (
                    (-r[(1, 2)]).atan2(r[(2, 2)]),
                    pitch,
                    (-r[(0, 1)]).atan2(r[(0, 0)]),
                    false,
                )
            }
        }
        EulerConvention::ExtrinsicXyz | EulerConvention::IntrinsicZyx => {
            let pitch = (-r[(2, 0)]).atan2(r[(2, 1)].hypot(r[(2, 2)]));
            if pitch.to_degrees().abs() > GIMBAL_LOCK_PITCH_DEG {
                ((-r[(1, 2)]).atan2(r[(1, 1)]), pitch, 0.0, true)
            } else {
                (
                    r[(2, 1)].atan2(r[(2, 2)]),
                    pitch,
                    r[(1, 0)].atan2(r[(0, 0)]),
                    false,
                )
            }
        }
    };
    EulerDecomposition {
        angles: EulerAnglesDeg::new(
            wrap_half_open(x.to_degrees()),
            y.to_degrees() + 0.0,
            wrap_half_open(z.to_degrees()),
        ),
        gimbal_lock: lock,
    }
}

/// Maps an angle in `[-180, 180]` to `(-180, 180]`.
fn wrap_half_open(deg: f64) -> f64 {
    if deg <= -180.0 {
        deg + 360.0
    } else {
        deg + 0.0
    }
}
