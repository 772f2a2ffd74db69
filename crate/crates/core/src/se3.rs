//! Rigid transforms and unit quaternions.
//!
//! Transforms keep their rotation as a 3×3 matrix because every link of the
//! frame chain is matrix-native. Quaternions are used only where samples are
//! logged and averaged.

use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on ‖RᵀR − I‖∞ before a rotation is re-projected onto SO(3).
pub const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }
}

/// A single-axis motion: a rotation (rad) about, or a translation (mm) along,
/// one of the coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Rotation(Axis, f64),
    Translation(Axis, f64),
}

/// Homogeneous rigid transform with translation in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not proper and orthonormal.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let err = orthonormality_error(&rotation);
        let det = rotation.determinant();
        if err.is_nan() || det.is_nan() || err >= ORTHO_TOL || (det - 1.0).abs() >= ORTHO_TOL {
            return Err(Error::Invalid(format!(
                "rotation is not in SO(3): orthonormality error {err:e}, det {det}"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds a transform from a matrix already known to be a rotation
    /// (closed-form kinematics). Drift beyond [`ORTHO_TOL`] is projected away.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
        .reorthonormalized()
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn elementary(motion: Elementary) -> Self {
        match motion {
            Elementary::Rotation(axis, angle) => Self {
                rotation: axis_rotation(axis, angle),
                translation: Vector3::zeros(),
            },
            Elementary::Translation(axis, distance) => {
                Self::from_translation(axis.unit() * distance)
            }
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
        .reorthonormalized()
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Largest element-wise deviation between the two 4×4 matrices.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).amax()
    }

    pub fn orientation(&self) -> UnitQuaternion {
        UnitQuaternion::from_rotation_matrix(&self.rotation)
    }

    fn reorthonormalized(mut self) -> Self {
        if orthonormality_error(&self.rotation) > ORTHO_TOL {
            self.rotation = nearest_rotation(&self.rotation);
        }
        self
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a RigidTransform> for &'a RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &'a RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

/// Right-handed rotation about a coordinate axis.
pub fn axis_rotation(axis: Axis, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    match axis {
        Axis::X => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// ‖RᵀR − I‖∞ (max absolute element).
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Closest proper rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = u * fix * v_t;
    }
    r
}

/// Unit quaternion, scalar-first storage. `q` and `-q` are the same rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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

    /// Normalizes the given components. Fails on a zero or non-finite input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Invalid(format!(
                "cannot normalize quaternion ({w}, {x}, {y}, {z})"
            )));
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Wraps components that are already unit-norm to within ~1e-14, leaving
    /// them untouched so that stored values survive a write/read cycle exactly.
    pub(crate) fn from_normalized_unchecked(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let a = axis.normalize();
        let (s, c) = (angle / 2.0).sin_cos();
        Self {
            w: c,
            x: a.x * s,
            y: a.y * s,
            z: a.z * s,
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

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Representative with non-negative scalar part; a zero scalar part is
    /// resolved by the first non-zero vector component.
    pub fn canonical(&self) -> Self {
        let lead = [self.w, self.x, self.y, self.z]
            .into_iter()
            .find(|c| c.abs() > 1e-12)
            .unwrap_or(self.w);
        if lead < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Shepperd's method.
    pub fn from_rotation_matrix(r: &Matrix3<f64>) -> Self {
        let trace = r.trace();
        let (w, x, y, z);
        if trace > r[(0, 0)] && trace > r[(1, 1)] && trace > r[(2, 2)] {
            let s = 2.0 * (1.0 + trace).sqrt();
            w = 0.25 * s;
            x = (r[(2, 1)] - r[(1, 2)]) / s;
            y = (r[(0, 2)] - r[(2, 0)]) / s;
            z = (r[(1, 0)] - r[(0, 1)]) / s;
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            w = (r[(2, 1)] - r[(1, 2)]) / s;
            x = 0.25 * s;
            y = (r[(0, 1)] + r[(1, 0)]) / s;
            z = (r[(0, 2)] + r[(2, 0)]) / s;
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
            w = (r[(0, 2)] - r[(2, 0)]) / s;
            x = (r[(0, 1)] + r[(1, 0)]) / s;
            y = 0.25 * s;
            z = (r[(1, 2)] + r[(2, 1)]) / s;
        } else {
            let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
            w = (r[(1, 0)] - r[(0, 1)]) / s;
            x = (r[(0, 2)] + r[(2, 0)]) / s;
            y = (r[(1, 2)] + r[(2, 1)]) / s;
            z = 0.25 * s;
        }
        Self::new(w, x, y, z).expect("rotation matrix yields a non-zero quaternion")
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
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;

    fn neg(self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Hamilton product (rotation `self` applied after `rhs`).
    fn mul(self, r: UnitQuaternion) -> UnitQuaternion {
        let l = self;
        Self {
            w: l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            x: l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            y: l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            z: l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        }
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.w, self.x, self.y, self.z)
    }
}

/// Markley's quaternion mean: the eigenvector of Σ qᵢqᵢᵀ with the largest
/// eigenvalue, which maximizes Σ (qᵀqᵢ)² and is blind to per-sample sign.
pub fn quat_average(samples: &[UnitQuaternion]) -> Result<UnitQuaternion> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let accumulator = samples.iter().fold(Matrix4::<f64>::zeros(), |acc, q| {
        let v = q.as_vector();
        acc + v * v.transpose()
    });
    let eig = SymmetricEigen::new(accumulator);
    let best = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(best);
    Ok(UnitQuaternion::new(v[0], v[1], v[2], v[3])?.canonical())
}

/// Rotation angle between two orientations, in [0, π].
///
/// Equal to `2·acos(min(1, |⟨a,b⟩|))`; evaluated through the relative
/// rotation with `atan2` so that small angles keep full precision.
pub fn geodesic_angle(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let rel = a.conjugate() * *b;
    let v = (rel.x * rel.x + rel.y * rel.y + rel.z * rel.z).sqrt();
    2.0 * v.atan2(rel.w.abs())
}
