//! Constant-curvature kinematics of the cable-driven continuum section.
//!
//! The section is a circular arc described by curvature `kappa`, bend-plane
//! angle `phi` and arc length `ell`. The tip frame {E} is expressed in the
//! telescope tip frame {T}, whose −z axis is the straight backbone direction.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::RigidTransform;

/// Below this bend angle κℓ (rad) the tip position uses its series expansion.
pub const EPS_KL: f64 = 1e-6;

/// Curvatures below this (1/mm) are treated as straight when recovering φ.
pub const EPS_KAPPA: f64 = 1e-12;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcParams {
    kappa: f64,
    phi: f64,
    ell: f64,
}

impl ArcParams {
    /// Negative curvature is folded into the bend plane (φ + π).
    pub fn new(kappa: f64, phi: f64, ell: f64) -> Result<Self> {
        if !kappa.is_finite() || !phi.is_finite() {
            return Err(Error::Invalid(format!(
                "arc parameters must be finite (kappa {kappa}, phi {phi})"
            )));
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::Invalid(format!("arc length must be > 0, got {ell}")));
        }
        let (kappa, phi) = if kappa < 0.0 {
            (-kappa, phi + PI)
        } else {
            (kappa, phi)
        };
        Ok(Self {
            kappa,
            phi: wrap_angle(phi),
            ell,
        })
    }

    pub fn straight(ell: f64) -> Result<Self> {
        Self::new(0.0, 0.0, ell)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Total bend angle κℓ (rad).
    pub fn bend(&self) -> f64 {
        self.kappa * self.ell
    }

    pub fn check_bend(&self, theta_max: f64) -> Result<()> {
        let bend = self.bend();
        if bend > theta_max * (1.0 + 1e-12) {
            return Err(Error::range("kappa*ell (rad)", bend, 0.0, theta_max));
        }
        Ok(())
    }
}

/// Cable lengths in millimetres, cable 1 first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableLengths([f64; 3]);

impl CableLengths {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Result<Self> {
        for (i, l) in [l1, l2, l3].into_iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidCableLength {
                    index: i + 1,
                    value: l,
                });
            }
        }
        Ok(Self([l1, l2, l3]))
    }

    /// Lengths `base + deltas[i]`.
    pub fn from_deltas(base: f64, deltas: [f64; 3]) -> Result<Self> {
        Self::new(base + deltas[0], base + deltas[1], base + deltas[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Placement of the three cables on the section cross-cut.
///
/// `theta` holds each cable's angular position measured about the base frame
/// z axis from the x axis. The default numbers the cables clockwise when the
/// section is viewed along −z, which is the numbering under which
/// [`config_from_cables`] inverts [`cable_deltas_from_config`] with the same
/// sign of φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableLayout {
    d: f64,
    theta: [f64; 3],
}

impl CableLayout {
    pub fn new(d: f64, theta: [f64; 3]) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Geometry(format!(
                "cable offset d must be > 0, got {d}"
            )));
        }
        if wrap_angle(theta[0]).abs() > 1e-9 {
            return Err(Error::Geometry(
                "cable 1 must sit on the base x axis (theta1 = 0)".into(),
            ));
        }
        let spacing = |a: f64, b: f64| wrap_angle(a - b).abs();
        let third = TAU / 3.0;
        if (spacing(theta[0], theta[1]) - third).abs() > 1e-9
            || (spacing(theta[1], theta[2]) - third).abs() > 1e-9
            || (spacing(theta[2], theta[0]) - third).abs() > 1e-9
        {
            return Err(Error::Geometry(
                "cables must be spaced 120 degrees apart".into(),
            ));
        }
        Ok(Self { d, theta })
    }

    /// Clockwise layout, θ = (0°, 240°, 120°).
    pub fn clockwise(d: f64) -> Result<Self> {
        Self::new(d, [0.0, 4.0 * PI / 3.0, 2.0 * PI / 3.0])
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn theta(&self) -> [f64; 3] {
        self.theta
    }
}

/// Pose of the section tip in the telescope tip frame.
///
/// Uses the closed form away from the straight configuration and the
/// series expansion of the translation for κℓ ≤ [`EPS_KL`].
pub fn arc_transform(arc: &ArcParams) -> RigidTransform {
    if arc.bend() <= EPS_KL {
        arc_transform_small_bend(arc)
    } else {
        let x = arc.bend();
        // (1 − cos x)/κ written as 2 sin²(x/2)/κ to avoid cancellation.
        let half = (x / 2.0).sin();
        let radial = 2.0 * half * half / arc.kappa;
        let axial = x.sin() / arc.kappa;
        RigidTransform::from_parts(arc_rotation(arc), arc_translation(arc.phi, radial, axial))
    }
}

/// Series branch of [`arc_transform`]; exact at κ = 0 where it gives
/// `t = (0, 0, −ℓ)`.
pub fn arc_transform_small_bend(arc: &ArcParams) -> RigidTransform {
    let x = arc.bend();
    let ell = arc.ell;
    let radial = ell * (x / 2.0 - x * x * x / 24.0);
    let axial = ell * (1.0 - x * x / 6.0);
    RigidTransform::from_parts(arc_rotation(arc), arc_translation(arc.phi, radial, axial))
}

/// The closed-form matrix evaluated literally, dividing by κ. Undefined at
/// κ = 0; kept as the reference the guarded evaluation is checked against.
pub fn arc_transform_closed_form(arc: &ArcParams) -> RigidTransform {
    let x = arc.bend();
    let k = arc.kappa;
    let radial = (1.0 - x.cos()) / k;
    let axial = x.sin() / k;
    RigidTransform::from_parts(arc_rotation(arc), arc_translation(arc.phi, radial, axial))
}

fn arc_rotation(arc: &ArcParams) -> Matrix3<f64> {
    let (sb, cb) = arc.bend().sin_cos();
    let (sp, cp) = arc.phi.sin_cos();
    Matrix3::new(
        cb * cp,
        sp,
        sb * cp, //
        cb * sp,
        -cp,
        sb * sp, //
        sb,
        0.0,
        -cb,
    )
}

fn arc_translation(phi: f64, radial: f64, axial: f64) -> Vector3<f64> {
    let (sp, cp) = phi.sin_cos();
    Vector3::new(radial * cp, radial * sp, -axial)
}

/// Recovers the arc from measured cable lengths.
///
/// The backbone is inextensible so ℓ = `backbone_length`. φ is the
/// four-quadrant arctangent of `(√3(l₂ − l₃), l₂ + l₃ − 2l₁)` and is set to 0
/// when the curvature vanishes.
pub fn config_from_cables(
    lengths: &CableLengths,
    layout: &CableLayout,
    backbone_length: f64,
) -> Result<ArcParams> {
    let [l1, l2, l3] = lengths.as_array();
    for (i, l) in [l1, l2, l3].into_iter().enumerate() {
        if l.is_nan() || l <= 0.0 {
            return Err(Error::InvalidCableLength {
                index: i + 1,
                value: l,
            });
        }
    }
    // l1² + l2² + l3² − l1l2 − l1l3 − l2l3 in its cancellation-free form.
    let radicand = 0.5 * ((l1 - l2).powi(2) + (l2 - l3).powi(2) + (l3 - l1).powi(2));
    let kappa = 2.0 / (layout.d * (l1 + l2 + l3)) * radicand.sqrt();
    let phi = if kappa < EPS_KAPPA {
        0.0
    } else {
        (3f64.sqrt() * (l2 - l3)).atan2(l2 + l3 - 2.0 * l1)
    };
    ArcParams::new(
        if kappa < EPS_KAPPA { 0.0 } else { kappa },
        phi,
        backbone_length,
    )
}

/// Cable length changes that bend the section from straight into `arc`:
/// Δlᵢ = −ℓ κ d cos(θᵢ − φ).
pub fn cable_deltas_from_config(arc: &ArcParams, layout: &CableLayout) -> [f64; 3] {
    let a = arc.ell * arc.kappa * layout.d;
    layout.theta.map(|th| -a * (th - arc.phi).cos())
}
