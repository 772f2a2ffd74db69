//! Frame chain world → UAV → hinge → base → telescope tip → end effector, and
//! the mapping from configuration changes to motor commands.
//!
//! The hinge tilt is a rotation about the hinge y axis by α, with α = 0
//! pointing the manipulator straight down (−z of {H}) and α = 90° pointing it
//! along −x of {H}.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::ops::{Add, Sub};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::arc::{arc_transform, cable_deltas_from_config, ArcParams};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, BETA_MAX};
use crate::se3::{Axis, Elementary, RigidTransform};

/// A point of the five-dimensional configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltXConfig {
    arc: ArcParams,
    alpha: f64,
    beta: f64,
}

impl TiltXConfig {
    pub fn new(arc: ArcParams, alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_beta(beta)?;
        Ok(Self { arc, alpha, beta })
    }

    /// Builds a configuration whose arc length is the backbone length and
    /// whose bend is within the geometry's limit.
    pub fn with_geometry(
        kappa: f64,
        phi: f64,
        alpha: f64,
        beta: f64,
        g: &Geometry,
    ) -> Result<Self> {
        let arc = ArcParams::new(kappa, phi, g.backbone_length)?;
        arc.check_bend(g.max_bend)?;
        Self::new(arc, alpha, beta)
    }

    pub fn zero(g: &Geometry) -> Self {
        Self::with_geometry(0.0, 0.0, 0.0, 0.0, g).expect("zero configuration is valid")
    }

    pub fn arc(&self) -> &ArcParams {
        &self.arc
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn check(&self, g: &Geometry) -> Result<()> {
        self.arc.check_bend(g.max_bend)?;
        if (self.arc.ell() - g.backbone_length).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "arc length {} differs from backbone length {}",
                self.arc.ell(),
                g.backbone_length
            )));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&alpha) {
        return Err(Error::range("alpha (deg)", alpha.to_degrees(), 0.0, 90.0));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=BETA_MAX).contains(&beta) {
        return Err(Error::range("beta (mm)", beta, 0.0, BETA_MAX));
    }
    Ok(())
}

/// Hinge-to-base transform for tilt `alpha`.
///
/// Written in the chain as a rotation by −α under the convention
/// R_y'(θ) = [[cθ, 0, −sθ], [0, 1, 0], [sθ, 0, cθ]], which is the
/// right-handed rotation about y by +α.
pub fn hinge_tilt(alpha: f64) -> RigidTransform {
    RigidTransform::elementary(Elementary::Rotation(Axis::Y, alpha))
}

/// UAV-to-hinge translation (H_x, H_y, −H_z).
pub fn uav_to_hinge(g: &Geometry) -> RigidTransform {
    let h = g.hinge_offset;
    RigidTransform::elementary(Elementary::Translation(Axis::X, h.x))
        * RigidTransform::elementary(Elementary::Translation(Axis::Y, h.y))
        * RigidTransform::elementary(Elementary::Translation(Axis::Z, -h.z))
}

/// End-effector pose in the hinge frame, composed link by link.
pub fn tiltx_fk(cfg: &TiltXConfig, g: &Geometry) -> RigidTransform {
    let base_to_tip =
        RigidTransform::elementary(Elementary::Translation(Axis::Z, -(g.s + cfg.beta)));
    hinge_tilt(cfg.alpha) * base_to_tip * arc_transform(&cfg.arc)
}

/// The same pose from the expanded closed form. Requires κ > 0.
pub fn tiltx_fk_closed_form(cfg: &TiltXConfig, g: &Geometry) -> RigidTransform {
    let k = cfg.arc.kappa();
    let x = cfg.arc.bend();
    let (skl, ckl) = x.sin_cos();
    let (sp, cp) = cfg.arc.phi().sin_cos();
    let (sa, ca) = cfg.alpha.sin_cos();
    let reach = g.s + cfg.beta;
    // 1 − cos(κℓ) = 2 sin²(κℓ/2)
    let one_minus_c = 2.0 * (x / 2.0).sin().powi(2);

    let rotation = Matrix3::new(
        ca * ckl * cp + sa * skl,
        ca * sp,
        ca * skl * cp - sa * ckl,
        ckl * sp,
        -cp,
        skl * sp,
        -sa * ckl * cp + ca * skl,
        -sa * sp,
        -sa * skl * cp - ca * ckl,
    );
    let translation = Vector3::new(
        ca * one_minus_c * cp / k - sa * skl / k - sa * reach,
        one_minus_c * sp / k,
        -sa * one_minus_c * cp / k - ca * skl / k - ca * reach,
    );
    RigidTransform::from_parts(rotation, translation)
}

/// End-effector pose in the world frame given the UAV pose.
pub fn world_fk(world_to_uav: &RigidTransform, cfg: &TiltXConfig, g: &Geometry) -> RigidTransform {
    *world_to_uav * uav_to_hinge(g) * tiltx_fk(cfg, g)
}

/// Extension change (mm) produced by turning the telescope motor `dq5` rad.
pub fn extension_from_motor(dq5: f64, g: &Geometry) -> f64 {
    g.lead_pitch * g.spur_ratio * dq5 / TAU
}

/// Telescope motor angle (rad) for an extension change (mm).
pub fn motor_from_extension(dbeta: f64, g: &Geometry) -> f64 {
    dbeta * TAU / (g.lead_pitch * g.spur_ratio)
}

/// Extension change for a telescope motor move starting at `beta`; the move
/// must keep β inside [0, 75] mm. The same change applies to every cable.
pub fn telescopic_delta(beta: f64, dq5: f64, g: &Geometry) -> Result<f64> {
    let dbeta = extension_from_motor(dq5, g);
    check_beta(beta + dbeta)?;
    Ok(dbeta)
}

/// Tilt angle (rad) for a tilt motor angle (rad) through the worm drive:
/// α = 2π·q₄[rev] / N_w.
pub fn tilt_from_motor(q4: f64, g: &Geometry) -> Result<f64> {
    let alpha = q4 / g.worm_ratio;
    check_alpha(alpha)?;
    Ok(alpha)
}

/// Tilt motor angle (rad) for a tilt angle (rad).
pub fn motor_from_tilt(alpha: f64, g: &Geometry) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * g.worm_ratio)
}

/// Distance between the fixed and the moving tilt pulley centres.
pub fn tilt_pulley_span(alpha: f64, g: &Geometry) -> f64 {
    let c1 = Vector2::from(g.pulley.c1);
    let c2 = Vector2::new(g.pulley.r * alpha.sin(), -g.pulley.r * alpha.cos());
    (c2 - c1).norm()
}

/// Cable length changes caused by tilting from `alpha_from` to `alpha_to`.
/// Only cable 1 runs over the moving pulley.
pub fn tilt_compensation(alpha_from: f64, alpha_to: f64, g: &Geometry) -> Result<[f64; 3]> {
    check_alpha(alpha_from)?;
    check_alpha(alpha_to)?;
    Ok([
        tilt_pulley_span(alpha_from, g) - tilt_pulley_span(alpha_to, g),
        0.0,
        0.0,
    ])
}

/// Motor angle increments (rad). Cable motors first, then tilt and telescope.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorState {
    pub cable: [f64; 3],
    pub tilt: f64,
    pub telescope: f64,
}

impl ActuatorState {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.cable[0],
            self.cable[1],
            self.cable[2],
            self.tilt,
            self.telescope,
        ]
    }
}

impl Add for ActuatorState {
    type Output = ActuatorState;

    fn add(self, o: ActuatorState) -> ActuatorState {
        ActuatorState {
            cable: [
                self.cable[0] + o.cable[0],
                self.cable[1] + o.cable[1],
                self.cable[2] + o.cable[2],
            ],
            tilt: self.tilt + o.tilt,
            telescope: self.telescope + o.telescope,
        }
    }
}

impl Sub for ActuatorState {
    type Output = ActuatorState;

    fn sub(self, o: ActuatorState) -> ActuatorState {
        ActuatorState {
            cable: [
                self.cable[0] - o.cable[0],
                self.cable[1] - o.cable[1],
                self.cable[2] - o.cable[2],
            ],
            tilt: self.tilt - o.tilt,
            telescope: self.telescope - o.telescope,
        }
    }
}

/// Per-cable length change split by source (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableBreakdown {
    pub tilt: f64,
    pub telescope: f64,
    pub bend: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationPlan {
    pub cables: [CableBreakdown; 3],
    pub motors: ActuatorState,
}

/// Motor increments that take the manipulator from `from` to `to`.
///
/// Each cable changes by the tilt pulley term, the telescope term and the
/// change of the bending term; the cable motors wind that length onto their
/// spools. Wrapping-angle changes at the pulleys are neglected.
pub fn actuation_plan(from: &TiltXConfig, to: &TiltXConfig, g: &Geometry) -> Result<ActuationPlan> {
    from.check(g)?;
    to.check(g)?;
    let tilt = tilt_compensation(from.alpha, to.alpha, g)?;
    let telescope = to.beta - from.beta;
    let bend_from = cable_deltas_from_config(&from.arc, &g.layout);
    let bend_to = cable_deltas_from_config(&to.arc, &g.layout);

    let cables: [CableBreakdown; 3] = std::array::from_fn(|i| {
        let bend = bend_to[i] - bend_from[i];
        CableBreakdown {
            tilt: tilt[i],
            telescope,
            bend,
            total: tilt[i] + telescope + bend,
        }
    });
    let motors = ActuatorState {
        cable: std::array::from_fn(|i| cables[i].total / g.spool_radius[i]),
        tilt: motor_from_tilt(to.alpha, g)? - motor_from_tilt(from.alpha, g)?,
        telescope: motor_from_extension(telescope, g),
    };
    Ok(ActuationPlan { cables, motors })
}
