//! Position-only inverse kinematics by damped least squares.
//!
//! The solver works on four scaled parameters: the bend vector
//! `(κℓ·cos φ, κℓ·sin φ)`, the tilt α, and the extension β/100. The bend
//! vector form is smooth through the straight configuration, where (κ, φ)
//! is singular. After every step the parameters are projected back onto
//! their box (bend ≤ max bend, α ∈ [0°, 90°], β ∈ [0, 75] mm); parameters
//! pinned at a bound and pushed outward are frozen for that step.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};

use crate::arc::ArcParams;
use crate::chain::{tiltx_fk, TiltXConfig};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, BETA_MAX};

const BETA_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolver {
    pub damping: f64,
    pub max_iters: usize,
    /// Position tolerance (mm).
    pub tolerance: f64,
    /// Central-difference step in scaled parameter units.
    pub fd_step: f64,
    /// Largest step norm in scaled parameter units.
    pub max_step: f64,
}

impl Default for IkSolver {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_iters: 200,
            tolerance: 0.1,
            fd_step: 1e-6,
            max_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub config: TiltXConfig,
    pub iterations: usize,
    /// Final position error (mm).
    pub residual: f64,
}

/// Solves for a configuration placing the tip at `target` (mm, hinge frame)
/// with the default solver settings.
pub fn ik_position(target: &Vector3<f64>, g: &Geometry, seed: &TiltXConfig) -> Result<IkSolution> {
    IkSolver::default().solve(target, g, seed)
}

struct Problem<'a> {
    g: &'a Geometry,
    target: Vector3<f64>,
}

impl Problem<'_> {
    fn clamp(&self, p: &mut Vector4<f64>) {
        let bend = p[0].hypot(p[1]);
        if bend > self.g.max_bend {
            let s = self.g.max_bend / bend;
            p[0] *= s;
            p[1] *= s;
        }
        p[2] = p[2].clamp(0.0, FRAC_PI_2);
        p[3] = p[3].clamp(0.0, BETA_MAX / BETA_SCALE);
    }

    fn config(&self, p: &Vector4<f64>) -> TiltXConfig {
        let bend = p[0].hypot(p[1]).min(self.g.max_bend);
        let phi = if bend > 0.0 { p[1].atan2(p[0]) } else { 0.0 };
        let arc = ArcParams::new(bend / self.g.backbone_length, phi, self.g.backbone_length)
            .expect("backbone length is positive");
        TiltXConfig::new(
            arc,
            p[2].clamp(0.0, FRAC_PI_2),
            (p[3] * BETA_SCALE).clamp(0.0, BETA_MAX),
        )
        .expect("clamped configuration is in range")
    }

    fn position(&self, p: &Vector4<f64>) -> Vector3<f64> {
        *tiltx_fk(&self.config(p), self.g).translation()
    }

    fn residual(&self, p: &Vector4<f64>) -> Vector3<f64> {
        self.target - self.position(p)
    }

    /// Central differences; the bend vector is unconstrained in sign so its
    /// columns are differenced symmetrically even at the origin.
    fn jacobian(&self, p: &Vector4<f64>, h: f64) -> Matrix3x4<f64> {
        let mut j = Matrix3x4::zeros();
        for k in 0..4 {
            let mut hi = *p;
            let mut lo = *p;
            hi[k] += h;
            lo[k] -= h;
            j.set_column(
                k,
                &((self.position_raw(&hi) - self.position_raw(&lo)) / (2.0 * h)),
            );
        }
        j
    }

    /// Forward kinematics without clamping α and β, so differences taken on
    /// a bound stay two-sided.
    fn position_raw(&self, p: &Vector4<f64>) -> Vector3<f64> {
        let g = self.g;
        let bend = p[0].hypot(p[1]);
        let phi = if bend > 0.0 { p[1].atan2(p[0]) } else { 0.0 };
        let arc = ArcParams::new(bend / g.backbone_length, phi, g.backbone_length)
            .expect("backbone length is positive");
        let tip = crate::arc::arc_transform(&arc);
        let reach = g.s + p[3] * BETA_SCALE;
        let local = tip.translation() + Vector3::new(0.0, 0.0, -reach);
        crate::se3::axis_rotation(crate::se3::Axis::Y, p[2]) * local
    }
}

impl IkSolver {
    pub fn solve(
        &self,
        target: &Vector3<f64>,
        g: &Geometry,
        seed: &TiltXConfig,
    ) -> Result<IkSolution> {
        let reach = g.max_reach();
        if !target.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("target must be finite".into()));
        }
        if target.norm() > reach + 1e-6 {
            return Err(Error::Unreachable {
                residual: target.norm() - reach,
                iterations: 0,
            });
        }
        let problem = Problem { g, target: *target };

        let mut p = Vector4::new(
            seed.arc().bend() * seed.arc().phi().cos(),
            seed.arc().bend() * seed.arc().phi().sin(),
            seed.alpha(),
            seed.beta() / BETA_SCALE,
        );
        problem.clamp(&mut p);
        let mut err = problem.residual(&p);
        let mut best = (p, err.norm());
        let mut lambda = self.damping;
        let mut stalled = 0;
        let mut restarts = restart_seeds(target, g).into_iter();

        for iter in 0..self.max_iters {
            if err.norm() < self.tolerance {
                return Ok(IkSolution {
                    config: problem.config(&p),
                    iterations: iter,
                    residual: err.norm(),
                });
            }

            let j = problem.jacobian(&p, self.fd_step);
            let mut step = self.dls_step(&j, &err, lambda, &[false; 4]);
            // Freeze parameters that sit on a bound and are pushed outward.
            let frozen = self.pinned(&p, &step, g);
            if frozen.iter().any(|f| *f) {
                step = self.dls_step(&j, &err, lambda, &frozen);
            }
            let norm = step.norm();
            if norm > self.max_step {
                step *= self.max_step / norm;
            }

            let mut candidate = p + step;
            problem.clamp(&mut candidate);
            let cand_err = problem.residual(&candidate);
            if cand_err.norm() < err.norm() {
                p = candidate;
                err = cand_err;
                lambda = (lambda * 0.5).max(self.damping);
                stalled = if norm < 1e-9 { stalled + 1 } else { 0 };
            } else {
                lambda *= 10.0;
                stalled += 1;
            }
            if err.norm() < best.1 {
                best = (p, err.norm());
            }

            // Stuck in a local minimum of the bounded problem: try another seed.
            if stalled >= 8 || lambda > 1e6 {
                if let Some(mut next) = restarts.next() {
                    problem.clamp(&mut next);
                    p = next;
                    err = problem.residual(&p);
                    lambda = self.damping;
                    stalled = 0;
                }
            }
        }

        if err.norm() < self.tolerance {
            return Ok(IkSolution {
                config: problem.config(&p),
                iterations: self.max_iters,
                residual: err.norm(),
            });
        }
        Err(Error::Unreachable {
            residual: best.1,
            iterations: self.max_iters,
        })
    }

    /// Δp = Jᵀ (J Jᵀ + λ² I)⁻¹ e over the free columns. λ is relative to the
    /// mean squared column norm so that it is unit-free.
    fn dls_step(
        &self,
        j: &Matrix3x4<f64>,
        e: &Vector3<f64>,
        lambda: f64,
        frozen: &[bool; 4],
    ) -> Vector4<f64> {
        let mut jf = *j;
        for (k, f) in frozen.iter().enumerate() {
            if *f {
                jf.column_mut(k).fill(0.0);
            }
        }
        let jjt = jf * jf.transpose();
        let scale = jjt.trace() / 3.0;
        let damped = jjt + Matrix3::identity() * (lambda * lambda * scale.max(1.0));
        match damped.cholesky() {
            Some(c) => jf.transpose() * c.solve(e),
            None => Vector4::zeros(),
        }
    }

    fn pinned(&self, p: &Vector4<f64>, step: &Vector4<f64>, g: &Geometry) -> [bool; 4] {
        let at_max_bend = p[0].hypot(p[1]) >= g.max_bend * (1.0 - 1e-12);
        let outward_bend = p[0] * step[0] + p[1] * step[1] > 0.0;
        let bend = at_max_bend && outward_bend;
        [
            bend,
            bend,
            (p[2] <= 0.0 && step[2] < 0.0) || (p[2] >= FRAC_PI_2 && step[2] > 0.0),
            (p[3] <= 0.0 && step[3] < 0.0) || (p[3] >= BETA_MAX / BETA_SCALE && step[3] > 0.0),
        ]
    }
}

/// Alternative starting points aimed at the target's direction.
fn restart_seeds(target: &Vector3<f64>, g: &Geometry) -> Vec<Vector4<f64>> {
    let alpha_dir = (-target.x).atan2(-target.z).clamp(0.0, FRAC_PI_2);
    let lateral = target.y.atan2(target.norm().max(1.0));
    let half_beta = BETA_MAX / BETA_SCALE / 2.0;
    let bend = g.max_bend / 3.0;
    vec![
        Vector4::new(0.0, lateral, alpha_dir, half_beta),
        Vector4::new(bend, target.y.signum() * bend, alpha_dir, half_beta),
        Vector4::new(-bend, target.y.signum() * bend, alpha_dir, 0.0),
        Vector4::new(0.0, 0.0, FRAC_PI_2 / 2.0, BETA_MAX / BETA_SCALE),
        Vector4::new(bend, -bend, 0.0, half_beta),
        Vector4::new(-bend, -bend, FRAC_PI_2, half_beta),
    ]
}
