//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Reference values are computed here from first principles rather than
//! through the library paths under test.

mod common;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tiltx::analysis::{
    compare_runs, load_pose_log, write_pose_log, CompareOptions, PoseLog, Reference,
};
use tiltx::arc::{arc_transform, config_from_cables, wrap_angle, ArcParams, CableLengths};
use tiltx::chain::{
    actuation_plan, motor_from_tilt, telescopic_delta, tilt_compensation, tilt_from_motor, tiltx_fk,
};
use tiltx::geometry::BETA_MAX;
use tiltx::ik::IkSolver;
use tiltx::se3::{orthonormality_error, quat_average};
use tiltx::workspace::{reach_stats, sample_workspace, slice_targets, Grid, SliceSpec};
use tiltx::{Geometry, TiltXConfig, UnitQuaternion};

use common::{hold_records, log_for_targets, Hold};

const SEED: u64 = 0x7117_0590;

// Tolerances.
const REACH_TOL_MM: f64 = 0.5;
const REQUIRED_REACH_MM: f64 = 377.0;
const WORKSPACE_BUDGET: Duration = Duration::from_secs(5);
const CHAIN_TOL: f64 = 1e-12;
const CABLE_TOL: f64 = 1e-9;
const LIMIT_TOL_MM: f64 = 1e-6;
const DET_TOL: f64 = 1e-9;
const PLAN_TOL: f64 = 1e-12;
const IK_TOL_MM: f64 = 0.1;
const IK_MAX_ITERS: usize = 200;
const IK_BUDGET: Duration = Duration::from_secs(10);
const SLICE_CABLE_TOL: f64 = 1e-9;
const SLICE_DEPTH_TOL_MM: f64 = 1e-6;
const OFFSET_TOL_MM: f64 = 1e-6;
const CHI_REL_TOL: f64 = 0.02;
const QUAT_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn g() -> Geometry {
    Geometry::default()
}

fn random_config(rng: &mut impl Rng, g: &Geometry, min_bend: f64) -> TiltXConfig {
    let bend = rng.random_range(min_bend..=g.max_bend);
    let phi = rng.random_range(-PI..PI);
    let alpha = rng.random_range(0.0..=FRAC_PI_2);
    let beta = rng.random_range(0.0..=BETA_MAX);
    TiltXConfig::with_geometry(bend / g.backbone_length, phi, alpha, beta, g).unwrap()
}

/// Hinge-to-tip pose written out term by term (c·, s· of κℓ, φ, α), with
/// 1 − cos κℓ evaluated as 2 sin²(κℓ/2) to avoid cancellation at small bends.
#[rustfmt::skip]
fn closed_form_oracle(kappa: f64, phi: f64, alpha: f64, beta: f64, g: &Geometry) -> (Matrix3<f64>, Vector3<f64>) {
    let x = kappa * g.backbone_length;
    let (skl, ckl) = x.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    let r = Matrix3::new(
        ca * ckl * cp + sa * skl, ca * sp, ca * skl * cp - sa * ckl,
        ckl * sp, -cp, skl * sp,
        -sa * ckl * cp + ca * skl, -sa * sp, -sa * skl * cp - ca * ckl,
    );
    let h = g.s + beta;
    let vers = 2.0 * (x / 2.0).sin().powi(2);
    let t = Vector3::new(
        ca * vers * cp / kappa - sa * skl / kappa - sa * h,
        vers * sp / kappa,
        -sa * vers * cp / kappa - ca * skl / kappa - ca * h,
    );
    (r, t)
}

const CLOCKWISE_DEG: [f64; 3] = [0.0, 240.0, 120.0];
const COUNTER_CLOCKWISE_DEG: [f64; 3] = [0.0, 120.0, 240.0];

/// Cable length changes for cables at angles `theta_deg`.
fn deltas_for_layout(kappa: f64, phi: f64, theta_deg: [f64; 3], g: &Geometry) -> [f64; 3] {
    theta_deg.map(|th| -g.backbone_length * kappa * g.layout.d() * (th.to_radians() - phi).cos())
}

fn cable_deltas_oracle(kappa: f64, phi: f64, g: &Geometry) -> [f64; 3] {
    deltas_for_layout(kappa, phi, CLOCKWISE_DEG, g)
}

fn criterion_1() -> Outcome {
    let grid = Grid::new(25, 25, 16, 10).unwrap();
    let start = Instant::now();
    let cloud = sample_workspace(&g(), &grid);
    let stats = reach_stats(&cloud).unwrap();
    let elapsed = start.elapsed();
    let pass = (stats.max_reach - 590.0).abs() <= REACH_TOL_MM
        && stats.max_reach > REQUIRED_REACH_MM
        && elapsed < WORKSPACE_BUDGET
        && stats.n_points >= 100_000;
    Outcome::new(
        pass,
        format!(
            "max reach {:.6} mm over {} points (want 590 +/- {REACH_TOL_MM}, > {REQUIRED_REACH_MM}); {:.2?} (budget {:?})",
            stats.max_reach, stats.n_points, elapsed, WORKSPACE_BUDGET
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let g = g();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let c = random_config(&mut rng, &g, 1e-3);
        let t = tiltx_fk(&c, &g);
        let (r, p) = closed_form_oracle(c.arc().kappa(), c.arc().phi(), c.alpha(), c.beta(), &g);
        worst = worst
            .max((t.rotation() - r).amax())
            .max((t.translation() - p).amax());
    }
    Outcome::new(
        worst < CHAIN_TOL,
        format!("composed chain vs expanded form over 10^4 configs: max deviation {worst:.3e} (< {CHAIN_TOL:e})"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let g = g();
    let ell = g.backbone_length;
    let mut worst_k = 0.0f64;
    let mut worst_phi = 0.0f64;
    for _ in 0..10_000 {
        let bend = rng.random_range(0.01..=PI);
        let phi = rng.random_range(-PI..PI);
        let kappa = bend / ell;
        let d = cable_deltas_oracle(kappa, phi, &g);
        let lengths = CableLengths::new(ell + d[0], ell + d[1], ell + d[2]).unwrap();
        let arc = config_from_cables(&lengths, &g.layout, ell).unwrap();
        worst_k = worst_k.max((arc.kappa() - kappa).abs());
        worst_phi = worst_phi.max(wrap_angle(arc.phi() - phi).abs());
    }
    // A bend toward +y shortens the cable at 240° less than the one at 120°.
    let d = cable_deltas_oracle(0.002, FRAC_PI_2, &g);
    let lengths = CableLengths::new(ell + d[0], ell + d[1], ell + d[2]).unwrap();
    let signed = config_from_cables(&lengths, &g.layout, ell).unwrap().phi();
    let sign_ok =
        (signed - FRAC_PI_2).abs() < CABLE_TOL && lengths.as_array()[1] > lengths.as_array()[2];
    // The same bend measured with the cables numbered the other way round.
    let d = deltas_for_layout(0.002, FRAC_PI_2, COUNTER_CLOCKWISE_DEG, &g);
    let swapped = CableLengths::new(ell + d[0], ell + d[1], ell + d[2]).unwrap();
    let mirrored = config_from_cables(&swapped, &g.layout, ell).unwrap().phi();
    let pass = worst_k < CABLE_TOL
        && worst_phi < CABLE_TOL
        && sign_ok
        && (mirrored + FRAC_PI_2).abs() < CABLE_TOL;
    Outcome::new(
        pass,
        format!(
            "10^4 round trips: max |dk| {worst_k:.3e}, max |dphi| {worst_phi:.3e} rad (< {CABLE_TOL:e}); \
             phi = 90 deg recovered as {:.9} deg (counter-clockwise reading {:.9} deg)",
            signed.to_degrees(),
            mirrored.to_degrees()
        ),
    )
}

fn criterion_4() -> Outcome {
    let g = g();
    let ell = g.backbone_length;
    // Straight-limit expansion to second order in x = κℓ:
    // t = (ℓx/2·cφ, ℓx/2·sφ, −ℓ(1 − x²/6)).
    let limit = |x: f64, phi: f64| {
        let (sp, cp) = phi.sin_cos();
        Vector3::new(
            ell * x / 2.0 * cp,
            ell * x / 2.0 * sp,
            -ell * (1.0 - x * x / 6.0),
        )
    };
    let mut worst = 0.0f64;
    for x in [1e-6, 1e-6 * (1.0 + 1e-9), 5e-7] {
        for phi in [0.0, 1.0, -2.5, PI] {
            let arc = ArcParams::new(x / ell, phi, ell).unwrap();
            worst = worst.max((arc_transform(&arc).translation() - limit(x, phi)).norm());
        }
    }
    let straight_gap = (arc_transform(&ArcParams::new(1e-6 / ell, 0.0, ell).unwrap())
        .translation()
        - Vector3::new(0.0, 0.0, -ell))
    .norm();

    let cloud = sample_workspace(&g, &Grid::new(25, 25, 16, 10).unwrap());
    let mut det_err = 0.0f64;
    let mut ortho_err = 0.0f64;
    for p in &cloud.points {
        let r = *tiltx_fk(&p.config, &g).rotation();
        det_err = det_err.max((r.determinant() - 1.0).abs());
        ortho_err = ortho_err.max(orthonormality_error(&r));
        let a = arc_transform(p.config.arc());
        det_err = det_err.max((a.rotation().determinant() - 1.0).abs());
    }
    let includes_straight = cloud.points.iter().any(|p| p.config.arc().kappa() == 0.0);
    Outcome::new(
        worst < LIMIT_TOL_MM && det_err < DET_TOL && includes_straight,
        format!(
            "kl = 1e-6 vs straight-limit expansion: {worst:.3e} mm (< {LIMIT_TOL_MM:e}); \
             tip offset from the undeformed point (0,0,-L): {straight_gap:.3e} mm, the true bend displacement; \
             |det R - 1| max {det_err:.3e}, |R^T R - I| max {ortho_err:.3e} over {} poses incl. k = 0",
            cloud.points.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let g = g();
    let mut worst = 0.0f64;
    let mut cycle = 0.0f64;
    for _ in 0..1_000 {
        let a = random_config(&mut rng, &g, 0.0);
        let b = random_config(&mut rng, &g, 0.0);
        let c = random_config(&mut rng, &g, 0.0);
        let ac = actuation_plan(&a, &c, &g).unwrap().motors.as_array();
        let ab = actuation_plan(&a, &b, &g).unwrap().motors.as_array();
        let bc = actuation_plan(&b, &c, &g).unwrap().motors.as_array();
        for i in 0..5 {
            worst = worst.max((ac[i] - (ab[i] + bc[i])).abs());
        }
        let (x, y, z) = (a.alpha(), b.alpha(), c.alpha());
        let sum = tilt_compensation(x, y, &g).unwrap()[0]
            + tilt_compensation(y, z, &g).unwrap()[0]
            + tilt_compensation(z, x, &g).unwrap()[0];
        cycle = cycle.max(sum.abs());
    }
    Outcome::new(
        worst < PLAN_TOL && cycle < PLAN_TOL,
        format!("10^3 triples: max |plan(a,c) - plan(a,b) - plan(b,c)| {worst:.3e} rad; closed tilt cycles {cycle:.3e} mm (< {PLAN_TOL:e})"),
    )
}

fn criterion_6() -> Outcome {
    let g = g();
    let q4_rev = motor_from_tilt(FRAC_PI_2, &g).unwrap() / TAU;
    let q4_ok = (q4_rev - 8.75).abs() < 1e-12;
    let back_ok = (tilt_from_motor(8.75 * TAU, &g).unwrap() - FRAC_PI_2).abs() < 1e-12;
    let mm_per_rev = g.lead_pitch * g.spur_ratio;
    let in_range = telescopic_delta(0.0, 75.0 / mm_per_rev * TAU, &g).is_ok()
        && telescopic_delta(75.0, -75.0 / mm_per_rev * TAU, &g).is_ok();
    let rejects = telescopic_delta(0.0, -0.01, &g).is_err()
        && telescopic_delta(75.0, 0.01, &g).is_err()
        && telescopic_delta(70.0, 3.0 * TAU, &g).is_err()
        && TiltXConfig::with_geometry(0.0, 0.0, 0.0, 75.001, &g).is_err()
        && TiltXConfig::with_geometry(0.0, 0.0, 0.0, -0.001, &g).is_err();
    Outcome::new(
        q4_ok && back_ok && in_range && rejects,
        format!("alpha = 90 deg needs q4 = {q4_rev:.6} rev (N_w = {}); extension limits [0, 75] mm enforced: {}", g.worm_ratio, in_range && rejects),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let g = g();
    let solver = IkSolver::default();
    let seed = TiltXConfig::zero(&g);
    let targets: Vec<Vector3<f64>> = (0..1_000)
        .map(|_| *tiltx_fk(&random_config(&mut rng, &g, 0.0), &g).translation())
        .collect();
    let start = Instant::now();
    let mut failures = 0usize;
    let mut worst_err = 0.0f64;
    let mut most_iters = 0usize;
    for p in &targets {
        match solver.solve(p, &g, &seed) {
            Ok(sol) => {
                let err = (tiltx_fk(&sol.config, &g).translation() - p).norm();
                worst_err = worst_err.max(err);
                most_iters = most_iters.max(sol.iterations);
                if err > IK_TOL_MM || sol.iterations > IK_MAX_ITERS {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        failures == 0 && elapsed < IK_BUDGET,
        format!(
            "{} of 1000 targets solved; max |fk(ik(p)) - p| {worst_err:.4} mm (<= {IK_TOL_MM}); max {most_iters} iterations (<= {IK_MAX_ITERS}); {elapsed:.2?} (budget {IK_BUDGET:?})",
            1000 - failures
        ),
    )
}

fn criterion_8() -> Outcome {
    let g = g();
    let spec = SliceSpec::default_for(&g);
    let set = slice_targets(&g, &spec).unwrap();
    let per_slice = 12;
    let mut cable_err = 0.0f64;
    let mut depth_err = 0.0f64;
    for (k, t) in set.targets.iter().enumerate() {
        let arc = t.config.arc();
        let d = cable_deltas_oracle(arc.kappa(), arc.phi(), &g);
        for (l, di) in t.cable_lengths.as_array().iter().zip(d) {
            cable_err = cable_err.max((l - (g.backbone_length + di)).abs());
        }
        // Straight down and unextended: the section base sits s below the hinge.
        let depth = -tiltx_fk(&t.config, &g).translation().z - g.s;
        depth_err = depth_err.max((depth - spec.offsets[k / per_slice]).abs());
    }
    let phis_ok = set.targets.chunks(per_slice).all(|slice| {
        slice.iter().enumerate().all(|(j, t)| {
            t.config.arc().kappa() == 0.0
                || wrap_angle(t.config.arc().phi() - (30.0 * j as f64).to_radians()).abs() < 1e-12
        })
    });
    Outcome::new(
        set.targets.len() == 48 && spec.offsets.len() == 4 && cable_err < SLICE_CABLE_TOL && depth_err < SLICE_DEPTH_TOL_MM && phis_ok,
        format!(
            "{} targets in {} slices of {per_slice}; cable length error {cable_err:.3e} mm (< {SLICE_CABLE_TOL:e}); depth error {depth_err:.3e} mm (< {SLICE_DEPTH_TOL_MM:e})",
            set.targets.len(),
            spec.offsets.len()
        ),
    )
}

fn round_trip(log: &PoseLog, dir: &Path, name: &str) -> PoseLog {
    let path = dir.join(name);
    write_pose_log(log, &path).unwrap();
    let (back, report) = load_pose_log(&path).unwrap();
    assert!(report.rejected.is_empty());
    back
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let g = g();
    let dir = tempfile::tempdir().unwrap();
    let targets = slice_targets(&g, &SliceSpec::default_for(&g)).unwrap();
    let opts = CompareOptions::default();

    // Noise-free: each target gets its own injected offset.
    let n = targets.targets.len();
    let zero = vec![Vector3::zeros(); n];
    let injected: Vec<Vector3<f64>> = (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)))
        .collect();
    let base = round_trip(
        &log_for_targets(&targets, &zero, 201, 0.05, &mut rng),
        dir.path(),
        "base.csv",
    );
    let on = round_trip(
        &log_for_targets(&targets, &injected, 201, 0.05, &mut rng),
        dir.path(),
        "on.csv",
    );
    let cmp = compare_runs(Reference::Baseline(&base), &on, &targets, &opts).unwrap();
    let offset_err = cmp
        .rows
        .iter()
        .zip(&injected)
        .map(|(row, off)| (row.mu_pos - off.norm()).abs().max(row.sigma_pos))
        .fold(0.0f64, f64::max);
    let offsets_ok = cmp.rows.len() == n && cmp.gaps.is_empty() && offset_err < OFFSET_TOL_MM;

    // Unit Gaussian noise about a clean baseline: mean error is the χ₃ mean.
    let target = &targets.targets[20];
    let one = tiltx::workspace::TargetSet {
        targets: vec![target.clone()],
    };
    let (p, q) = (*target.pose.translation(), target.pose.orientation());
    let base = PoseLog {
        records: hold_records(&target.id, &p, &q, &Hold::clean(101, 0.1), &mut rng),
    };
    let noisy_hold = Hold {
        noise_sigma: 1.0,
        ..Hold::clean(100_001, 1e-4)
    };
    let noisy = round_trip(
        &PoseLog {
            records: hold_records(&target.id, &p, &q, &noisy_hold, &mut rng),
        },
        dir.path(),
        "noisy.csv",
    );
    let row = &compare_runs(Reference::Baseline(&base), &noisy, &one, &opts)
        .unwrap()
        .rows[0];
    let chi3_mean = 2.0 * (2.0 / PI).sqrt();
    let chi_rel = (row.mu_pos - chi3_mean).abs() / chi3_mean;

    // Quaternion averaging: sign flips and symmetric pairs.
    let q0 = UnitQuaternion::new(0.8, -0.1, 0.3, 0.5).unwrap();
    let mut samples = Vec::new();
    for k in 0..6 {
        let axis = Vector3::new(
            (k as f64).cos(),
            (k as f64 * 0.7).sin(),
            0.4 + k as f64 * 0.1,
        );
        let angle = 0.05 + 0.1 * k as f64;
        samples.push(q0 * UnitQuaternion::from_axis_angle(&axis, angle));
        samples.push(q0 * UnitQuaternion::from_axis_angle(&axis, -angle));
    }
    let mean = quat_average(&samples).unwrap();
    let pair_err = 1.0 - mean.dot(&q0).abs();
    let flipped: Vec<_> = samples
        .iter()
        .map(|s| if rng.random_bool(0.5) { -*s } else { *s })
        .collect();
    let flip_err = (quat_average(&flipped).unwrap().as_vector() - mean.as_vector()).amax();
    let quat_ok = pair_err < QUAT_TOL && flip_err < QUAT_TOL;

    Outcome::new(
        offsets_ok && chi_rel < CHI_REL_TOL && quat_ok,
        format!(
            "{} targets, injected offsets recovered to {offset_err:.3e} mm (< {OFFSET_TOL_MM:e}); \
             {} noisy samples: mu = {:.4} mm vs chi3 mean {chi3_mean:.4} ({:.2}% off, < {}%); \
             quaternion mean: symmetric pairs {pair_err:.1e}, sign flips {flip_err:.1e} (< {QUAT_TOL:e})",
            cmp.rows.len(),
            row.n_samples,
            row.mu_pos,
            100.0 * chi_rel,
            100.0 * CHI_REL_TOL
        ),
    )
}

fn main() -> ExitCode {
    type Check = (&'static str, fn() -> Outcome);
    let criteria: [Check; 9] = [
        ("reach", criterion_1),
        ("closed form", criterion_2),
        ("cable round trip", criterion_3),
        ("straight limit", criterion_4),
        ("plan additivity", criterion_5),
        ("gear trains", criterion_6),
        ("inverse kinematics", criterion_7),
        ("slices", criterion_8),
        ("error pipeline", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<18} {}  {}",
            i + 1,
            name,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
