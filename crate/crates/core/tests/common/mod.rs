//! Synthetic motion-capture fixtures.
//!
//! A hold is a run of end-effector samples at a fixed pose: every sample is
//! the pose shifted by a fixed offset, plus optional isotropic Gaussian
//! position noise.

#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use tiltx::analysis::{FrameId, PoseLog, PoseRecord};
use tiltx::workspace::TargetSet;
use tiltx::UnitQuaternion;

pub struct Hold {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
    pub offset: Vector3<f64>,
    pub rotation: UnitQuaternion,
    pub noise_sigma: f64,
}

impl Hold {
    pub fn clean(n: usize, dt: f64) -> Self {
        Self {
            t0: 0.0,
            dt,
            n,
            offset: Vector3::zeros(),
            rotation: UnitQuaternion::IDENTITY,
            noise_sigma: 0.0,
        }
    }
}

pub fn hold_records<R: Rng>(
    id: &str,
    position: &Vector3<f64>,
    orientation: &UnitQuaternion,
    hold: &Hold,
    rng: &mut R,
) -> Vec<PoseRecord> {
    (0..hold.n)
        .map(|i| {
            let noise = if hold.noise_sigma > 0.0 {
                Vector3::from_fn(|_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    hold.noise_sigma * z
                })
            } else {
                Vector3::zeros()
            };
            PoseRecord {
                t: hold.t0 + i as f64 * hold.dt,
                target_id: id.to_string(),
                frame: FrameId::E,
                position: position + hold.offset + noise,
                orientation: hold.rotation * *orientation,
            }
        })
        .collect()
}

/// One hold per target, each offset by `offsets[k]` (mm).
pub fn log_for_targets<R: Rng>(
    targets: &TargetSet,
    offsets: &[Vector3<f64>],
    n: usize,
    dt: f64,
    rng: &mut R,
) -> PoseLog {
    let mut records = Vec::new();
    for (k, t) in targets.targets.iter().enumerate() {
        let hold = Hold {
            t0: 20.0 * k as f64,
            offset: offsets[k],
            ..Hold::clean(n, dt)
        };
        records.extend(hold_records(
            &t.id,
            t.pose.translation(),
            &t.pose.orientation(),
            &hold,
            rng,
        ));
    }
    PoseLog { records }
}
