//! Kinematics and actuation planning for a tilting, telescopic, cable-driven
//! continuum manipulator carried by a multirotor.
//!
//! - [`se3`]: rigid transforms, unit quaternions, quaternion averaging
//! - [`arc`]: constant-curvature section kinematics and cable mapping
//! - [`geometry`]: physical constants and their JSON form
//! - [`chain`]: the full frame chain and motor-command synthesis
//! - [`ik`]: numerical position inverse kinematics
//! - [`workspace`]: workspace sampling, slice targets, cloud export
//! - [`analysis`]: motion-capture log ingestion and error statistics
//! - [`cli`]: the `tiltx` command-line front end

pub mod analysis;
pub mod arc;
pub mod chain;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod ik;
pub mod se3;
pub mod workspace;

pub use arc::{ArcParams, CableLayout, CableLengths};
pub use chain::{ActuationPlan, ActuatorState, TiltXConfig};
pub use error::{Error, Result};
pub use geometry::Geometry;
pub use se3::{RigidTransform, UnitQuaternion};
