//! Physical constants of the manipulator and their JSON representation.
//!
//! In the file all lengths are millimetres and all angles degrees; in memory
//! angles are radians. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::arc::CableLayout;
use crate::error::{Error, Result};

/// Upper end of the telescopic extension range (mm).
pub const BETA_MAX: f64 = 75.0;

/// Tilt pulley arrangement for cable 1: fixed pulley centre `c1` and radius
/// `r` of the circle the moving pulley centre travels about the hinge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltPulley {
    pub c1: [f64; 2],
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Fixed base-to-telescope offset (mm).
    pub s: f64,
    /// Backbone length of the continuum section (mm).
    pub backbone_length: f64,
    pub layout: CableLayout,
    /// (H_x, H_y, H_z) UAV-to-hinge offsets (mm); H_z is measured downwards.
    pub hinge_offset: Vector3<f64>,
    /// Lead-screw pitch (mm per revolution).
    pub lead_pitch: f64,
    /// Spur gear ratio between motor and lead screw.
    pub spur_ratio: f64,
    /// Worm gear ratio of the tilt drive.
    pub worm_ratio: f64,
    /// Cable spool radii (mm).
    pub spool_radius: [f64; 3],
    pub pulley: TiltPulley,
    /// Largest admissible bend angle κℓ (rad).
    pub max_bend: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        GeometryFile::default()
            .into_geometry()
            .expect("default geometry is valid")
    }
}

impl Geometry {
    /// Straight full-extension reach s + β_max + L (mm).
    pub fn max_reach(&self) -> f64 {
        self.s + BETA_MAX + self.backbone_length
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GeometryFile =
            serde_json::from_str(text).map_err(|e| Error::Geometry(e.to_string()))?;
        file.into_geometry()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Geometry(msg) => Error::format(path, format!("invalid geometry: {msg}")),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GeometryFile::from(self)).expect("geometry serializes")
    }
}

/// On-disk layout of [`Geometry`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub s: f64,
    #[serde(rename = "L")]
    pub backbone_length: f64,
    pub layout: LayoutFile,
    pub hinge_offset: [f64; 3],
    #[serde(rename = "P")]
    pub lead_pitch: f64,
    #[serde(rename = "N_t")]
    pub spur_ratio: f64,
    #[serde(rename = "N_w")]
    pub worm_ratio: f64,
    pub r_motor: [f64; 3],
    pub pulley: TiltPulley,
    #[serde(default = "default_max_bend_deg")]
    pub max_bend_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub d: f64,
    pub theta_deg: [f64; 3],
}

fn default_max_bend_deg() -> f64 {
    180.0
}

impl Default for GeometryFile {
    fn default() -> Self {
        Self {
            s: 131.0,
            backbone_length: 384.0,
            layout: LayoutFile {
                d: 8.0,
                theta_deg: [0.0, 240.0, 120.0],
            },
            hinge_offset: [0.0; 3],
            lead_pitch: 2.0,
            spur_ratio: 1.0,
            worm_ratio: 35.0,
            r_motor: [10.0; 3],
            pulley: TiltPulley {
                c1: [0.0, 40.0],
                r: 15.0,
            },
            max_bend_deg: default_max_bend_deg(),
        }
    }
}

impl GeometryFile {
    pub fn into_geometry(self) -> Result<Geometry> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Geometry(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("s", self.s)?;
        positive("L", self.backbone_length)?;
        positive("P", self.lead_pitch)?;
        positive("N_t", self.spur_ratio)?;
        positive("N_w", self.worm_ratio)?;
        positive("pulley.r", self.pulley.r)?;
        positive("max_bend_deg", self.max_bend_deg)?;
        for r in self.r_motor {
            positive("r_motor", r)?;
        }
        if self.max_bend_deg > 360.0 {
            return Err(Error::Geometry(format!(
                "max_bend_deg must be <= 360, got {}",
                self.max_bend_deg
            )));
        }
        if !self
            .hinge_offset
            .iter()
            .chain(&self.pulley.c1)
            .all(|v| v.is_finite())
        {
            return Err(Error::Geometry("offsets must be finite".into()));
        }
        let layout = CableLayout::new(self.layout.d, self.layout.theta_deg.map(f64::to_radians))?;
        Ok(Geometry {
            s: self.s,
            backbone_length: self.backbone_length,
            layout,
            hinge_offset: Vector3::from(self.hinge_offset),
            lead_pitch: self.lead_pitch,
            spur_ratio: self.spur_ratio,
            worm_ratio: self.worm_ratio,
            spool_radius: self.r_motor,
            pulley: self.pulley,
            max_bend: self.max_bend_deg.to_radians(),
        })
    }
}

impl From<&Geometry> for GeometryFile {
    fn from(g: &Geometry) -> Self {
        Self {
            s: g.s,
            backbone_length: g.backbone_length,
            layout: LayoutFile {
                d: g.layout.d(),
                theta_deg: g.layout.theta().map(|t| round_deg(t.to_degrees())),
            },
            hinge_offset: g.hinge_offset.into(),
            lead_pitch: g.lead_pitch,
            spur_ratio: g.spur_ratio,
            worm_ratio: g.worm_ratio,
            r_motor: g.spool_radius,
            pulley: g.pulley,
            max_bend_deg: round_deg(g.max_bend.to_degrees()),
        }
    }
}

/// Drops the residue of the degree/radian round trip (239.99999999999997).
fn round_deg(deg: f64) -> f64 {
    (deg * 1e9).round() / 1e9
}
