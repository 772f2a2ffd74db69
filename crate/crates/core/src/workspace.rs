//! Workspace sampling over the configuration grid and generation of the
//! fixed-depth slice targets used for experiments.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::arc::{
    arc_transform, cable_deltas_from_config, config_from_cables, wrap_angle, ArcParams,
    CableLengths,
};
use crate::chain::{tiltx_fk, TiltXConfig};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, BETA_MAX};
use crate::se3::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Vector3<f64>,
    pub radial_distance: f64,
    pub config: TiltXConfig,
}

impl CloudPoint {
    pub fn new(config: TiltXConfig, g: &Geometry) -> Self {
        let position = *tiltx_fk(&config, g).translation();
        Self {
            position,
            radial_distance: position.norm(),
            config,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

/// Number of samples along each configuration axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n_kappa: usize,
    pub n_phi: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl Grid {
    pub fn new(n_kappa: usize, n_phi: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        let g = Self {
            n_kappa,
            n_phi,
            n_alpha,
            n_beta,
        };
        if g.counts().contains(&0) {
            return Err(Error::Invalid(format!("grid counts must be >= 1, got {g}")));
        }
        Ok(g)
    }

    fn counts(&self) -> [usize; 4] {
        [self.n_kappa, self.n_phi, self.n_alpha, self.n_beta]
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.n_kappa, self.n_phi, self.n_alpha, self.n_beta
        )
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    /// Parses `KxPxAxB`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split(['x', 'X']).collect();
        let bad = || {
            Error::Invalid(format!(
                "grid must look like KxPxAxB (e.g. 10x12x10x8), got {s:?}"
            ))
        };
        if parts.len() != 4 {
            return Err(bad());
        }
        let n: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Self::new(n[0], n[1], n[2], n[3])
    }
}

/// `n` evenly spaced values over `[lo, hi]`; a single sample sits at `lo`.
fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// Bend-plane angles `j·2π/n`, wrapped to (−π, π].
fn phi_samples(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| wrap_angle(TAU * j as f64 / n as f64))
}

/// Tip positions over the grid, enumerated bend-major then φ, α, β.
///
/// Rows of fixed bend are evaluated in parallel and reassembled in order, so
/// the output does not depend on the worker count.
pub fn sample_workspace(g: &Geometry, grid: &Grid) -> PointCloud {
    let bends: Vec<f64> = linspace(0.0, g.max_bend, grid.n_kappa).collect();
    let phis: Vec<f64> = phi_samples(grid.n_phi).collect();
    let alphas: Vec<f64> = linspace(0.0, FRAC_PI_2, grid.n_alpha).collect();
    let betas: Vec<f64> = linspace(0.0, BETA_MAX, grid.n_beta).collect();
    let ell = g.backbone_length;

    let points = bends
        .par_iter()
        .map(|&bend| {
            let mut row = Vec::with_capacity(phis.len() * alphas.len() * betas.len());
            for &phi in &phis {
                let arc = ArcParams::new(bend / ell, phi, ell).expect("grid arc is valid");
                for &alpha in &alphas {
                    for &beta in &betas {
                        let cfg = TiltXConfig::new(arc, alpha, beta).expect("grid config is valid");
                        row.push(CloudPoint::new(cfg, g));
                    }
                }
            }
            row
        })
        .collect::<Vec<_>>()
        .concat();
    PointCloud { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReachStats {
    pub max_reach: f64,
    pub min_reach: f64,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub n_points: usize,
}

pub fn reach_stats(cloud: &PointCloud) -> Result<ReachStats> {
    let first = cloud.points.first().ok_or(Error::NoSamples)?;
    let init = ReachStats {
        max_reach: first.radial_distance,
        min_reach: first.radial_distance,
        bbox_min: first.position.into(),
        bbox_max: first.position.into(),
        n_points: cloud.points.len(),
    };
    Ok(cloud.points.iter().fold(init, |mut s, p| {
        s.max_reach = s.max_reach.max(p.radial_distance);
        s.min_reach = s.min_reach.min(p.radial_distance);
        for k in 0..3 {
            s.bbox_min[k] = s.bbox_min[k].min(p.position[k]);
            s.bbox_max[k] = s.bbox_max[k].max(p.position[k]);
        }
        s
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub id: String,
    pub config: TiltXConfig,
    pub pose: RigidTransform,
    pub cable_lengths: CableLengths,
}

impl Target {
    pub fn new(id: impl Into<String>, config: TiltXConfig, g: &Geometry) -> Result<Self> {
        let deltas = cable_deltas_from_config(config.arc(), &g.layout);
        Ok(Self {
            id: id.into(),
            config,
            pose: tiltx_fk(&config, g),
            cable_lengths: CableLengths::from_deltas(g.backbone_length, deltas)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetSet {
    pub targets: Vec<Target>,
}

impl TargetSet {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.targets.iter().map(|t| t.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }
}

/// Slice generation settings. Targets are numbered `P{first_id}`,
/// `P{first_id + 1}`, ... slice by slice, φ ascending within a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    /// Tip depths below the section base along its −z axis (mm).
    pub offsets: Vec<f64>,
    pub phi_step_deg: f64,
    pub alpha: f64,
    pub beta: f64,
    pub first_id: usize,
}

impl SliceSpec {
    /// Four slices at L, 0.9L, 0.8L, 0.7L with 30° bend-plane spacing,
    /// manipulator pointing straight down and unextended.
    pub fn default_for(g: &Geometry) -> Self {
        let l = g.backbone_length;
        Self {
            offsets: vec![l, 0.9 * l, 0.8 * l, 0.7 * l],
            phi_step_deg: 30.0,
            alpha: 0.0,
            beta: 0.0,
            first_id: 1,
        }
    }
}

/// Bend angle κℓ whose tip sits `depth` below the section base, i.e. the
/// root of ℓ·sin(x)/x = depth on [0, max_bend], found by bisection.
pub fn bend_for_depth(depth: f64, ell: f64, max_bend: f64) -> Option<f64> {
    let depth_of = |x: f64| if x == 0.0 { ell } else { ell * x.sin() / x };
    let shallowest = depth_of(max_bend);
    if !(depth <= ell && depth >= shallowest - 1e-9) {
        return None;
    }
    if depth == ell {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, max_bend);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if depth_of(mid) > depth {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn slice_targets(g: &Geometry, spec: &SliceSpec) -> Result<TargetSet> {
    let step = spec.phi_step_deg;
    let per_slice = 360.0 / step;
    if step.is_nan() || step <= 0.0 || (per_slice - per_slice.round()).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "phi step {step} deg must divide 360"
        )));
    }
    let per_slice = per_slice.round() as usize;
    let ell = g.backbone_length;
    let max_bend = g.max_bend.min(std::f64::consts::PI);

    let mut targets = Vec::with_capacity(spec.offsets.len() * per_slice);
    for (k, &offset) in spec.offsets.iter().enumerate() {
        let bend =
            bend_for_depth(offset, ell, max_bend).ok_or_else(|| Error::UnreachableSlice {
                index: k + 1,
                offset,
                reason: format!(
                    "depth must lie in [{:.6}, {:.6}] mm",
                    ell * max_bend.sin() / max_bend,
                    ell
                ),
            })?;
        for j in 0..per_slice {
            let phi = (j as f64 * step).to_radians();
            let arc = ArcParams::new(bend / ell, phi, ell)?;
            let cfg = TiltXConfig::new(arc, spec.alpha, spec.beta)?;
            let id = format!("P{}", spec.first_id + k * per_slice + j);
            targets.push(Target::new(id, cfg, g)?);
        }
    }
    Ok(TargetSet { targets })
}

/// Depth of the tip below the section base for `arc`.
pub fn tip_depth(arc: &ArcParams) -> f64 {
    -arc_transform(arc).translation().z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Ply,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("csv") => Ok(Self::Csv),
            Some("ply") => Ok(Self::Ply),
            _ => Err(Error::Invalid(format!(
                "{}: output must end in .csv or .ply",
                path.display()
            ))),
        }
    }
}

pub const CLOUD_CSV_HEADER: &str = "x_mm,y_mm,z_mm,r_mm,kappa,phi_deg,alpha_deg,beta_mm";
pub const TARGETS_CSV_HEADER: &str =
    "id,kappa,phi_deg,alpha_deg,beta_mm,l1_mm,l2_mm,l3_mm,x_mm,y_mm,z_mm";

pub fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(80 * (cloud.points.len() + 1));
    out.push_str(CLOUD_CSV_HEADER);
    out.push('\n');
    for p in &cloud.points {
        let c = &p.config;
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            p.position.x,
            p.position.y,
            p.position.z,
            p.radial_distance,
            c.arc().kappa(),
            c.arc().phi().to_degrees(),
            c.alpha().to_degrees(),
            c.beta()
        );
    }
    out
}

pub fn cloud_to_ply(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(48 * (cloud.points.len() + 8));
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\n\
         property double z\nproperty double radial\nend_header\n",
        cloud.points.len()
    );
    for p in &cloud.points {
        let _ = writeln!(
            out,
            "{:.6} {:.6} {:.6} {:.6}",
            p.position.x, p.position.y, p.position.z, p.radial_distance
        );
    }
    out
}

pub fn targets_to_csv(set: &TargetSet) -> String {
    let mut out = String::new();
    out.push_str(TARGETS_CSV_HEADER);
    out.push('\n');
    for t in &set.targets {
        let c = &t.config;
        let [l1, l2, l3] = t.cable_lengths.as_array();
        let p = t.pose.translation();
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            t.id,
            c.arc().kappa(),
            c.arc().phi().to_degrees(),
            c.alpha().to_degrees(),
            c.beta(),
            l1,
            l2,
            l3,
            p.x,
            p.y,
            p.z
        );
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn export_cloud(cloud: &PointCloud, format: CloudFormat, path: &Path) -> Result<()> {
    let text = match format {
        CloudFormat::Csv => cloud_to_csv(cloud),
        CloudFormat::Ply => cloud_to_ply(cloud),
    };
    write_atomic(path, &text)
}

pub fn export_targets(set: &TargetSet, path: &Path) -> Result<()> {
    write_atomic(path, &targets_to_csv(set))
}

/// Reads a targets CSV written by [`targets_to_csv`].
///
/// Bend parameters are recovered from the cable lengths, which carry more
/// significant digits than the κ column; straight targets keep the listed φ.
/// The pose is recomputed with `g` and must agree with the listed tip
/// position, which catches files generated under a different geometry.
pub fn parse_targets_csv(text: &str, origin: &Path, g: &Geometry) -> Result<TargetSet> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or_default();
    if header != TARGETS_CSV_HEADER {
        return Err(Error::format(
            origin,
            format!("header must be exactly `{TARGETS_CSV_HEADER}`, found `{header}`"),
        ));
    }
    let mut targets: Vec<Target> = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let at = |msg: String| Error::format(origin, format!("line {}: {msg}", i + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(at(format!("expected 11 fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(at("empty id".into()));
        }
        if targets.iter().any(|t| t.id == id) {
            return Err(at(format!("duplicate id {id}")));
        }
        let v: Vec<f64> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| at(format!("{f:?}: {e}"))))
            .collect::<Result<_>>()?;
        let lengths = CableLengths::new(v[4], v[5], v[6]).map_err(|e| at(e.to_string()))?;
        let from_cables = config_from_cables(&lengths, &g.layout, g.backbone_length)
            .map_err(|e| at(e.to_string()))?;
        let arc = if from_cables.bend() > crate::arc::EPS_KL {
            from_cables
        } else {
            ArcParams::new(0.0, v[1].to_radians(), g.backbone_length)?
        };
        if (arc.kappa() - v[0]).abs() > 1e-6 {
            return Err(at(format!(
                "kappa {} disagrees with the cable lengths ({})",
                v[0],
                arc.kappa()
            )));
        }
        let config =
            TiltXConfig::new(arc, v[2].to_radians(), v[3]).map_err(|e| at(e.to_string()))?;
        config.check(g).map_err(|e| at(e.to_string()))?;
        let target = Target::new(id, config, g)?;
        let listed = Vector3::new(v[7], v[8], v[9]);
        let gap = (target.pose.translation() - listed).norm();
        if gap > 1e-3 {
            return Err(at(format!(
                "listed tip position is {gap:.6} mm from the model; was the file made with another geometry?"
            )));
        }
        targets.push(target);
    }
    Ok(TargetSet { targets })
}

pub fn load_targets(path: impl AsRef<Path>, g: &Geometry) -> Result<TargetSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_targets_csv(&text, path, g)
}
