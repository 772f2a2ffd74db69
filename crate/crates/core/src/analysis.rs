//! Motion-capture pose logs and per-target error statistics.
//!
//! Each target is held static while the tracker records every marked frame.
//! The trailing rest window of end-effector samples is compared against a
//! reference pose, either the kinematic model's prediction or the mean pose
//! from a baseline run, and summarised as mean and standard deviation of the
//! Euclidean position error and of the orientation error.
//!
//! The orientation error of a sample is its geodesic angle to the reference
//! orientation. This choice is ours; averaging orientations uses the
//! eigenvector (Markley) mean from [`crate::se3::quat_average`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::se3::{geodesic_angle, quat_average, UnitQuaternion};
use crate::workspace::{write_atomic, TargetSet};

pub const POSE_LOG_HEADER: &str = "t_s,target_id,frame_id,x_mm,y_mm,z_mm,qx,qy,qz,qw";
pub const ERROR_STATS_HEADER: &str = "target_id,n,mu_pos_mm,sigma_pos_mm,mu_ang_deg,sigma_ang_deg";

/// Largest accepted deviation of a logged quaternion's norm from 1.
pub const QUAT_NORM_TOL: f64 = 1e-3;

/// Default static-hold duration (s).
pub const REST_WINDOW_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FrameId {
    U,
    H,
    B,
    T,
    E,
}

impl FromStr for FrameId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "U" => Ok(Self::U),
            "H" => Ok(Self::H),
            "B" => Ok(Self::B),
            "T" => Ok(Self::T),
            "E" => Ok(Self::E),
            other => Err(format!(
                "unknown frame id {other:?} (expected U, H, B, T or E)"
            )),
        }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::U => "U",
            Self::H => "H",
            Self::B => "B",
            Self::T => "T",
            Self::E => "E",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub t: f64,
    pub target_id: String,
    pub frame: FrameId,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseLog {
    pub records: Vec<PoseRecord>,
}

impl PoseLog {
    /// Records of one (target, frame) group, in log order.
    pub fn group<'a>(
        &'a self,
        target_id: &'a str,
        frame: FrameId,
    ) -> impl Iterator<Item = &'a PoseRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.frame == frame && r.target_id == target_id)
    }

    pub fn target_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.target_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub total_rows: usize,
    pub rejected: Vec<RejectedRow>,
}

pub fn load_pose_log(path: impl AsRef<Path>) -> Result<(PoseLog, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose_log(&text, path)
}

/// Parses pose-log CSV text; `origin` only labels error messages.
pub fn parse_pose_log(text: &str, origin: &Path) -> Result<(PoseLog, LoadReport)> {
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, header)) if header == POSE_LOG_HEADER => {}
        Some((_, header)) => {
            return Err(Error::format(
                origin,
                format!("header must be exactly `{POSE_LOG_HEADER}`, found `{header}`"),
            ))
        }
        None => unreachable!("split yields at least one item"),
    }

    let mut log = PoseLog::default();
    let mut report = LoadReport::default();
    let mut last_t: BTreeMap<(String, FrameId), f64> = BTreeMap::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        report.total_rows += 1;
        let line_no = idx + 1;
        match parse_record(line) {
            Ok(rec) => {
                let key = (rec.target_id.clone(), rec.frame);
                if let Some(prev) = last_t.get(&key) {
                    if rec.t < *prev {
                        report.rejected.push(RejectedRow {
                            line: line_no,
                            reason: format!("timestamp {} goes back from {prev}", rec.t),
                        });
                        continue;
                    }
                }
                last_t.insert(key, rec.t);
                log.records.push(rec);
            }
            Err(reason) => report.rejected.push(RejectedRow {
                line: line_no,
                reason,
            }),
        }
    }

    if report.rejected.len() * 10 > report.total_rows {
        let first = &report.rejected[0];
        return Err(Error::TooManyRejected {
            path: origin.to_path_buf(),
            rejected: report.rejected.len(),
            total: report.total_rows,
            first: format!("line {}: {}", first.line, first.reason),
        });
    }
    Ok((log, report))
}

fn parse_record(line: &str) -> std::result::Result<PoseRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 10 {
        return Err(format!("expected 10 fields, found {}", fields.len()));
    }
    let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let v: f64 = fields[i]
            .parse()
            .map_err(|_| format!("{name}: cannot parse {:?}", fields[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name}: not finite"))
        }
    };
    let t = num(0, "t_s")?;
    let target_id = fields[1].trim();
    if target_id.is_empty() {
        return Err("empty target_id".into());
    }
    let frame: FrameId = fields[2].parse()?;
    let position = Vector3::new(num(3, "x_mm")?, num(4, "y_mm")?, num(5, "z_mm")?);
    let (qx, qy, qz, qw) = (num(6, "qx")?, num(7, "qy")?, num(8, "qz")?, num(9, "qw")?);
    let norm_sq = qw * qw + qx * qx + qy * qy + qz * qz;
    let norm = norm_sq.sqrt();
    if (norm - 1.0).abs() > QUAT_NORM_TOL {
        return Err(format!(
            "quaternion norm {norm} is not within {QUAT_NORM_TOL} of 1"
        ));
    }
    // Leave already-unit values untouched so logs survive write/read exactly.
    let orientation = if (norm_sq - 1.0).abs() <= 1e-14 {
        UnitQuaternion::from_normalized_unchecked(qw, qx, qy, qz)
    } else {
        UnitQuaternion::new(qw, qx, qy, qz).map_err(|e| e.to_string())?
    };
    Ok(PoseRecord {
        t,
        target_id: target_id.to_string(),
        frame,
        position,
        orientation,
    })
}

/// Serializes with shortest round-trip float formatting.
pub fn pose_log_to_csv(log: &PoseLog) -> String {
    let mut out = String::with_capacity(96 * (log.records.len() + 1));
    out.push_str(POSE_LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        let q = &r.orientation;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.target_id,
            r.frame,
            r.position.x,
            r.position.y,
            r.position.z,
            q.x(),
            q.y(),
            q.z(),
            q.w()
        );
    }
    out
}

pub fn write_pose_log(log: &PoseLog, path: &Path) -> Result<()> {
    write_atomic(path, &pose_log_to_csv(log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestWindow {
    pub samples: Vec<PoseRecord>,
    /// The group spans less than the requested window; all of it is returned.
    pub short: bool,
}

/// The trailing `window_s` seconds of one (target, frame) group.
pub fn rest_window(
    log: &PoseLog,
    target_id: &str,
    frame: FrameId,
    window_s: f64,
) -> Result<RestWindow> {
    let mut group: Vec<PoseRecord> = log.group(target_id, frame).cloned().collect();
    if group.is_empty() {
        return Err(Error::Invalid(format!(
            "no samples for target {target_id} frame {frame}"
        )));
    }
    group.sort_by(|a, b| a.t.total_cmp(&b.t));
    let (first, last) = (group[0].t, group[group.len() - 1].t);
    if last - first < window_s - 1e-9 {
        return Ok(RestWindow {
            samples: group,
            short: true,
        });
    }
    let start = last - window_s - 1e-9;
    group.retain(|r| r.t >= start);
    Ok(RestWindow {
        samples: group,
        short: false,
    })
}

/// Normalization of the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Divisor {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N − 1 (zero for a single sample).
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64], divisor: Divisor) -> Result<MeanStd> {
    if values.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|e| (e - mean).powi(2)).sum();
    let denom = match divisor {
        Divisor::Population => n,
        Divisor::Sample => n - 1.0,
    };
    let std = if denom > 0.0 {
        (ss / denom).sqrt()
    } else {
        0.0
    };
    Ok(MeanStd { mean, std })
}

/// Mean and standard deviation of the Euclidean distance of each sample to
/// `reference` (mm).
pub fn position_error_stats(
    samples: &[Vector3<f64>],
    reference: &Vector3<f64>,
    divisor: Divisor,
) -> Result<MeanStd> {
    let errors: Vec<f64> = samples.iter().map(|p| (p - reference).norm()).collect();
    mean_std(&errors, divisor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationStats {
    pub mean: UnitQuaternion,
    /// Geodesic angle statistics (rad).
    pub angle: MeanStd,
}

pub fn orientation_error_stats(
    samples: &[UnitQuaternion],
    reference: &UnitQuaternion,
    divisor: Divisor,
) -> Result<OrientationStats> {
    let mean = quat_average(samples)?;
    let angles: Vec<f64> = samples
        .iter()
        .map(|q| geodesic_angle(q, reference))
        .collect();
    Ok(OrientationStats {
        mean,
        angle: mean_std(&angles, divisor)?,
    })
}

/// Where the reference pose of each target comes from.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// The kinematic model pose stored with the target (log expressed in {H}).
    Model,
    /// Mean pose of the baseline run's rest window.
    Baseline(&'a PoseLog),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub window_s: f64,
    pub frame: FrameId,
    pub divisor: Divisor,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            window_s: REST_WINDOW_S,
            frame: FrameId::E,
            divisor: Divisor::Population,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetErrorStats {
    pub target_id: String,
    pub n_samples: usize,
    pub mu_pos: f64,
    pub sigma_pos: f64,
    pub mean_quat: UnitQuaternion,
    pub mu_ang: f64,
    pub sigma_ang: f64,
    /// The test or baseline group was shorter than the rest window.
    pub short_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapReason {
    MissingFromBaseline,
    MissingFromTest,
    MissingFromBoth,
    NotATarget,
}

impl fmt::Display for GapReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MissingFromBaseline => "missing from baseline log",
            Self::MissingFromTest => "missing from test log",
            Self::MissingFromBoth => "missing from both logs",
            Self::NotATarget => "logged but not in the target set",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    pub target_id: String,
    pub reason: GapReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Comparison {
    /// One row per analysed target, in target-set order.
    pub rows: Vec<TargetErrorStats>,
    pub gaps: Vec<Gap>,
}

/// Error statistics of the test run against the chosen reference, for every
/// target of `targets` that both sources cover.
pub fn compare_runs(
    reference: Reference<'_>,
    test: &PoseLog,
    targets: &TargetSet,
    opts: &CompareOptions,
) -> Result<Comparison> {
    let mut out = Comparison::default();
    let has = |log: &PoseLog, id: &str| log.group(id, opts.frame).next().is_some();

    for target in &targets.targets {
        let id = target.id.as_str();
        let in_test = has(test, id);
        let in_base = match reference {
            Reference::Model => true,
            Reference::Baseline(base) => has(base, id),
        };
        let gap = match (in_base, in_test) {
            (true, true) => None,
            (true, false) => Some(GapReason::MissingFromTest),
            (false, true) => Some(GapReason::MissingFromBaseline),
            (false, false) => Some(GapReason::MissingFromBoth),
        };
        if let Some(reason) = gap {
            out.gaps.push(Gap {
                target_id: id.to_string(),
                reason,
            });
            continue;
        }

        let (ref_pos, ref_quat, ref_short) = match reference {
            Reference::Model => (*target.pose.translation(), target.pose.orientation(), false),
            Reference::Baseline(base) => {
                let w = rest_window(base, id, opts.frame, opts.window_s)?;
                let n = w.samples.len() as f64;
                let pos = w.samples.iter().map(|r| r.position).sum::<Vector3<f64>>() / n;
                let quats: Vec<_> = w.samples.iter().map(|r| r.orientation).collect();
                (pos, quat_average(&quats)?, w.short)
            }
        };

        let w = rest_window(test, id, opts.frame, opts.window_s)?;
        let positions: Vec<_> = w.samples.iter().map(|r| r.position).collect();
        let quats: Vec<_> = w.samples.iter().map(|r| r.orientation).collect();
        let pos = position_error_stats(&positions, &ref_pos, opts.divisor)?;
        let ori = orientation_error_stats(&quats, &ref_quat, opts.divisor)?;
        out.rows.push(TargetErrorStats {
            target_id: id.to_string(),
            n_samples: positions.len(),
            mu_pos: pos.mean,
            sigma_pos: pos.std,
            mean_quat: ori.mean,
            mu_ang: ori.angle.mean,
            sigma_ang: ori.angle.std,
            short_window: ref_short || w.short,
        });
    }

    let known: BTreeSet<&str> = targets.ids().collect();
    let mut logged = test.target_ids();
    if let Reference::Baseline(base) = reference {
        logged.extend(base.target_ids());
    }
    for id in logged.difference(&known) {
        out.gaps.push(Gap {
            target_id: id.to_string(),
            reason: GapReason::NotATarget,
        });
    }
    Ok(out)
}

pub fn error_stats_to_csv(rows: &[TargetErrorStats]) -> String {
    let mut out = String::new();
    out.push_str(ERROR_STATS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.target_id,
            r.n_samples,
            r.mu_pos,
            r.sigma_pos,
            r.mu_ang.to_degrees(),
            r.sigma_ang.to_degrees()
        );
    }
    out
}

/// One row of a workspace cloud CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudRow {
    pub position: Vector3<f64>,
    pub radial: f64,
    pub kappa: f64,
    pub phi_deg: f64,
    pub alpha_deg: f64,
    pub beta: f64,
}

pub fn parse_cloud_csv(text: &str, origin: &Path) -> Result<Vec<CloudRow>> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or_default();
    if header != crate::workspace::CLOUD_CSV_HEADER {
        return Err(Error::format(
            origin,
            format!("unexpected cloud header `{header}`"),
        ));
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(origin, format!("line {}: {e}", i + 1)))?;
            if v.len() != 8 {
                return Err(Error::format(
                    origin,
                    format!("line {}: expected 8 fields", i + 1),
                ));
            }
            Ok(CloudRow {
                position: Vector3::new(v[0], v[1], v[2]),
                radial: v[3],
                kappa: v[4],
                phi_deg: v[5],
                alpha_deg: v[6],
                beta: v[7],
            })
        })
        .collect()
}

pub fn load_cloud_csv(path: impl AsRef<Path>) -> Result<Vec<CloudRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud_csv(&text, path)
}
