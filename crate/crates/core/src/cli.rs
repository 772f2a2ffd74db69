//! The `tiltx` command-line front end.
//!
//! Angles are degrees on the command line and radians inside the library.
//! Every floating-point value written to stdout or to a file uses fixed
//! six-decimal formatting, and files are written atomically.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical non-convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde_json::{json, Value};

use crate::analysis::{
    compare_runs, error_stats_to_csv, load_pose_log, CompareOptions, Divisor, FrameId, LoadReport,
    Reference, REST_WINDOW_S,
};
use crate::chain::{actuation_plan, tiltx_fk, TiltXConfig};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::ik::IkSolver;
use crate::workspace::{
    export_cloud, export_targets, load_targets, reach_stats, sample_workspace, slice_targets,
    write_atomic, CloudFormat, Grid, SliceSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tiltx",
    version,
    about = "Tilting telescopic continuum manipulator toolkit"
)]
pub struct Cli {
    /// Geometry JSON; built-in defaults when absent.
    #[arg(long, global = true, env = "TILTX_GEOMETRY", value_name = "PATH")]
    pub geometry: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the hinge-to-end-effector transform.
    Fk(ConfigArgs),
    /// Solve for a configuration reaching a tip position (hinge frame, mm).
    Ik(IkArgs),
    /// Motor increments between two configurations.
    Plan(PlanArgs),
    /// Sample the workspace and export the point cloud.
    Workspace(WorkspaceArgs),
    /// Generate fixed-depth slice targets.
    Slices(SlicesArgs),
    /// Per-target error statistics from motion-capture logs.
    Analyze(AnalyzeArgs),
    /// Show the active geometry.
    Geometry(GeometryArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Curvature (1/mm).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha_deg: f64,
    /// Telescopic extension (mm).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct IkArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub z: f64,
    /// Position tolerance (mm).
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Start configuration as `kappa,phi_deg,alpha_deg,beta_mm`.
    #[arg(long, value_parser = parse_config_tuple, allow_hyphen_values = true)]
    pub from: [f64; 4],
    /// Goal configuration as `kappa,phi_deg,alpha_deg,beta_mm`.
    #[arg(long, value_parser = parse_config_tuple, allow_hyphen_values = true)]
    pub to: [f64; 4],
}

#[derive(Debug, Args)]
pub struct WorkspaceArgs {
    /// Samples per axis as `KxPxAxB` (bend, bend plane, tilt, extension).
    #[arg(long, default_value = "10x12x10x8")]
    pub grid: Grid,
    /// Output file, `.csv` or `.ply`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SlicesArgs {
    /// Tip depths below the section base (mm); default L, 0.9L, 0.8L, 0.7L.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub offsets: Option<Vec<f64>>,
    #[arg(long, default_value_t = 30.0)]
    pub phi_step: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_deg: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Number of the first target; targets are P<first-id>, P<first-id + 1>, ...
    #[arg(long, default_value_t = 1)]
    pub first_id: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Reference is the kinematic model pose of each target.
    Model,
    /// Reference is the rest-window mean of the baseline log.
    Baseline,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Required in baseline mode.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Rest-window length (s).
    #[arg(long, default_value_t = REST_WINDOW_S)]
    pub window: f64,
    /// Tracked frame to analyse (U, H, B, T or E).
    #[arg(long, default_value = "E")]
    pub frame: FrameId,
    /// Use the N − 1 divisor for standard deviations.
    #[arg(long)]
    pub sample_std: bool,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// Print the geometry as JSON.
    #[arg(long)]
    pub dump: bool,
}

fn parse_config_tuple(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("{e} in {s:?}"))?;
    v.try_into()
        .map_err(|_| format!("expected kappa,phi_deg,alpha_deg,beta_mm, got {s:?}"))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_INPUT,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Unreachable { .. } => EXIT_NO_CONVERGENCE,
                _ => EXIT_INPUT,
            }
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let g = match &cli.geometry {
        Some(path) => Geometry::load(path)?,
        None => Geometry::default(),
    };
    match &cli.command {
        Command::Fk(a) => fk(a, &g, out),
        Command::Ik(a) => ik(a, &g, out),
        Command::Plan(a) => plan(a, &g, out),
        Command::Workspace(a) => workspace(a, &g, out),
        Command::Slices(a) => slices(a, &g, out),
        Command::Analyze(a) => analyze(a, &g, out, err),
        Command::Geometry(a) if a.dump => emit_raw(out, &g.to_json()),
        Command::Geometry(_) => emit_raw(
            out,
            &format!(
                "geometry: {}\nstraight full reach: {:.6} mm (use --dump for the JSON)",
                source_name(cli),
                g.max_reach()
            ),
        ),
    }
}

fn source_name(cli: &Cli) -> String {
    cli.geometry.as_ref().map_or_else(
        || "built-in defaults".to_string(),
        |p| p.display().to_string(),
    )
}

fn config(
    kappa: f64,
    phi_deg: f64,
    alpha_deg: f64,
    beta: f64,
    g: &Geometry,
) -> Result<TiltXConfig> {
    TiltXConfig::with_geometry(kappa, phi_deg.to_radians(), alpha_deg.to_radians(), beta, g)
}

fn fk(a: &ConfigArgs, g: &Geometry, out: &mut dyn Write) -> Result<()> {
    let cfg = config(a.kappa, a.phi_deg, a.alpha_deg, a.beta, g)?;
    let t = tiltx_fk(&cfg, g);
    let r = t.rotation();
    let q = t.orientation();
    let p = t.translation();
    emit(
        out,
        &json!({
            "rotation": (0..3).map(|i| (0..3).map(|j| fixed(r[(i, j)])).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "translation": vec3(p),
            "norm_mm": fixed(p.norm()),
            "quaternion_xyzw": [fixed(q.x()), fixed(q.y()), fixed(q.z()), fixed(q.w())],
        }),
    )
}

fn ik(a: &IkArgs, g: &Geometry, out: &mut dyn Write) -> Result<()> {
    let solver = IkSolver {
        tolerance: a.tolerance,
        ..IkSolver::default()
    };
    let target = Vector3::new(a.x, a.y, a.z);
    let sol = solver.solve(&target, g, &TiltXConfig::zero(g))?;
    let c = sol.config;
    emit(
        out,
        &json!({
            "kappa": fixed(c.arc().kappa()),
            "phi_deg": fixed(c.arc().phi().to_degrees()),
            "alpha_deg": fixed(c.alpha().to_degrees()),
            "beta_mm": fixed(c.beta()),
            "tip": vec3(tiltx_fk(&c, g).translation()),
            "residual_mm": fixed(sol.residual),
            "iterations": sol.iterations,
        }),
    )
}

fn plan(a: &PlanArgs, g: &Geometry, out: &mut dyn Write) -> Result<()> {
    let [k0, p0, a0, b0] = a.from;
    let [k1, p1, a1, b1] = a.to;
    let from = config(k0, p0, a0, b0, g)?;
    let to = config(k1, p1, a1, b1, g)?;
    let plan = actuation_plan(&from, &to, g)?;
    let rev = |rad: f64| fixed(rad / std::f64::consts::TAU);
    let cables: Vec<Value> = plan
        .cables
        .iter()
        .zip(plan.motors.cable)
        .enumerate()
        .map(|(i, (c, m))| {
            json!({
                "cable": i + 1,
                "tilt_mm": fixed(c.tilt),
                "telescope_mm": fixed(c.telescope),
                "bend_mm": fixed(c.bend),
                "total_mm": fixed(c.total),
                "motor_rad": fixed(m),
                "motor_rev": rev(m),
            })
        })
        .collect();
    emit(
        out,
        &json!({
            "cables": cables,
            "tilt_motor_rad": fixed(plan.motors.tilt),
            "tilt_motor_rev": rev(plan.motors.tilt),
            "telescope_motor_rad": fixed(plan.motors.telescope),
            "telescope_motor_rev": rev(plan.motors.telescope),
        }),
    )
}

fn workspace(a: &WorkspaceArgs, g: &Geometry, out: &mut dyn Write) -> Result<()> {
    let format = CloudFormat::from_path(&a.out)?;
    let cloud = sample_workspace(g, &a.grid);
    let stats = reach_stats(&cloud)?;
    export_cloud(&cloud, format, &a.out)?;
    emit(
        out,
        &json!({
            "grid": a.grid.to_string(),
            "n_points": stats.n_points,
            "max_reach_mm": fixed(stats.max_reach),
            "min_reach_mm": fixed(stats.min_reach),
            "bbox_min_mm": stats.bbox_min.map(fixed),
            "bbox_max_mm": stats.bbox_max.map(fixed),
        }),
    )
}

fn slices(a: &SlicesArgs, g: &Geometry, out: &mut dyn Write) -> Result<()> {
    let mut spec = SliceSpec::default_for(g);
    if let Some(offsets) = &a.offsets {
        spec.offsets = offsets.clone();
    }
    spec.phi_step_deg = a.phi_step;
    spec.alpha = a.alpha_deg.to_radians();
    spec.beta = a.beta;
    spec.first_id = a.first_id;
    let set = slice_targets(g, &spec)?;
    export_targets(&set, &a.out)?;
    emit(
        out,
        &json!({ "targets": set.targets.len(), "slices": spec.offsets.len(), "out": a.out.display().to_string() }),
    )
}

fn analyze(a: &AnalyzeArgs, g: &Geometry, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if a.window.is_nan() || a.window <= 0.0 {
        return Err(Error::Invalid(format!(
            "--window must be > 0, got {}",
            a.window
        )));
    }
    let targets = load_targets(&a.targets, g)?;
    let baseline = match (a.mode, &a.baseline) {
        (Mode::Baseline, Some(path)) => Some(load_reported(path, err)?),
        (Mode::Baseline, None) => {
            return Err(Error::Invalid(
                "--mode baseline requires --baseline <log.csv>".into(),
            ))
        }
        (Mode::Model, Some(_)) => {
            return Err(Error::Invalid(
                "--baseline is only used with --mode baseline".into(),
            ))
        }
        (Mode::Model, None) => None,
    };
    let test = load_reported(&a.log, err)?;
    let reference = match &baseline {
        Some(log) => Reference::Baseline(log),
        None => Reference::Model,
    };
    let opts = CompareOptions {
        window_s: a.window,
        frame: a.frame,
        divisor: if a.sample_std {
            Divisor::Sample
        } else {
            Divisor::Population
        },
    };
    let cmp = compare_runs(reference, &test, &targets, &opts)?;
    for gap in &cmp.gaps {
        let _ = writeln!(err, "warning: target {} {}", gap.target_id, gap.reason);
    }
    for row in cmp.rows.iter().filter(|r| r.short_window) {
        let _ = writeln!(
            err,
            "warning: target {} has less than {} s of samples; using all of them",
            row.target_id, a.window
        );
    }
    if cmp.rows.is_empty() {
        return Err(Error::Invalid("no target is covered by the logs".into()));
    }
    write_atomic(&a.out, &error_stats_to_csv(&cmp.rows))?;
    emit(
        out,
        &json!({ "targets": cmp.rows.len(), "gaps": cmp.gaps.len(), "out": a.out.display().to_string() }),
    )
}

fn load_reported(path: &std::path::Path, err: &mut dyn Write) -> Result<crate::analysis::PoseLog> {
    let (log, report): (_, LoadReport) = load_pose_log(path)?;
    for row in &report.rejected {
        let _ = writeln!(
            err,
            "warning: {}:{}: rejected: {}",
            path.display(),
            row.line,
            row.reason
        );
    }
    Ok(log)
}

/// A JSON number printed with exactly six decimals.
fn fixed(x: f64) -> Value {
    let mut s = format!("{x:.6}");
    if s == "-0.000000" {
        s.remove(0);
    }
    serde_json::from_str(&s).expect("formatted float is valid JSON")
}

fn vec3(v: &Vector3<f64>) -> [Value; 3] {
    [fixed(v.x), fixed(v.y), fixed(v.z)]
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).expect("JSON value serializes");
    emit_raw(out, &text)
}

fn emit_raw(out: &mut dyn Write, text: &str) -> Result<()> {
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}
