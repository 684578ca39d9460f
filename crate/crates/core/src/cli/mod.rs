//! Command line front end: `analyze`, `window`, `solve`, `study`, `calibrate`.
//!
//! Reports go to `--out` (or stdout) as JSON or CSV; a one-line summary per
//! result goes to stderr. `analyze` exits with 0 (Fredholm), 1 (not
//! Fredholm) or 2 (inconclusive); errors exit with codes above 2.

pub mod expr;

use crate::geometry::{parse_domain, ConicalDomain, GeometryError};
use crate::layerpot::{
    calibrate_line, default_study_meshes, fredholm_verdict_with, min_singular_value_study_with, solve_dirichlet,
    study_budget, study_meshes, weight_windows, CalibrationOptions, CalibrationPoint, FredholmVerdict, LayerError, MeshParams,
    StudyReport, Verdict, VerdictOptions,
};
use crate::mellin::{LineCalibration, ScanOptions, WindowOptions, WindowReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_FREDHOLM: i32 = 0;
pub const EXIT_NOT_FREDHOLM: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_SCHEMA: i32 = 5;
pub const EXIT_CALIBRATION: i32 = 6;
pub const EXIT_NUMERIC: i32 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Schema { path: String, source: GeometryError },
    #[error("calibration: {0}")]
    Calibration(String),
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error("report: {0}")]
    Report(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Expr(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Report(_) => EXIT_IO,
            CliError::Schema { .. } => EXIT_SCHEMA,
            CliError::Calibration(_) | CliError::Layer(LayerError::Calibration(_)) => EXIT_CALIBRATION,
            CliError::Layer(LayerError::NotFredholm(Verdict::Inconclusive)) => EXIT_INCONCLUSIVE,
            CliError::Layer(LayerError::NotFredholm(_)) => EXIT_NOT_FREDHOLM,
            CliError::Layer(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "conefred", version, about = "Fredholm analysis of c·I + K on domains with corners and cracks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fredholm verdict of c·I + K at one weight or over a weight range.
    Analyze(AnalyzeArgs),
    /// Admissible weight windows per vertex and globally.
    Window(WindowArgs),
    /// Interior Dirichlet problem through the double layer potential.
    Solve(SolveArgs),
    /// Smallest singular values of the weighted Nyström matrix under refinement.
    Study(StudyArgs),
    /// Fit the weight-to-line map on model corners and save it.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Calibration file written by `calibrate`; the analytic line is used when absent.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Symbol scan tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Initial half-width of the ξ scan.
    #[arg(long, default_value_t = 50.0)]
    pub xi_max: f64,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Scalar(s) c, comma separated.
    #[arg(long = "c", value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
    pub c: Vec<f64>,
    /// Single weight a.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["a_min", "a_max"])]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "a_max")]
    pub a_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "a_min")]
    pub a_max: Option<f64>,
    /// Number of weights in `[a_min, a_max]`.
    #[arg(long, default_value_t = 20)]
    pub a_steps: usize,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// Gauss nodes on the middle panel of each edge.
    #[arg(long)]
    pub mesh_n: Option<usize>,
    /// Grading ratio toward vertices.
    #[arg(long)]
    pub mesh_q: Option<f64>,
    /// Number of graded panels per edge end; a list for `study`.
    #[arg(long, value_delimiter = ',')]
    pub mesh_nc: Vec<usize>,
    /// Gauss nodes per graded panel.
    #[arg(long)]
    pub mesh_p: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub domain: PathBuf,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Weights this close to a symbol zero are inconclusive.
    #[arg(long, default_value_t = 5e-3)]
    pub band: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    pub domain: PathBuf,
    #[arg(long = "c", value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
    pub c: Vec<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.95)]
    pub a_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.95)]
    pub a_max: f64,
    /// Sampling step of the margin curve.
    #[arg(long, default_value_t = 0.05)]
    pub a_step: f64,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub domain: PathBuf,
    /// Dirichlet data, e.g. "x^2 - y^2" or "re(3)".
    #[arg(long)]
    pub g: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub a: f64,
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Test points keep at least this distance from the boundary.
    #[arg(long, default_value_t = 0.2)]
    pub min_dist: f64,
    /// Test grid resolution per axis.
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    #[command(flatten)]
    pub scan: ScanArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    pub domain: PathBuf,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Regular polygons used as model corners.
    #[arg(long, value_delimiter = ',', default_value = "3,4,6")]
    pub sides: Vec<usize>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.95)]
    pub a_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.05)]
    pub a_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub a_step: f64,
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Calibration file to write.
    #[arg(long, default_value = "calibration.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Everything a run depends on, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub domain: Option<String>,
    pub domain_hash: Option<String>,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub a_range: Option<(f64, f64)>,
    pub meshes: Vec<MeshParams>,
    pub tol: Option<f64>,
    pub xi_max: Option<f64>,
    pub band: Option<f64>,
    pub out: Option<String>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub calibration: LineCalibration,
    pub calibration_file: Option<String>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Usage(format!("--{name} must be positive"))),
            _ => Ok(()),
        };
        positive("tol", self.tol)?;
        positive("xi-max", self.xi_max)?;
        positive("band", self.band)?;
        if self.c.is_empty() || self.c.iter().any(|c| !c.is_finite()) {
            return Err(CliError::Usage("--c needs finite values".into()));
        }
        if self.a.iter().any(|a| !a.is_finite()) {
            return Err(CliError::Usage("weights must be finite".into()));
        }
        if let Some((lo, hi)) = self.a_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CliError::Usage(format!("weight range ({lo}, {hi}) must be finite with a-min < a-max")));
            }
        }
        if self.jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    result: T,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Window(w) => cmd_window(w),
        Command::Solve(s) => cmd_solve(s),
        Command::Study(s) => cmd_study(s),
        Command::Calibrate(c) => cmd_calibrate(c),
    }
}

fn load_domain(path: &Path) -> Result<ConicalDomain, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    parse_domain(&text).map_err(|source| CliError::Schema { path: path.display().to_string(), source })
}

/// The line calibration from `path`, or the analytic one.
pub fn load_calibration(path: Option<&Path>) -> Result<LineCalibration, CliError> {
    let Some(path) = path else {
        return Ok(LineCalibration::analytic());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Calibration(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Calibration(format!("{}: {e}", path.display())))?;
    let cal = value.get("calibration").cloned().unwrap_or(value);
    let cal: LineCalibration =
        serde_json::from_value(cal).map_err(|e| CliError::Calibration(format!("{}: {e}", path.display())))?;
    if !(cal.slope.is_finite() && cal.slope != 0.0 && cal.offset.is_finite()) {
        return Err(CliError::Calibration(format!("{}: degenerate line", path.display())));
    }
    Ok(cal)
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn weights(w: &WeightArgs) -> Result<(Vec<f64>, Option<(f64, f64)>), CliError> {
    match (w.a, w.a_min, w.a_max) {
        (Some(a), _, _) => Ok((vec![a], None)),
        (None, Some(lo), Some(hi)) => {
            if w.a_steps < 2 {
                return Err(CliError::Usage("--a-steps must be at least 2".into()));
            }
            let n = w.a_steps - 1;
            Ok(((0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect(), Some((lo, hi))))
        }
        _ => Ok((vec![0.0], None)),
    }
}

fn mesh_list(m: &MeshArgs, defaults: Vec<MeshParams>) -> Result<Vec<MeshParams>, CliError> {
    let levels: Vec<MeshParams> = if m.mesh_nc.is_empty() {
        defaults
    } else {
        let base = defaults[0];
        m.mesh_nc.iter().map(|&nc| MeshParams { nc, ..base }).collect()
    };
    let out: Vec<MeshParams> = levels
        .into_iter()
        .map(|p| MeshParams {
            n: m.mesh_n.unwrap_or(p.n),
            q: m.mesh_q.unwrap_or(p.q),
            nc: p.nc,
            p: m.mesh_p.unwrap_or(p.p),
        })
        .collect();
    for p in &out {
        p.validate()?;
    }
    Ok(out)
}

fn scan_options(s: &ScanArgs) -> ScanOptions {
    ScanOptions { tol: s.tol, xi_max: s.xi_max, xi_cap: ScanOptions::default().xi_cap.max(s.xi_max), ..ScanOptions::default() }
}

fn write_report(common: &Common, bytes: &[u8]) -> Result<(), CliError> {
    match &common.out {
        Some(path) => {
            std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn json<T: Serialize>(config: &RunConfig, result: T) -> Result<Vec<u8>, CliError> {
    let env = Envelope { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), config, result };
    let mut v = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Report(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Report(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Report(e.to_string()))
}

fn opt_path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

#[derive(Debug, Serialize)]
struct VerdictRow<'a> {
    c: f64,
    a: f64,
    gamma: f64,
    overall: Verdict,
    stratum: &'a str,
    status: crate::layerpot::StratumStatus,
    margin: f64,
    witness_xi: f64,
    xi_max: f64,
    tail_bound: f64,
    tol: f64,
    band: f64,
}

fn min_margin(v: &FredholmVerdict) -> f64 {
    v.strata.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min)
}

pub fn cmd_analyze(args: AnalyzeArgs) -> Result<i32, CliError> {
    let d = load_domain(&args.domain)?;
    let cal = load_calibration(args.common.calibration.as_deref())?;
    let (a_list, a_range) = weights(&args.weight)?;
    let config = RunConfig {
        subcommand: "analyze".into(),
        domain: Some(args.domain.display().to_string()),
        domain_hash: Some(d.hash.clone()),
        c: args.weight.c.clone(),
        a: a_list.clone(),
        a_range,
        meshes: Vec::new(),
        tol: Some(args.scan.tol),
        xi_max: Some(args.scan.xi_max),
        band: Some(args.band),
        out: opt_path(&args.common.out),
        format: args.common.format,
        jobs: args.common.jobs,
        calibration: cal.clone(),
        calibration_file: opt_path(&args.common.calibration),
    };
    config.validate()?;
    let opts = VerdictOptions { scan: scan_options(&args.scan), band: args.band };
    let items: Vec<(f64, f64)> = config.c.iter().flat_map(|&c| a_list.iter().map(move |&a| (c, a))).collect();
    let pool = thread_pool(args.common.jobs)?;
    let verdicts: Result<Vec<FredholmVerdict>, LayerError> =
        pool.install(|| items.par_iter().map(|&(c, a)| fredholm_verdict_with(&d, c, a, &cal, &opts)).collect());
    let verdicts = verdicts?;
    for v in &verdicts {
        eprintln!(
            "c={:+} a={:+.4}: {} (min margin {:.3e}, tol {:.0e}, band {:.0e}{})",
            v.c,
            v.a,
            verdict_name(v.overall),
            min_margin(v),
            v.tol,
            v.band,
            v.witness.as_ref().map(|w| format!(", witness {w}")).unwrap_or_default()
        );
    }
    let bytes = match args.common.format {
        Format::Json => json(&config, &verdicts)?,
        Format::Csv => {
            let rows: Vec<VerdictRow> = verdicts
                .iter()
                .flat_map(|v| {
                    v.strata.iter().map(move |s| VerdictRow {
                        c: v.c,
                        a: v.a,
                        gamma: v.gamma,
                        overall: v.overall,
                        stratum: &s.stratum,
                        status: s.status,
                        margin: s.margin,
                        witness_xi: s.witness_xi,
                        xi_max: s.xi_max,
                        tail_bound: s.tail_bound,
                        tol: v.tol,
                        band: v.band,
                    })
                })
                .collect();
            csv_rows(&rows)?
        }
    };
    write_report(&args.common, &bytes)?;
    let any = |x: Verdict| verdicts.iter().any(|v| v.overall == x);
    Ok(if any(Verdict::NotFredholm) {
        EXIT_NOT_FREDHOLM
    } else if any(Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_FREDHOLM
    })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Fredholm => "fredholm",
        Verdict::NotFredholm => "not fredholm",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Serialize)]
struct MarginRow {
    c: f64,
    a: f64,
    margin: f64,
    witness_xi: f64,
}

pub fn cmd_window(args: WindowArgs) -> Result<i32, CliError> {
    let d = load_domain(&args.domain)?;
    let cal = load_calibration(args.common.calibration.as_deref())?;
    let config = RunConfig {
        subcommand: "window".into(),
        domain: Some(args.domain.display().to_string()),
        domain_hash: Some(d.hash.clone()),
        c: args.c.clone(),
        a: Vec::new(),
        a_range: Some((args.a_min, args.a_max)),
        meshes: Vec::new(),
        tol: Some(args.scan.tol),
        xi_max: Some(args.scan.xi_max),
        band: None,
        out: opt_path(&args.common.out),
        format: args.common.format,
        jobs: args.common.jobs,
        calibration: cal.clone(),
        calibration_file: opt_path(&args.common.calibration),
    };
    config.validate()?;
    if !(args.a_step > 0.0 && args.a_step.is_finite()) {
        return Err(CliError::Usage("--a-step must be positive".into()));
    }
    let opts = WindowOptions { scan: scan_options(&args.scan), a_step: args.a_step, ..WindowOptions::default() };
    let pool = thread_pool(args.common.jobs)?;
    let reports: Result<Vec<WindowReport>, LayerError> = pool.install(|| {
        config.c.par_iter().map(|&c| weight_windows(&d, c, &cal, (args.a_min, args.a_max), &opts)).collect()
    });
    let reports = reports?;
    for r in &reports {
        let fmt = |w: Option<(f64, f64)>| w.map(|(l, u)| format!("({l:.6}, {u:.6})")).unwrap_or_else(|| "none".into());
        eprintln!("c={:+}: global window {} (reference {}, tol {:.0e})", r.c, fmt(r.global), fmt(r.reference), args.scan.tol);
    }
    let bytes = match args.common.format {
        Format::Json => json(&config, &reports)?,
        Format::Csv => {
            let rows: Vec<MarginRow> = reports
                .iter()
                .flat_map(|r| {
                    r.margin_curve.iter().map(move |s| MarginRow { c: r.c, a: s.a, margin: s.margin, witness_xi: s.witness_xi })
                })
                .collect();
            csv_rows(&rows)?
        }
    };
    write_report(&args.common, &bytes)?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct TestPoint {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub g: f64,
    pub error: f64,
}

#[derive(Debug, Serialize)]
struct SolveResult<'a> {
    g: &'a str,
    expanded: String,
    harmonic: bool,
    nodes: usize,
    residual: f64,
    verdict: &'a FredholmVerdict,
    /// `max |u − g| / max |g|` over the test points; only meaningful for harmonic `g`.
    max_relative_error: Option<f64>,
    points: &'a [TestPoint],
}

pub fn cmd_solve(args: SolveArgs) -> Result<i32, CliError> {
    let d = load_domain(&args.domain)?;
    let cal = load_calibration(args.common.calibration.as_deref())?;
    let g = expr::parse(&args.g)?;
    let meshes = mesh_list(&args.mesh, vec![MeshParams::default()])?;
    if meshes.len() != 1 {
        return Err(CliError::Usage("solve takes a single --mesh-nc".into()));
    }
    let config = RunConfig {
        subcommand: "solve".into(),
        domain: Some(args.domain.display().to_string()),
        domain_hash: Some(d.hash.clone()),
        c: vec![1.0],
        a: vec![args.a],
        a_range: None,
        meshes: meshes.clone(),
        tol: Some(args.scan.tol),
        xi_max: Some(args.scan.xi_max),
        band: None,
        out: opt_path(&args.common.out),
        format: args.common.format,
        jobs: args.common.jobs,
        calibration: cal.clone(),
        calibration_file: opt_path(&args.common.calibration),
    };
    config.validate()?;
    if args.points < 2 || !(args.min_dist >= 0.0) {
        return Err(CliError::Usage("--points must be at least 2 and --min-dist nonnegative".into()));
    }
    let opts = VerdictOptions { scan: scan_options(&args.scan), ..VerdictOptions::default() };
    let pool = thread_pool(args.common.jobs)?;
    let sol = pool.install(|| solve_dirichlet(&d, |p| g.eval(p[0], p[1]), args.a, meshes[0], &cal, &opts))?;
    let pts = interior_grid(&d, args.points, args.min_dist);
    let points: Vec<TestPoint> = pool.install(|| {
        pts.par_iter()
            .map(|&[x, y]| {
                let u = sol.evaluate([x, y]);
                let gv = g.eval(x, y);
                TestPoint { x, y, u, g: gv, error: (u - gv).abs() }
            })
            .collect()
    });
    let harmonic = g.is_harmonic();
    let scale = points.iter().fold(0.0f64, |m, p| m.max(p.g.abs()));
    let max_err = points.iter().fold(0.0f64, |m, p| m.max(p.error));
    let rel = (harmonic && !points.is_empty()).then(|| if scale > 0.0 { max_err / scale } else { max_err });
    match rel {
        Some(r) => eprintln!(
            "max interior relative error {r:.3e} over {} points (residual {:.1e}, {} nodes)",
            points.len(),
            sol.residual,
            sol.mesh.len()
        ),
        None => eprintln!(
            "solved with residual {:.1e} on {} nodes; g is not harmonic, no error reported",
            sol.residual,
            sol.mesh.len()
        ),
    }
    let bytes = match args.common.format {
        Format::Json => json(
            &config,
            SolveResult {
                g: &args.g,
                expanded: g.to_string(),
                harmonic,
                nodes: sol.mesh.len(),
                residual: sol.residual,
                verdict: &sol.verdict,
                max_relative_error: rel,
                points: &points,
            },
        )?,
        Format::Csv => csv_rows(&points)?,
    };
    write_report(&args.common, &bytes)?;
    Ok(0)
}

/// Grid points over the bounding box at least `min_dist` inside the domain.
pub fn interior_grid(d: &ConicalDomain, per_axis: usize, min_dist: f64) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for e in &d.edges {
        for p in e.curve.polyline(64) {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    let n = per_axis - 1;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let p = [lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64, lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64];
            if d.contains(p) && d.distance_to_boundary(p) >= min_dist {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct StudyCsvRow {
    c: f64,
    a: f64,
    nodes: usize,
    n: usize,
    q: f64,
    nc: usize,
    p: usize,
    h_min: f64,
    k: usize,
    sigma: f64,
}

pub fn cmd_study(args: StudyArgs) -> Result<i32, CliError> {
    let d = load_domain(&args.domain)?;
    let cal = load_calibration(args.common.calibration.as_deref())?;
    let (a_list, a_range) = weights(&args.weight)?;
    let meshes = mesh_list(&args.mesh, study_meshes(&d))?;
    if meshes.len() < 2 {
        return Err(CliError::Usage("a study needs at least two --mesh-nc levels".into()));
    }
    let config = RunConfig {
        subcommand: "study".into(),
        domain: Some(args.domain.display().to_string()),
        domain_hash: Some(d.hash.clone()),
        c: args.weight.c.clone(),
        a: a_list.clone(),
        a_range,
        meshes: meshes.clone(),
        tol: None,
        xi_max: None,
        band: None,
        out: opt_path(&args.common.out),
        format: args.common.format,
        jobs: args.common.jobs,
        calibration: cal.clone(),
        calibration_file: opt_path(&args.common.calibration),
    };
    config.validate()?;
    let pool = thread_pool(args.common.jobs)?;
    let reports: Result<Vec<StudyReport>, LayerError> = pool.install(|| {
        let mut out = Vec::new();
        for &c in &config.c {
            let w = weight_windows(&d, c, &cal, (-0.95, 0.95), &WindowOptions::default())?;
            for &a in &a_list {
                let budget = study_budget(&d, c, a, Some(&w), &cal)?;
                out.push(min_singular_value_study_with(&d, c, a, &meshes, budget)?);
            }
        }
        Ok(out)
    });
    let reports = reports?;
    for r in &reports {
        eprintln!(
            "c={:+} a={:+.4}: sigma_min {} (exponent {:.3}), sigma_{} {} (exponent {:.3}); smallest {:.3e}",
            r.c,
            r.a,
            trend_name(r.raw_trend),
            r.raw_slope,
            r.budget.total + 1,
            trend_name(r.trend),
            r.slope,
            r.rows.last().and_then(|row| row.sigma.first()).copied().unwrap_or(f64::NAN)
        );
    }
    let bytes = match args.common.format {
        Format::Json => json(&config, &reports)?,
        Format::Csv => {
            let rows: Vec<StudyCsvRow> = reports
                .iter()
                .flat_map(|r| {
                    r.rows.iter().flat_map(move |row| {
                        row.sigma.iter().enumerate().map(move |(k, &sigma)| StudyCsvRow {
                            c: r.c,
                            a: r.a,
                            nodes: row.nodes,
                            n: row.n,
                            q: row.q,
                            nc: row.nc,
                            p: row.p,
                            h_min: row.h_min,
                            k: k + 1,
                            sigma,
                        })
                    })
                })
                .collect();
            csv_rows(&rows)?
        }
    };
    write_report(&args.common, &bytes)?;
    Ok(0)
}

fn trend_name(t: crate::layerpot::Trend) -> &'static str {
    match t {
        crate::layerpot::Trend::BoundedBelow => "bounded below",
        crate::layerpot::Trend::Decaying => "decaying",
        crate::layerpot::Trend::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Serialize)]
struct CalibrationFile<'a> {
    tool: &'static str,
    version: &'static str,
    calibration: &'a LineCalibration,
    points: &'a [CalibrationPoint],
    options: &'a CalibrationOptions,
}

pub fn cmd_calibrate(args: CalibrateArgs) -> Result<i32, CliError> {
    if args.sides.is_empty() || args.sides.iter().any(|&n| n < 3) {
        return Err(CliError::Usage("--sides needs polygons with at least 3 sides".into()));
    }
    if !(args.a_min < args.a_max && args.a_step > 0.0 && args.a_min.is_finite() && args.a_max.is_finite()) {
        return Err(CliError::Usage("need a-min < a-max and a positive a-step".into()));
    }
    if args.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let opts = CalibrationOptions {
        sides: args.sides.clone(),
        meshes: mesh_list(&args.mesh, default_study_meshes())?,
        search: (args.a_min, args.a_max),
        step: args.a_step,
    };
    let pool = thread_pool(args.jobs)?;
    let report = pool.install(|| calibrate_line(&opts))?;
    for p in &report.points {
        eprintln!("{}-gon: symbol zero {:.6}, decay onset {:.4}", p.sides, p.symbol_zero, p.onset);
    }
    let c = &report.calibration;
    eprintln!("gamma(a) = {:.4}*a {:+.4}", c.slope, c.offset);
    let file = CalibrationFile {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        calibration: &report.calibration,
        points: &report.points,
        options: &opts,
    };
    let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| CliError::Report(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(&args.out, bytes).map_err(|source| CliError::Io { path: args.out.display().to_string(), source })?;
    Ok(0)
}
