//! `trip` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 pipeline failure,
//! 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use trip::evaluation::{compute_error_report, ErrorReport, PointSet};
use trip::io;
use trip::pipeline::{run_pipeline, PipelineConfig, PipelineOutput, Report};
use trip::synthgen::{generate_scene, CorruptionModel, Geometry, SceneConfig, SyntheticScene};
use trip::theorychecks::{
    closed_form_differences_exact, exact_recovery_experiment, johnson_green_levels, spread_corruption, DecaySetup,
    DecayTrace, JohnsonGreenLevels, Rational,
};
use trip::{LossSpec, SolverMode, TripError, ViewingGraphF64};

const MEASUREMENTS_FILE: &str = "measurements.txt";
const GROUND_TRUTH_FILE: &str = "ground_truth.txt";
const LABELS_FILE: &str = "labels.txt";

#[derive(Parser)]
#[command(name = "trip", version, about = "Triangle-based robust translation averaging")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: measurements, ground truth and labels.
    Synth {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Estimate camera locations from a measurement file.
    Solve {
        /// Measurement file (`i j dx dy dz` per line).
        #[arg(long)]
        measurements: Option<PathBuf>,
        /// Optional ground truth; adds an error block to the report.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Locations output (`i x y z`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON report output (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Align estimated locations to ground truth and report errors.
    Eval {
        /// Estimated locations (`i x y z`).
        #[arg(long)]
        locations: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Restrict evaluation to the ids listed in this file.
        #[arg(long)]
        nodes: Option<PathBuf>,
        /// JSON report output (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-node `node,error` CSV output.
        #[arg(long)]
        errors_csv: Option<PathBuf>,
    },
    /// Synthesize, solve and evaluate in one run.
    Pipeline {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also write scene files and estimated locations here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON report output (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the Johnson-graph Green forms and the annealed decay experiment.
    VerifyTheory {
        /// Johnson sizes: `n`, `a..b` or `a..=b` (both inclusive), between 6 and 14.
        #[arg(long, default_value = "6..12")]
        johnson_n: String,
        /// Cameras in the complete-graph decay experiment (0 skips it).
        #[arg(long, default_value_t = 30)]
        decay_n: usize,
        /// Corrupted edges in the decay experiment.
        #[arg(long, default_value_t = 5)]
        decay_corrupted: usize,
        /// Annealing stages.
        #[arg(long, default_value_t = 20)]
        stages: usize,
        /// Scale decay factor per stage.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// JSON scene configuration; flags override its fields.
    #[arg(long)]
    scene_config: Option<PathBuf>,
    /// Camera layout: grid or torus.
    #[arg(long)]
    geometry: Option<Geometry>,
    /// Number of cameras.
    #[arg(long)]
    n: Option<usize>,
    /// Nearest neighbours per camera in the clean graph.
    #[arg(long)]
    k_good: Option<usize>,
    /// Target fraction of corrupted edges.
    #[arg(long)]
    q: Option<f64>,
    /// Direction noise level.
    #[arg(long)]
    sigma: Option<f64>,
    /// Corruption model: uniform or clustered.
    #[arg(long)]
    model: Option<CorruptionModel>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coverage target for triangle selection.
    #[arg(long)]
    gamma: Option<f64>,
    /// Supporting triangles needed before an edge becomes active.
    #[arg(long)]
    min_support: Option<usize>,
    /// Backend for both least-squares stages.
    #[arg(long)]
    solver: Option<SolverMode>,
    /// Use a fixed Cauchy scale for log-scale synchronization instead of
    /// the default continuation.
    #[arg(long)]
    fixed_scale_loss: Option<f64>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Verification(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Failure>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<TripError>() {
            return match e {
                TripError::Parse { .. }
                | TripError::File { .. }
                | TripError::Io(_)
                | TripError::InvalidParameter(_)
                | TripError::InvalidScene(_)
                | TripError::NodeOutOfRange { .. }
                | TripError::SelfLoop(_)
                | TripError::ZeroDirection(..)
                | TripError::InconsistentDuplicate { .. } => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(TripError::InvalidParameter("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.cmd {
        Command::Synth { scene, out } => cmd_synth(&scene, &out),
        Command::Solve { measurements, ground_truth, out, report, solver } => {
            let mut cfg = solver.resolve(cli.threads)?;
            cfg.measurements = measurements.map(path_string).or(cfg.measurements);
            cfg.ground_truth = ground_truth.map(path_string).or(cfg.ground_truth);
            cfg.locations_out = out.map(path_string).or(cfg.locations_out);
            cfg.report_out = report.map(path_string).or(cfg.report_out);
            cmd_solve(cfg)
        }
        Command::Eval { locations, ground_truth, nodes, report, errors_csv } => {
            cmd_eval(&locations, &ground_truth, nodes.as_deref(), report.as_deref(), errors_csv.as_deref())
        }
        Command::Pipeline { scene, solver, out, report } => {
            let cfg = solver.resolve(cli.threads)?;
            cmd_pipeline(&scene, cfg, out.as_deref(), report.as_deref())
        }
        Command::VerifyTheory { johnson_n, decay_n, decay_corrupted, stages, tau, seed, report } => {
            let setup = DecaySetup { tau, stages, seed, ..DecaySetup::default() };
            cmd_verify_theory(&johnson_n, decay_n, decay_corrupted, &setup, report.as_deref())
        }
    }
}

fn path_string(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| TripError::File { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON configuration", path.display()))
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            fs::write(p, text + "\n").map_err(|source| TripError::File { path: p.display().to_string(), source })?
        }
        None => println!("{text}"),
    }
    Ok(())
}

impl SceneArgs {
    fn resolve(&self) -> Result<SceneConfig> {
        let mut cfg = match &self.scene_config {
            Some(p) => read_json(p)?,
            None => SceneConfig::default(),
        };
        if let Some(v) = self.geometry {
            cfg.geometry = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.k_good {
            cfg.k_good = v;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SolverArgs {
    fn resolve(&self, threads: Option<usize>) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_json(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.gamma {
            cfg.selection.gamma = v;
        }
        if let Some(v) = self.min_support {
            cfg.selection.min_support = v;
        }
        if let Some(v) = self.solver {
            cfg = cfg.with_solver(v);
        }
        if let Some(c) = self.fixed_scale_loss {
            cfg.scale_loss = LossSpec::cauchy(c);
        }
        if threads.is_some() {
            cfg.threads = threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_scene(scene: &SyntheticScene, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| TripError::File { path: dir.display().to_string(), source })?;
    io::write_measurements(&dir.join(MEASUREMENTS_FILE), &scene.measurements())?;
    let gt: PointSet = scene.locations.iter().copied().enumerate().collect();
    io::write_points(&dir.join(GROUND_TRUTH_FILE), &gt)?;
    let labels: Vec<_> = scene.edges.iter().map(|e| (e.i, e.j, e.corrupt)).collect();
    io::write_labels(&dir.join(LABELS_FILE), &labels)?;
    Ok(())
}

fn cmd_synth(args: &SceneArgs, out: &Path) -> Result<()> {
    let cfg = args.resolve()?;
    let scene = generate_scene(&cfg)?;
    write_scene(&scene, out)?;
    emit_json(&cfg, None)?;
    eprintln!(
        "wrote {} edges ({} corrupt, fraction {:.3}) to {}",
        scene.edges.len(),
        scene.corrupt_count(),
        scene.corrupt_count() as f64 / scene.edges.len().max(1) as f64,
        out.display()
    );
    Ok(())
}

fn build_graph(measurements: &[io::Measurement]) -> Result<ViewingGraphF64> {
    let n = measurements.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
    Ok(ViewingGraphF64::build(n, measurements)?)
}

fn warn_shortfall(out: &PipelineOutput<f64>) {
    if out.coverage.shortfall {
        eprintln!(
            "warning: coverage target {} not reached; achieved {:.4}",
            out.coverage.target, out.coverage.achieved
        );
    }
    if !out.coverage.missing.is_empty() {
        eprintln!("note: {} camera(s) without an estimate", out.coverage.missing.len());
    }
}

/// Errors over the estimated node set (the selected component).
fn evaluate(out: &PipelineOutput<f64>, gt: &PointSet) -> Result<ErrorReport> {
    let est = out.point_set();
    let nodes: Vec<usize> = est.keys().copied().collect();
    Ok(compute_error_report(&est, gt, Some(&nodes), Some(out.timings.total), Some(out.coverage.achieved))?)
}

fn cmd_solve(cfg: PipelineConfig) -> Result<()> {
    let path = cfg.measurements.clone().ok_or_else(|| {
        TripError::InvalidParameter("no measurement file given (--measurements or config `measurements`)".into())
    })?;
    let measurements = io::read_measurements(Path::new(&path))?;
    let g = build_graph(&measurements)?;
    let out = run_pipeline(&g, &cfg)?;
    warn_shortfall(&out);
    if let Some(p) = &cfg.locations_out {
        io::write_points(Path::new(p), &out.point_set())?;
    }
    let errors = match &cfg.ground_truth {
        Some(p) => Some(evaluate(&out, &io::read_points(Path::new(p))?)?),
        None => None,
    };
    let report_out = cfg.report_out.clone();
    let mut report = Report::new(cfg).with_output(&out);
    report.errors = errors;
    emit_json(&report, report_out.as_deref().map(Path::new))
}

fn cmd_eval(
    locations: &Path,
    ground_truth: &Path,
    nodes: Option<&Path>,
    report: Option<&Path>,
    errors_csv: Option<&Path>,
) -> Result<()> {
    let est = io::read_points(locations)?;
    let gt = io::read_points(ground_truth)?;
    let subset = nodes.map(io::read_node_set).transpose()?;
    let rep = compute_error_report(&est, &gt, subset.as_deref(), None, None)?;
    if !rep.missing.is_empty() {
        eprintln!("note: {} requested node(s) missing from one of the inputs", rep.missing.len());
    }
    if let Some(p) = errors_csv {
        let mut csv = String::from("node,error\n");
        for (v, e) in rep.nodes.iter().zip(&rep.errors) {
            csv.push_str(&format!("{v},{e:.16e}\n"));
        }
        fs::write(p, csv).map_err(|source| TripError::File { path: p.display().to_string(), source })?;
    }
    emit_json(&rep, report)
}

#[derive(Serialize)]
struct PipelineRunConfig {
    scene: SceneConfig,
    solver: PipelineConfig,
}

fn cmd_pipeline(args: &SceneArgs, cfg: PipelineConfig, out_dir: Option<&Path>, report: Option<&Path>) -> Result<()> {
    let scene_cfg = args.resolve()?;
    let t = Instant::now();
    let scene = generate_scene(&scene_cfg)?;
    let synth_seconds = t.elapsed().as_secs_f64();
    let g = scene.viewing_graph()?;
    let out = run_pipeline(&g, &cfg)?;
    warn_shortfall(&out);
    let gt: PointSet = scene.locations.iter().copied().enumerate().collect();
    if let Some(dir) = out_dir {
        write_scene(&scene, dir)?;
        io::write_points(&dir.join("locations.txt"), &out.point_set())?;
    }
    let errors = evaluate(&out, &gt)?;
    eprintln!(
        "median error {:.3e}, coverage {:.3}, solve {:.2}s (synthesis {:.2}s)",
        errors.median, out.coverage.achieved, out.timings.total, synth_seconds
    );
    let mut rep = Report::new(PipelineRunConfig { scene: scene_cfg, solver: cfg }).with_output(&out);
    rep.errors = Some(errors);
    emit_json(&rep, report)
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| anyhow!("invalid Johnson size `{v}`: {e}"));
    let (lo, hi) = if let Some((a, b)) = s.split_once("..=") {
        (parse(a)?, parse(b)?)
    } else if let Some((a, b)) = s.split_once("..") {
        (parse(a)?, parse(b)?)
    } else {
        let v = parse(s)?;
        (v, v)
    };
    if lo > hi {
        bail!("empty Johnson range `{s}`");
    }
    Ok((lo..=hi).collect())
}

#[derive(Serialize)]
struct TheoryReport {
    version: &'static str,
    johnson: Vec<JohnsonGreenLevels>,
    decay: Option<DecayTrace>,
    passed: bool,
}

fn cmd_verify_theory(
    johnson: &str,
    decay_n: usize,
    decay_corrupted: usize,
    setup: &DecaySetup,
    report: Option<&Path>,
) -> Result<()> {
    let sizes = parse_range(johnson).map_err(|e| TripError::InvalidParameter(e.to_string()))?;
    let mut failures = Vec::new();
    let mut levels = Vec::new();
    println!("{:<10} {:>6} {:>12} {:>10} {:>10} {:>8}", "check", "n", "max |dG|", "row sum", "bound", "result");
    for &n in &sizes {
        let lv = johnson_green_levels(n)?;
        let mut ok = lv.passes(1e-10);
        if n == 6 {
            let d = closed_form_differences_exact(6)[0];
            ok &= d == Rational::new(1, 180) && (lv.levels[1] - lv.levels[0] - 1.0 / 180.0).abs() <= 1e-10;
        }
        println!(
            "{:<10} {:>6} {:>12.3e} {:>10.6} {:>10.6} {:>8}",
            "johnson",
            n,
            lv.max_level_error,
            lv.abs_row_sum,
            lv.row_sum_bound,
            if ok { "pass" } else { "FAIL" }
        );
        if !ok {
            failures.push(format!("johnson n={n}"));
        }
        levels.push(lv);
    }
    let decay = if decay_n > 0 {
        let trace = exact_recovery_experiment(decay_n, &spread_corruption(decay_n, decay_corrupted), setup)?;
        let ok = trace.is_non_increasing(0.0) && trace.final_error() <= 1e-6 && trace.length_rel_error <= 1e-5;
        println!(
            "{:<10} {:>6} final E {:.3e}, length error {:.3e}, {} stages {:>8}",
            "decay",
            decay_n,
            trace.final_error(),
            trace.length_rel_error,
            trace.stages.len(),
            if ok { "pass" } else { "FAIL" }
        );
        if !ok {
            failures.push(format!("decay n={decay_n}"));
        }
        Some(trace)
    } else {
        None
    };
    let passed = failures.is_empty();
    if let Some(p) = report {
        emit_json(&TheoryReport { version: trip::VERSION, johnson: levels, decay, passed }, Some(p))?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification(failures.join(", ")).into())
    }
}
