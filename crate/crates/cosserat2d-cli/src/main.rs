//! Command-line front end for the planar Cosserat solvers.
//!
//! ```text
//! cosserat2d run        solve cases (network and/or reference) and write artifacts
//! cosserat2d mesh-study reference-solver mesh-independence table
//! cosserat2d certify    stability-certify an exported field grid
//! ```
//!
//! Exit codes: 0 success, 1 solver failure, 2 certification failure,
//! 3 I/O or configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cosserat2d::harness::{
    self, CaseOutcome, HarnessError, OutputFormat, RunConfig, SolverChoice,
};
use cosserat2d::network::CaseSetup;
use cosserat2d::nnsolver::OptimizerChoice;
use cosserat2d::refsolver::SolverOptions;
use cosserat2d::stability::StabilityConfig;

const EXIT_OK: u8 = 0;
const EXIT_SOLVER: u8 = 1;
const EXIT_CERTIFICATION: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cosserat2d",
    version,
    about = "Planar Cosserat (nematic elastomer) strip: variational solvers and stability certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more cases and write field grids, histories,
    /// comparisons, checkpoints, and stability reports.
    Run(RunArgs),
    /// Solve one case at several mesh resolutions and tabulate the final
    /// director-angle statistics.
    MeshStudy(MeshStudyArgs),
    /// Certify a previously exported field grid.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Initial director angle in radians, or pi/N shorthand (pi/3, pi/4,
    /// pi/6, ...). Repeatable; defaults to the three standard cases.
    #[arg(long = "phi0", value_parser = parse_angle)]
    phi0: Vec<f64>,
    /// Which solver to run: nn, ref, or both.
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,
    /// Seed of the network parameter initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Training epoch budget (warmup + finisher iterations).
    #[arg(long)]
    epochs: Option<usize>,
    /// First-order warmup epochs before the quasi-Newton finisher.
    #[arg(long)]
    adam_warmup: Option<usize>,
    /// Warmup learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Relative gradient tolerance of the finisher.
    #[arg(long)]
    gtol: Option<f64>,
    /// Training optimizer: adam or lbfgs-finisher.
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerChoice>,
    /// Warm-started load fractions of a training ramp, e.g. 0.25,0.5,0.75,1
    /// — an escape hatch for hard cases; "direct" (the default) trains at
    /// the full end displacement in one stage.
    #[arg(long, value_parser = parse_continuation)]
    continuation: Option<ContinuationArg>,
    /// Transverse element count of the reference mesh (nx = 5*ny).
    #[arg(long)]
    ny: Option<usize>,
    /// Load increments of the reference ramp.
    #[arg(long)]
    increments: Option<usize>,
    /// Evaluation-grid resolution (points along X).
    #[arg(long)]
    sample_nx: Option<usize>,
    /// Evaluation-grid resolution (points along Y).
    #[arg(long)]
    sample_ny: Option<usize>,
    /// Output directory (default "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field-grid file format: csv, json, or both.
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Run everything serially (results are bitwise identical either way).
    #[arg(long)]
    deterministic: bool,
    /// Key=value configuration file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct MeshStudyArgs {
    /// Case angle (radians or pi/N shorthand).
    #[arg(long = "phi0", value_parser = parse_angle)]
    phi0: Option<f64>,
    /// Transverse element counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 15, 20])]
    ny: Vec<usize>,
    /// Load increments of the ramp.
    #[arg(long, default_value_t = 300)]
    increments: usize,
    /// Output directory (default "out").
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run everything serially.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct CertifyArgs {
    /// Field-grid file (.csv or .json) to certify.
    #[arg(long)]
    input: PathBuf,
    /// Reference director angle of the material (radians or pi/N).
    #[arg(long = "phi0", value_parser = parse_angle)]
    phi0: f64,
    /// Violation threshold of the scanned quadratic forms.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Run the sweep serially.
    #[arg(long)]
    deterministic: bool,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("pi") {
        return Ok(std::f64::consts::PI);
    }
    if let Some(rest) = t.strip_prefix("pi/") {
        let denom: f64 = rest
            .trim()
            .parse()
            .map_err(|_| format!("bad angle {s:?} (expected radians or pi/N)"))?;
        if denom == 0.0 || !denom.is_finite() {
            return Err(format!("bad angle denominator in {s:?}"));
        }
        return Ok(std::f64::consts::PI / denom);
    }
    t.parse()
        .map_err(|_| format!("bad angle {s:?} (expected radians or pi/N)"))
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    s.parse()
}

/// A training load ramp: `None` requests direct training at the full end
/// displacement, `Some(fracs)` the warm-started stages. Fraction sanity
/// (increasing, ending at 1) is checked by the training configuration.
#[derive(Clone, Debug)]
struct ContinuationArg(Option<Vec<f64>>);

fn parse_continuation(s: &str) -> Result<ContinuationArg, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("direct") || t.eq_ignore_ascii_case("none") {
        return Ok(ContinuationArg(None));
    }
    let mut fracs = Vec::new();
    for part in t.split(',') {
        fracs.push(
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad continuation fraction {part:?}"))?,
        );
    }
    Ok(ContinuationArg(Some(fracs)))
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn parse_optimizer(s: &str) -> Result<OptimizerChoice, String> {
    s.parse()
}

/// Settings a key=value config file may provide; flags take precedence.
#[derive(Clone, Debug, Default)]
struct FileSettings {
    phi0: Option<Vec<f64>>,
    solver: Option<SolverChoice>,
    seed: Option<u64>,
    epochs: Option<usize>,
    adam_warmup: Option<usize>,
    learning_rate: Option<f64>,
    gtol: Option<f64>,
    optimizer: Option<OptimizerChoice>,
    continuation: Option<ContinuationArg>,
    lbfgs_memory: Option<usize>,
    ny: Option<usize>,
    increments: Option<usize>,
    sample_nx: Option<usize>,
    sample_ny: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    deterministic: Option<bool>,
}

fn parse_config_file(path: &PathBuf) -> Result<FileSettings, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut out = FileSettings::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let at = |e: String| format!("config line {}: {e}", lineno + 1);
        let bad = |what: &str| format!("config line {}: bad {what} value {value:?}", lineno + 1);
        match key {
            "phi0" => {
                let mut angles = Vec::new();
                for part in value.split(',') {
                    angles.push(parse_angle(part).map_err(at)?);
                }
                out.phi0 = Some(angles);
            }
            "solver" => out.solver = Some(parse_solver(value).map_err(at)?),
            "seed" => out.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "epochs" => out.epochs = Some(value.parse().map_err(|_| bad("epochs"))?),
            "adam_warmup" => {
                out.adam_warmup = Some(value.parse().map_err(|_| bad("adam_warmup"))?)
            }
            "learning_rate" => {
                out.learning_rate = Some(value.parse().map_err(|_| bad("learning_rate"))?)
            }
            "gtol" => out.gtol = Some(value.parse().map_err(|_| bad("gtol"))?),
            "optimizer" => out.optimizer = Some(parse_optimizer(value).map_err(at)?),
            "continuation" => {
                out.continuation = Some(parse_continuation(value).map_err(at)?)
            }
            "lbfgs_memory" => {
                out.lbfgs_memory = Some(value.parse().map_err(|_| bad("lbfgs_memory"))?)
            }
            "ny" => out.ny = Some(value.parse().map_err(|_| bad("ny"))?),
            "increments" => out.increments = Some(value.parse().map_err(|_| bad("increments"))?),
            "sample_nx" => out.sample_nx = Some(value.parse().map_err(|_| bad("sample_nx"))?),
            "sample_ny" => out.sample_ny = Some(value.parse().map_err(|_| bad("sample_ny"))?),
            "out" => out.out = Some(PathBuf::from(value)),
            "format" => out.format = Some(parse_format(value).map_err(at)?),
            "deterministic" => {
                out.deterministic = Some(value.parse().map_err(|_| bad("deterministic"))?)
            }
            other => return Err(format!("config line {}: unknown key {other:?}", lineno + 1)),
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (code, message) = match cli.command {
        Command::Run(args) => run(args),
        Command::MeshStudy(args) => mesh_study(args),
        Command::Certify(args) => certify(args),
    };
    if let Some(msg) = message {
        eprintln!("error: {msg}");
    }
    ExitCode::from(code)
}

/// Exit code for a harness error in a solver-run context.
fn run_exit(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Train(_) | HarnessError::Solve(_) | HarnessError::Network(_) => EXIT_SOLVER,
        HarnessError::Stability(_) => EXIT_CERTIFICATION,
        HarnessError::Field(_) | HarnessError::Io(_) | HarnessError::Config(_) => EXIT_USAGE,
    }
}

fn run(args: RunArgs) -> (u8, Option<String>) {
    let file = match &args.config {
        Some(path) => match parse_config_file(path) {
            Ok(f) => f,
            Err(msg) => return (EXIT_USAGE, Some(msg)),
        },
        None => FileSettings::default(),
    };

    let standard_cases = [
        std::f64::consts::FRAC_PI_3,
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_6,
    ];
    let angles: Vec<f64> = if !args.phi0.is_empty() {
        args.phi0.clone()
    } else if let Some(list) = &file.phi0 {
        list.clone()
    } else {
        standard_cases.to_vec()
    };
    let out_dir = args
        .out
        .clone()
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let deterministic = args.deterministic || file.deterministic.unwrap_or(false);

    let mut certification_failed = false;
    for phi0 in angles {
        let mut cfg = RunConfig::for_case(CaseSetup::stretched_strip(phi0));
        if let Some(v) = args.solver.or(file.solver) {
            cfg.solver = v;
        }
        if let Some(v) = args.seed.or(file.seed) {
            cfg.train.seed = v;
        }
        if let Some(v) = args.epochs.or(file.epochs) {
            cfg.train.epochs = v;
        }
        if let Some(v) = args.adam_warmup.or(file.adam_warmup) {
            cfg.train.adam_warmup = v;
        }
        if let Some(v) = args.learning_rate.or(file.learning_rate) {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = args.gtol.or(file.gtol) {
            cfg.train.gtol = v;
        }
        if let Some(v) = args.optimizer.or(file.optimizer) {
            cfg.train.optimizer = v;
        }
        if let Some(v) = args.continuation.clone().or(file.continuation.clone()) {
            cfg.train.continuation = v.0;
        }
        if let Some(v) = file.lbfgs_memory {
            cfg.train.lbfgs_memory = v;
        }
        if let Some(v) = args.ny.or(file.ny) {
            cfg.ny = v;
        }
        if let Some(v) = args.increments.or(file.increments) {
            cfg.increments = v;
        }
        if let Some(v) = args.sample_nx.or(file.sample_nx) {
            cfg.sample_nx = v;
        }
        if let Some(v) = args.sample_ny.or(file.sample_ny) {
            cfg.sample_ny = v;
        }
        if let Some(v) = args.format.or(file.format) {
            cfg.format = v;
        }
        if deterministic {
            cfg.set_parallel(false);
        }

        println!(
            "case {}: phi0 = {:.12} rad, solver = {}",
            harness::case_label(phi0),
            phi0,
            match cfg.solver {
                SolverChoice::Nn => "nn",
                SolverChoice::Ref => "ref",
                SolverChoice::Both => "both",
            }
        );
        match harness::run_case(&cfg, &out_dir) {
            Ok(outcome) => {
                print_outcome(&outcome, &out_dir);
                if !outcome.certified() {
                    certification_failed = true;
                }
            }
            Err(e) => return (run_exit(&e), Some(e.to_string())),
        }
    }
    if certification_failed {
        (EXIT_CERTIFICATION, Some("stability certification failed".into()))
    } else {
        (EXIT_OK, None)
    }
}

fn print_outcome(outcome: &CaseOutcome, out_dir: &std::path::Path) {
    let label = &outcome.label;
    if let Some(r) = &outcome.reference {
        println!(
            "case {label}: reference energy {:.6e} after {} increments ({:.1} s)",
            r.final_energy, r.increments, r.seconds
        );
    }
    if let Some(n) = &outcome.nn {
        println!(
            "case {label}: network loss {:.6e}, |grad| {:.2e}, {} ({:.1} s)",
            n.final_loss,
            n.grad_inf_norm,
            if n.converged { "converged" } else { "budget exhausted" },
            n.seconds
        );
    }
    if let Some(c) = &outcome.comparison {
        let denom = c.energy_ref.abs().max(1e-12);
        println!(
            "case {label}: energy mismatch {:.2}%, rel-L2 u_x {:.2}% u_y {:.2}%, max |dphi| {:.4} rad",
            100.0 * (c.energy_nn - c.energy_ref).abs() / denom,
            100.0 * c.u_x.rel_l2,
            100.0 * c.u_y.rel_l2,
            c.phi.max_abs
        );
    }
    for (tag, report) in [("nn", &outcome.stability_nn), ("ref", &outcome.stability_ref)] {
        if let Some(r) = report {
            println!(
                "case {label}: certification {tag} {} ({} points, {} violations)",
                if r.passed { "PASS" } else { "FAIL" },
                r.n_points,
                r.violations.len()
            );
        }
    }
    println!(
        "case {label}: wrote {} artifacts to {}",
        outcome.files.len(),
        out_dir.display()
    );
}

fn mesh_study(args: MeshStudyArgs) -> (u8, Option<String>) {
    let phi0 = args.phi0.unwrap_or(std::f64::consts::FRAC_PI_3);
    let case = CaseSetup::stretched_strip(phi0);
    let opts = SolverOptions {
        parallel: !args.deterministic,
        ..SolverOptions::default()
    };
    match harness::run_mesh_study(&case, &args.ny, args.increments, &opts, &args.out) {
        Ok(outcome) => {
            println!("ny   nx    phi_min          phi_mean         phi_max");
            for row in &outcome.rows {
                println!(
                    "{:<4} {:<5} {:<16.12} {:<16.12} {:<16.12}",
                    row.ny, row.nx, row.phi_min, row.phi_mean, row.phi_max
                );
            }
            let spread = |get: fn(&cosserat2d::refsolver::MeshStudyRow) -> f64| -> f64 {
                let values: Vec<f64> = outcome.rows.iter().map(get).collect();
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                max - min
            };
            println!(
                "spread across rows: min {:.3e}, mean {:.3e}, max {:.3e} rad",
                spread(|r| r.phi_min),
                spread(|r| r.phi_mean),
                spread(|r| r.phi_max)
            );
            println!("table: {}", outcome.table_path.display());
            (EXIT_OK, None)
        }
        Err(e) => match &e {
            HarnessError::Solve(_) => (EXIT_SOLVER, Some(e.to_string())),
            _ => (EXIT_USAGE, Some(e.to_string())),
        },
    }
}

fn certify(args: CertifyArgs) -> (u8, Option<String>) {
    let mut cfg = StabilityConfig::default();
    if let Some(tol) = args.tolerance {
        cfg.tolerance = tol;
    }
    cfg.parallel = !args.deterministic;
    match harness::certify_grid_file(&args.input, args.phi0, &cfg) {
        Ok(report) => {
            println!("field: {} points", report.n_points);
            if let Some(m) = &report.min_lh {
                println!(
                    "ellipticity minimum {:.6e} at point {} (s = ({:.3}, {:.3}), b = {:.3}, T = ({:.3}, {:.3}))",
                    m.value, m.point, m.s.x, m.s.y, m.b, m.t.x, m.t.y
                );
            }
            if let Some(m) = &report.min_rank_one {
                println!(
                    "rank-one residual minimum {:.6e} at point {} (|a| = {:.3})",
                    m.value,
                    m.point,
                    m.a.norm()
                );
            }
            if report.skipped_rank_one > 0 {
                println!(
                    "rank-one probes skipped (would leave the admissible range): {}",
                    report.skipped_rank_one
                );
            }
            println!("violations: {}", report.violations.len());
            if report.passed {
                println!("certification: PASS");
                (EXIT_OK, None)
            } else {
                println!("certification: FAIL");
                (EXIT_CERTIFICATION, None)
            }
        }
        Err(e) => match &e {
            HarnessError::Stability(_) => (EXIT_CERTIFICATION, Some(e.to_string())),
            _ => (EXIT_USAGE, Some(e.to_string())),
        },
    }
}
