//! Command-line front end.
//!
//! `trajdiff run` solves one problem from `--batch` randomized initial
//! guesses; `trajdiff sweep-mu` reruns one initial guess over several
//! penalty coefficients. Both write CSV traces and a `summary.json`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{bfgs_penalty_with_layout, gradient_descent_cdo_with_layout, BaselineConfig};
use crate::error::Error;
use crate::io::{write_snapshots_csv, write_sweep_csv, write_trace_csv, SolutionSummary};
use crate::nlp::NlpProblem;
use crate::problems::{Problem, ProblemKind};
use crate::solver::{guess_rng, solve_batch_with, solve_with_layout, BatchResult, Solution, SolveError, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHAIN_FAILED: i32 = 2;

pub const SOLVER_NAMES: [&str; 3] = ["diffusion", "gd", "bfgs"];

const TIMING_NOTE: &str = "wall-clock times depend on hardware and thread count";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Diffusion,
    Gd,
    Bfgs,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Diffusion => "diffusion",
            SolverKind::Gd => "gd",
            SolverKind::Bfgs => "bfgs",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "diffusion" => Ok(SolverKind::Diffusion),
            "gd" => Ok(SolverKind::Gd),
            "bfgs" => Ok(SolverKind::Bfgs),
            _ => Err(Error::UnknownName {
                kind: "solver",
                name: s.to_string(),
                valid: SOLVER_NAMES.join(", "),
            }),
        }
    }
}

/// Contents of a `--config` JSON file. Every field is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: String,
    pub solver: String,
    pub batch: usize,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub diffusion: SolverConfig,
    pub baseline: BaselineConfig,
    pub mus: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "pendulum".into(),
            solver: "diffusion".into(),
            batch: 1,
            threads: None,
            out: PathBuf::from("out"),
            diffusion: SolverConfig::default(),
            baseline: BaselineConfig::default(),
            mus: Vec::new(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trajdiff", version, about = "Trajectory optimization by constrained Langevin diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem from one or more randomized initial guesses.
    Run(CommonArgs),
    /// Solve one initial guess for each penalty coefficient in `--mus`.
    #[command(name = "sweep-mu", alias = "sweep_mu")]
    SweepMu {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated penalty coefficients.
        #[arg(long, value_delimiter = ',')]
        mus: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// pendulum | bugtrap | toy_kkt
    #[arg(long)]
    pub problem: Option<String>,
    /// diffusion | gd | bfgs
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub barrier: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Snapshot stride (0 disables snapshots).
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Merges the optional config file with flag overrides (flags win).
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            serde_json::from_str(&text).map_err(|source| CliError::Json {
                path: path.clone(),
                source,
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(s) = &args.solver {
        cfg.solver = s.clone();
    }
    if let Some(mu) = args.mu {
        cfg.diffusion.mu = mu;
        cfg.baseline.mu = mu;
    }
    if let Some(alpha) = args.alpha {
        cfg.diffusion.alpha = alpha;
        cfg.baseline.alpha = alpha;
    }
    if let Some(s) = args.sigma0 {
        cfg.diffusion.sigma0 = s;
    }
    if let Some(n) = args.iters {
        cfg.diffusion.iterations = n;
        cfg.baseline.iterations = n;
    }
    if let Some(b) = args.barrier {
        cfg.diffusion.barrier_weight = b;
        cfg.baseline.barrier_weight = b;
    }
    match args.gamma {
        Some(g) => cfg.diffusion.gamma = g,
        None if args.iters.is_some() || args.sigma0.is_some() => {
            cfg.diffusion = cfg.diffusion.clone().reanneal();
        }
        None => {}
    }
    if let Some(b) = args.batch {
        cfg.batch = b;
    }
    if let Some(seed) = args.seed {
        cfg.diffusion.seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(stride) = args.stride {
        cfg.diffusion.snapshot_stride = stride;
        cfg.baseline.snapshot_stride = stride;
    }
    if cfg.batch == 0 {
        return Err(CliError::Usage("batch size must be at least 1".into()));
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Usage("thread count must be at least 1".into()));
    }
    Ok(cfg)
}

struct Plan {
    problem: Problem,
    solver: SolverKind,
    cfg: RunConfig,
}

impl Plan {
    fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let kind: ProblemKind = cfg.problem.parse()?;
        let solver: SolverKind = cfg.solver.parse()?;
        match solver {
            SolverKind::Diffusion => cfg.diffusion.validate()?,
            SolverKind::Gd | SolverKind::Bfgs => cfg.baseline.validate()?,
        }
        Ok(Plan {
            problem: kind.build()?,
            solver,
            cfg,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.diffusion.seed
    }

    fn initial_guess(&self, chain: usize) -> Vec<f64> {
        let mut rng = guess_rng(self.seed().wrapping_add(chain as u64));
        self.problem.initial_guess(&mut rng)
    }

    /// Chain `chain` of this plan with penalty `mu`.
    fn run_chain(&self, chain: usize, x0: &[f64], mu: f64) -> Result<Solution, SolveError> {
        let nlp = &self.problem;
        let layout = nlp.layout();
        let lambda0 = vec![0.0; nlp.num_constraints()];
        match self.solver {
            SolverKind::Diffusion => {
                let mut c = self.cfg.diffusion.clone();
                c.seed = self.seed().wrapping_add(chain as u64);
                c.mu = mu;
                solve_with_layout(nlp, x0, &lambda0, &c, layout)
            }
            SolverKind::Gd => {
                let c = BaselineConfig {
                    mu,
                    ..self.cfg.baseline.clone()
                };
                gradient_descent_cdo_with_layout(nlp, x0, &lambda0, &c, layout)
            }
            SolverKind::Bfgs => {
                let c = BaselineConfig {
                    mu,
                    ..self.cfg.baseline.clone()
                };
                bfgs_penalty_with_layout(nlp, x0, &c, layout)
            }
        }
    }

    fn mu(&self) -> f64 {
        match self.solver {
            SolverKind::Diffusion => self.cfg.diffusion.mu,
            _ => self.cfg.baseline.mu,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainSummary {
    pub index: usize,
    pub status: String,
    pub error: Option<String>,
    pub mu: f64,
    #[serde(flatten)]
    pub solution: Option<SolutionSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub problem: String,
    pub solver: String,
    pub chains: Vec<ChainSummary>,
    pub failed_chains: usize,
    pub wall_clock_ms: f64,
    pub timing_note: String,
    pub config: RunConfig,
}

fn write_file<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(BufWriter<File>) -> csv::Result<()>,
{
    let file = File::create(path).map_err(CliError::io(path))?;
    f(BufWriter::new(file)).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes per-chain files and returns the chain summaries.
fn write_chains(out: &Path, batch: &BatchResult, mus: &[f64]) -> Result<Vec<ChainSummary>, CliError> {
    let mut chains = Vec::with_capacity(batch.results.len());
    for (i, result) in batch.results.iter().enumerate() {
        let (solution, error) = match result {
            Ok(s) => (Some(s), None),
            Err(e) => (e.partial.as_deref(), Some(e.error.to_string())),
        };
        if let Some(s) = solution {
            write_file(&out.join(format!("trace_{i}.csv")), |w| write_trace_csv(&s.trace, w))?;
            write_file(&out.join(format!("snapshots_{i}.csv")), |w| write_snapshots_csv(&s.trace, w))?;
        }
        chains.push(ChainSummary {
            index: i,
            status: if error.is_none() { "ok" } else { "error" }.into(),
            error,
            mu: mus[i],
            solution: solution.map(SolutionSummary::from),
        });
    }
    Ok(chains)
}

fn write_summary(out: &Path, summary: &RunSummary) -> Result<(), CliError> {
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(summary).map_err(|source| CliError::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text).map_err(CliError::io(&path))
}

fn finish(out: &Path, command: &str, plan: Plan, batch: BatchResult, mus: &[f64]) -> Result<i32, CliError> {
    let chains = write_chains(out, &batch, mus)?;
    let failed = chains.iter().filter(|c| c.error.is_some()).count();
    let summary = RunSummary {
        command: command.into(),
        problem: plan.problem.kind().name().into(),
        solver: plan.solver.name().into(),
        chains,
        failed_chains: failed,
        wall_clock_ms: batch.wall_clock_ms(),
        timing_note: TIMING_NOTE.into(),
        config: plan.cfg,
    };
    write_summary(out, &summary)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CHAIN_FAILED })
}

/// `run`: `batch` chains with randomized initial guesses.
pub fn run(cfg: RunConfig) -> Result<i32, CliError> {
    let plan = Plan::new(cfg)?;
    let out = plan.cfg.out.clone();
    fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let x0s: Vec<Vec<f64>> = (0..plan.cfg.batch).map(|i| plan.initial_guess(i)).collect();
    let mu = plan.mu();
    let batch = solve_batch_with(&plan.problem, &x0s, plan.cfg.threads, |i, x0| plan.run_chain(i, x0, mu))?;
    let mus = vec![mu; x0s.len()];
    finish(&out, "run", plan, batch, &mus)
}

/// `sweep-mu`: chain 0's initial guess and seed, once per penalty value.
pub fn sweep_mu(cfg: RunConfig, mus: &[f64]) -> Result<i32, CliError> {
    if mus.is_empty() {
        return Err(CliError::Usage("sweep-mu needs at least one value in --mus".into()));
    }
    if let Some(bad) = mus.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(CliError::Usage(format!("penalty coefficients must be positive, got {bad}")));
    }
    let mut cfg = cfg;
    cfg.mus = mus.to_vec();
    let plan = Plan::new(cfg)?;
    let out = plan.cfg.out.clone();
    fs::create_dir_all(&out).map_err(CliError::io(&out))?;
    let x0 = plan.initial_guess(0);
    let x0s = vec![x0; mus.len()];
    let batch = solve_batch_with(&plan.problem, &x0s, plan.cfg.threads, |i, x0| plan.run_chain(0, x0, mus[i]))?;
    let runs: Vec<(f64, &crate::solver::Trace)> = batch
        .results
        .iter()
        .zip(mus)
        .filter_map(|(r, &mu)| match r {
            Ok(s) => Some((mu, &s.trace)),
            Err(e) => e.partial.as_deref().map(|s| (mu, &s.trace)),
        })
        .collect();
    write_file(&out.join("sweep.csv"), |w| write_sweep_csv(runs, w))?;
    finish(&out, "sweep-mu", plan, batch, mus)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(common) => resolve_config(common).and_then(run),
        Command::SweepMu { common, mus } => resolve_config(common).and_then(|cfg| {
            let mus = mus.clone().unwrap_or_else(|| cfg.mus.clone());
            sweep_mu(cfg, &mus)
        }),
    };
    match result {
        Ok(code) => {
            if code == EXIT_CHAIN_FAILED {
                eprintln!("trajdiff: one or more chains failed; see summary.json");
            }
            code
        }
        Err(e) => {
            eprintln!("trajdiff: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"problem": "bugtrap", "batch": 3, "diffusion": {"mu": 2.0, "iterations": 500}}"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            mu: Some(7.0),
            ..Default::default()
        };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.problem, "bugtrap");
        assert_eq!(cfg.batch, 3);
        assert_eq!(cfg.diffusion.mu, 7.0);
        assert_eq!(cfg.baseline.mu, 7.0);
        assert_eq!(cfg.diffusion.iterations, 500);
        assert_eq!(cfg.diffusion.alpha, 0.06);
    }

    #[test]
    fn iteration_override_reanneals() {
        let args = CommonArgs {
            iters: Some(1000),
            ..Default::default()
        };
        let cfg = resolve_config(&args).unwrap();
        let at = crate::solver::noise_schedule(800, &cfg.diffusion);
        assert!((at - cfg.diffusion.sigma_min).abs() < 1e-12);
        let args = CommonArgs {
            iters: Some(1000),
            gamma: Some(0.5),
            ..Default::default()
        };
        assert_eq!(resolve_config(&args).unwrap().diffusion.gamma, 0.5);
    }

    #[test]
    fn names_are_validated() {
        let cfg = RunConfig {
            solver: "newton".into(),
            ..RunConfig::default()
        };
        let err = run(cfg).err().unwrap();
        assert!(err.to_string().contains("diffusion, gd, bfgs"));
        assert!(resolve_config(&CommonArgs {
            batch: Some(0),
            ..Default::default()
        })
        .is_err());
    }
}
