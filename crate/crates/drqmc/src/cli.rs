//! Command-line entry points: train a problem with a chosen sampler, run
//! the variance-ratio study, run the convergence-order probe, and run the
//! oracle checks. The binary in `main.rs` is a thin wrapper around
//! [`run`]; everything here is callable from tests.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 I/O error.

use crate::check;
use crate::error::{Error, Result};
use crate::net::save_checkpoint;
use crate::optim::AdamHyper;
use crate::pde::ProblemId;
use crate::sampler::{SamplerKind, SamplerTag};
use crate::trainer::{
    self, convergence_order_probe, emit_results, variance_study, OptimizerKind, RunMetadata,
    SurrogateSpec, TrainConfig, VarianceStudyConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "drqmc",
    about = "Deep Ritz solver with MC / Sobol' / randomized-QMC sampling",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one problem with one sampler and write run artifacts.
    Train(TrainArgs),
    /// MC/RQMC gradient-covariance trace ratios over batch sizes.
    VarianceStudy(VarianceStudyArgs),
    /// Fixed-step convergence-order probe on the analytic surrogate.
    OrderProbe(OrderProbeArgs),
    /// Run the fast oracle suite and report pass/fail per check.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProblemFlag {
    /// Poisson problem (canonical dimension 20).
    Poisson20,
    /// Static Schroedinger problem (canonical dimension 20).
    Schroedinger20,
}

impl ProblemFlag {
    fn id(self) -> ProblemId {
        match self {
            ProblemFlag::Poisson20 => ProblemId::Poisson,
            ProblemFlag::Schroedinger20 => ProblemId::Schroedinger,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerFlag {
    Mc,
    Sobol,
    RqmcShift,
    RqmcScramble,
}

impl SamplerFlag {
    fn tag(self) -> SamplerTag {
        match self {
            SamplerFlag::Mc => SamplerTag::Mc,
            SamplerFlag::Sobol => SamplerTag::QmcSobol,
            SamplerFlag::RqmcShift => SamplerTag::RqmcShift,
            SamplerFlag::RqmcScramble => SamplerTag::RqmcScramble,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerFlag {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Which PDE problem to solve.
    #[arg(long, value_enum, default_value = "schroedinger20")]
    pub problem: ProblemFlag,
    /// Override the problem dimension (desk-scale default 5; 20 with --full).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum, default_value = "sobol")]
    pub sampler: SamplerFlag,
    /// Randomization seed (MC and RQMC kinds).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mini-batch exponent; the batch size is 2^tau.
    #[arg(long, default_value_t = 5)]
    pub tau: u32,
    /// Iteration count (desk-scale default 2000; 10000 with --full).
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerFlag,
    /// Learning rate (Adam) or fixed stepsize (SGD).
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Clamp parameters to this l-infinity radius after every step.
    #[arg(long)]
    pub project_btheta: Option<f64>,
    /// Initialization seed.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Relative-L2 reporting cadence (0 disables).
    #[arg(long, default_value_t = 100)]
    pub eval_every: u64,
    /// Covariance-probe cadence (0 disables).
    #[arg(long, default_value_t = 0)]
    pub cov_every: u64,
    /// Replicates per covariance probe.
    #[arg(long, default_value_t = 16)]
    pub replicates: usize,
    /// Full-scale settings: d = 20, tau = 7, 10000 iterations.
    #[arg(long)]
    pub full: bool,
    /// Output directory for records.csv, run.json and params.json.
    #[arg(long)]
    pub out: PathBuf,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        let dim = self.dim.unwrap_or(if self.full { 20 } else { 5 });
        let mut c = TrainConfig::new(
            self.problem.id(),
            dim,
            SamplerKind::new(self.sampler.tag(), self.seed),
        );
        c.tau = if self.full && self.tau == 5 { 7 } else { self.tau };
        c.iterations = self.iters.unwrap_or(if self.full { 10_000 } else { 2000 });
        c.optimizer = match self.optimizer {
            OptimizerFlag::Adam => OptimizerKind::Adam(AdamHyper { lr: self.lr, ..Default::default() }),
            OptimizerFlag::Sgd => OptimizerKind::Sgd { alpha: self.lr },
        };
        c.project_btheta = self.project_btheta;
        c.init_seed = self.init_seed;
        c.eval_every = self.eval_every;
        c.cov_every = self.cov_every;
        c.cov_replicates = self.replicates;
        c
    }
}

#[derive(Debug, Args)]
pub struct VarianceStudyArgs {
    /// Problem dimension (20 with --full).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Iterations per training run.
    #[arg(long)]
    pub iters: Option<u64>,
    /// Probe cadence in iterations.
    #[arg(long, default_value_t = 500)]
    pub cov_every: u64,
    /// Replicates per probe.
    #[arg(long, default_value_t = 16)]
    pub replicates: usize,
    /// Randomized QMC kind for the denominator.
    #[arg(long, value_enum, default_value = "rqmc-shift")]
    pub rqmc: SamplerFlag,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Full-scale settings: d = 20, 10000 iterations.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OrderProbeArgs {
    /// Fixed SGD stepsize on the surrogate.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Smallest batch exponent in the n grid.
    #[arg(long, default_value_t = 4)]
    pub tau_min: u32,
    /// Largest batch exponent in the n grid.
    #[arg(long, default_value_t = 12)]
    pub tau_max: u32,
    /// Surrogate SGD steps per grid point.
    #[arg(long, default_value_t = 50_000)]
    pub steps: u64,
    /// Seeds averaged for the MC sampler.
    #[arg(long, default_value_t = 8)]
    pub mc_seeds: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Restrict to one check group: gradients, pde, sobol, or sampler.
    #[arg(long)]
    pub only: Option<String>,
}

/// Dispatch a parsed command. Returns the process exit code.
pub fn run(cli: &Cli, mut out: impl Write) -> Result<()> {
    match &cli.command {
        Command::Train(args) => run_train(args, &mut out),
        Command::VarianceStudy(args) => run_variance_study(args, &mut out),
        Command::OrderProbe(args) => run_order_probe(args, &mut out),
        Command::Check(args) => run_check(args, &mut out),
    }
}

pub fn run_train(args: &TrainArgs, out: &mut impl Write) -> Result<()> {
    let config = args.config();
    let result = trainer::train(&config)?;
    emit_results(&result.records, &RunMetadata::for_config(&config), &args.out)?;
    save_checkpoint(&result.params, &args.out.join("params.json"))?;

    let last = result.records.last().expect("at least one iteration");
    writeln!(out, "problem:   {} (d = {})", config.problem.as_str(), config.dim)?;
    writeln!(out, "sampler:   {} (seed {})", config.sampler.tag.as_str(), config.sampler.seed)?;
    writeln!(out, "final loss:   {:.6e}", last.loss)?;
    if let Some(err) = last.rel_l2 {
        writeln!(out, "final rel_l2: {err:.6e}")?;
    }
    writeln!(out, "artifacts: {}", args.out.display())?;
    Ok(())
}

pub fn run_variance_study(args: &VarianceStudyArgs, out: &mut impl Write) -> Result<()> {
    let mut cfg = VarianceStudyConfig::desk_scale();
    cfg.dim = args.dim.unwrap_or(if args.full { 20 } else { 5 });
    cfg.iterations = args.iters.unwrap_or(if args.full { 10_000 } else { 2000 });
    cfg.cov_every = args.cov_every;
    cfg.replicates = args.replicates;
    cfg.rqmc_tag = args.rqmc.tag();
    cfg.seed = args.seed;
    cfg.init_seed = args.init_seed;

    let cells = variance_study(&cfg)?;
    write_variance_csv(&cells, &args.out)?;

    writeln!(out, "average MC/RQMC trace ratio over the run")?;
    write!(out, "{:<14}", "problem")?;
    for &tau in &cfg.taus {
        write!(out, "{:>12}", format!("n={}", 1u64 << tau))?;
    }
    writeln!(out)?;
    for &problem in &cfg.problems {
        write!(out, "{:<14}", problem.as_str())?;
        for cell in cells.iter().filter(|c| c.problem == problem) {
            write!(out, "{:>12.1}", cell.avg_ratio)?;
        }
        writeln!(out)?;
    }
    writeln!(out, "artifacts: {}", args.out.display())?;
    Ok(())
}

fn write_variance_csv(cells: &[trainer::VarianceStudyCell], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("variance_study.csv"))?);
    writeln!(f, "problem,n,mc_trace_mean,rqmc_trace_mean,avg_ratio")?;
    for c in cells {
        writeln!(
            f,
            "{},{},{},{},{}",
            c.problem.as_str(),
            c.n,
            c.mc_trace_mean,
            c.rqmc_trace_mean,
            c.avg_ratio
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn run_order_probe(args: &OrderProbeArgs, out: &mut impl Write) -> Result<()> {
    if args.tau_min >= args.tau_max {
        return Err(Error::Config("tau-min must be below tau-max".into()));
    }
    let mut spec = SurrogateSpec::default_sine();
    spec.alpha = args.alpha;
    spec.tau_grid = (args.tau_min..=args.tau_max).collect();
    spec.steps = args.steps;
    spec.mc_seeds = args.mc_seeds;
    let result = convergence_order_probe(&spec)?;

    std::fs::create_dir_all(&args.out)?;
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(args.out.join("order_probe.csv"))?);
    writeln!(f, "sampler,n,gap,slope")?;
    for (tag, n, gap) in &result.gaps {
        let slope = result
            .slopes
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, s)| *s)
            .expect("slope per sampler");
        writeln!(f, "{},{n},{gap},{slope}", tag.as_str())?;
    }
    f.flush()?;

    for (tag, slope) in &result.slopes {
        writeln!(out, "{:<12} slope {:+.3}", tag.as_str(), slope)?;
    }
    writeln!(out, "artifacts: {}", args.out.display())?;
    Ok(())
}

pub fn run_check(args: &CheckArgs, out: &mut impl Write) -> Result<()> {
    if let Some(only) = &args.only {
        if !["gradients", "pde", "sobol", "sampler"].contains(&only.as_str()) {
            return Err(Error::Config(format!(
                "unknown check group `{only}` (expected gradients|pde|sobol|sampler)"
            )));
        }
    }
    let reports = check::run_checks(args.only.as_deref())?;
    let mut failed = 0usize;
    for r in &reports {
        writeln!(out, "{} {:<32} {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.detail)?;
        if !r.passed {
            failed += 1;
        }
    }
    writeln!(out, "{} checks, {} failed", reports.len(), failed)?;
    if failed > 0 {
        return Err(Error::NonFinite(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
