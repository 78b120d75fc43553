use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rwre_cli::commands::{self, combine, Output};
use rwre_cli::config::{BoundSpec, Command, ProcessKind, RunConfig, Suite};
use rwre_cli::suite::{self, CriterionResult, Oracles};
use rwre_core::corrector::CorrectorVariant;
use rwre_core::diffusion::BoundDirection;
use rwre_core::{Threads, Verdict};

/// Random walks, jump processes and diffusions in 1-D random media.
///
/// Exit status: 0 success or PASS, 1 usage or runtime error, 2 FAIL,
/// 3 INCONCLUSIVE.
#[derive(Parser)]
#[command(name = "rwre", version)]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores). Results do
    /// not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// E(X_n^2)/n of the discrete-time walk (exact evolution, then Monte Carlo).
    SimulateWalk(WalkArgs),
    /// E(X_t^2)/t of the continuous-time jump process.
    SimulateCtmc(CtmcArgs),
    /// Euler-Maruyama ensemble of the diffusion, with optional bound checks.
    SimulateDiffusion(DiffusionArgs),
    /// Build a corrector table and check its defining equation.
    Corrector(CorrectorArgs),
    /// Theoretical variance limit from closed forms or ergodic averages.
    EstimateLimit(EstimateArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct Common {
    /// Environment, e.g. iid-two-point:1,2,0.5, rotation:0.618,2,1,0,
    /// flow:2,0,1/1,0,0, or a JSON object with a "family" key.
    #[arg(long)]
    env: Option<String>,
    /// Seed of the medium (default: --seed).
    #[arg(long)]
    env_seed: Option<u64>,
    /// Master seed of the Monte Carlo streams (default 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and CSV tables (default: JSON to stdout).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn config(self) -> RunConfig {
        RunConfig {
            env: self.env,
            env_seed: self.env_seed,
            seed: self.seed,
            out: self.out,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct WalkArgs {
    #[command(flatten)]
    common: Common,
    /// Multiply every conductance by this factor.
    #[arg(long)]
    env_scale: Option<f64>,
    /// Step counts n, comma separated.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<u64>>,
    /// Evolve every n exactly.
    #[arg(long)]
    exact: bool,
    /// Largest n evolved exactly; larger n are sampled.
    #[arg(long)]
    exact_limit: Option<u64>,
    /// Monte Carlo walks.
    #[arg(long)]
    streams: Option<usize>,
    /// Judge the curve against its limit at this relative tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct CtmcArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    env_scale: Option<f64>,
    /// Times t, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    streams: Option<usize>,
    /// Abort when a visited site has total jump rate above this.
    #[arg(long)]
    max_rate: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Upper,
    Lower,
}

impl From<Direction> for BoundDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Upper => BoundDirection::Upper,
            Direction::Lower => BoundDirection::Lower,
        }
    }
}

#[derive(Args)]
struct DiffusionArgs {
    #[command(flatten)]
    common: Common,
    /// Euler-Maruyama step.
    #[arg(long)]
    dt: Option<f64>,
    /// Times t, comma separated; each must be a multiple of dt.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    streams: Option<usize>,
    /// Check E(X_t^2) against sigma0^2 t for this declared sigma0^2.
    #[arg(long, value_name = "SIGMA0SQ")]
    check_bound: Option<f64>,
    /// Direction of the declared bound.
    #[arg(long, value_enum, default_value_t = Direction::Upper)]
    bound_direction: Direction,
    /// Check E f(X_t) = t with the continuous corrector f.
    #[arg(long)]
    check_drift: bool,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    /// (P - I) f = 1 for the walk.
    P,
    /// L f = 1 for the jump process.
    L,
    /// (2 gamma)^-1 (lambda f')' = 1 for the diffusion.
    Continuous,
}

#[derive(Args)]
struct CorrectorArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long)]
    env_scale: Option<f64>,
    /// Discrete table on [-M, M].
    #[arg(long, value_name = "M")]
    range: Option<u64>,
    /// Continuous table on [-X, X].
    #[arg(long, value_name = "X")]
    reach: Option<f64>,
    /// Quadrature step of the continuous table.
    #[arg(long)]
    grid: Option<f64>,
    /// Check the equation on |k| <= K (or |x| <= K).
    #[arg(long, value_name = "K")]
    residual_range: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    process: Option<ProcessKind>,
    #[arg(long)]
    env_scale: Option<f64>,
    /// Average the medium over this many samples instead of using closed forms.
    #[arg(long, value_name = "N")]
    birkhoff: Option<usize>,
    /// Also simulate the walk at these n and judge convergence.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<u64>>,
    /// Also simulate the jump process or diffusion at these t.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    exact_limit: Option<u64>,
    #[arg(long)]
    streams: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    /// Run only these criteria of the full suite.
    #[arg(long, value_delimiter = ',')]
    criterion: Vec<u8>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn flags(command: Cmd) -> (RunConfig, Vec<u8>) {
    let mut only = Vec::new();
    let config = match command {
        Cmd::SimulateWalk(a) => RunConfig {
            command: Some(Command::SimulateWalk),
            env_scale: a.env_scale,
            exact_limit: if a.exact { Some(u64::MAX) } else { a.exact_limit },
            steps: a.steps,
            streams: a.streams,
            tolerance: a.tolerance,
            ..a.common.config()
        },
        Cmd::SimulateCtmc(a) => RunConfig {
            command: Some(Command::SimulateCtmc),
            env_scale: a.env_scale,
            horizons: a.horizons,
            streams: a.streams,
            max_rate: a.max_rate,
            tolerance: a.tolerance,
            ..a.common.config()
        },
        Cmd::SimulateDiffusion(a) => RunConfig {
            command: Some(Command::SimulateDiffusion),
            dt: a.dt,
            horizons: a.horizons,
            streams: a.streams,
            check_bound: a.check_bound.map(|sigma0sq| BoundSpec {
                sigma0sq,
                direction: a.bound_direction.into(),
            }),
            check_drift: a.check_drift.then_some(true),
            tolerance: a.tolerance,
            ..a.common.config()
        },
        Cmd::Corrector(a) => RunConfig {
            command: Some(Command::Corrector),
            variant: a.variant.map(|v| match v {
                Variant::P => CorrectorVariant::DiscreteP,
                Variant::L => CorrectorVariant::DiscreteL,
                Variant::Continuous => CorrectorVariant::Continuous,
            }),
            env_scale: a.env_scale,
            range: a.range,
            reach: a.reach,
            grid: a.grid,
            residual_range: a.residual_range,
            ..a.common.config()
        },
        Cmd::EstimateLimit(a) => RunConfig {
            command: Some(Command::EstimateLimit),
            process: a.process,
            env_scale: a.env_scale,
            birkhoff: a.birkhoff,
            steps: a.steps,
            horizons: a.horizons,
            exact_limit: a.exact_limit,
            streams: a.streams,
            dt: a.dt,
            tolerance: a.tolerance,
            ..a.common.config()
        },
        Cmd::Verify(a) => {
            only = a.criterion;
            RunConfig {
                command: Some(Command::Verify),
                suite: a.suite,
                out: a.out,
                ..RunConfig::default()
            }
        }
    };
    (config, only)
}

fn write_output(output: &Output, out: Option<&Path>) -> Result<()> {
    let report = serde_json::to_string_pretty(&output.report)? + "\n";
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            std::fs::write(dir.join("report.json"), &report)?;
            for (name, contents) in &output.tables {
                std::fs::write(dir.join(name), contents)?;
            }
            let mut names = vec!["report.json"];
            names.extend(output.tables.iter().map(|(n, _)| *n));
            println!("wrote {} to {}", names.join(", "), dir.display());
            if let Some(v) = output.verdict {
                println!("verdict: {}", v.label());
            }
        }
        None => print!("{report}"),
    }
    Ok(())
}

fn exit_code(verdict: Option<Verdict>) -> ExitCode {
    match verdict {
        Some(Verdict::Fail) => ExitCode::from(2),
        Some(Verdict::Inconclusive) => ExitCode::from(3),
        _ => ExitCode::SUCCESS,
    }
}

fn verify(config: &RunConfig, threads: Threads, only: &[u8]) -> Result<Option<Verdict>> {
    let print = |r: &CriterionResult| println!("{}", r.line());
    let results = match config.suite.unwrap_or(Suite::Trivial) {
        Suite::Trivial => {
            let results = suite::run_trivial(threads);
            results.iter().for_each(print);
            results
        }
        Suite::Full => {
            let binary = std::env::current_exe().context("cannot locate the rwre binary")?;
            let scratch = std::env::temp_dir().join(format!("rwre-verify-{}", std::process::id()));
            let results = suite::run_full(
                &Oracles::closed_form(),
                threads,
                &binary,
                &scratch,
                only,
                &mut |r| print(r),
            );
            let _ = std::fs::remove_dir_all(&scratch);
            results
        }
    };
    let verdict = combine(results.iter().map(|r| r.verdict));
    if let Some(dir) = &config.out {
        std::fs::create_dir_all(dir)?;
        let report = serde_json::json!({ "config": config, "criteria": results, "verdict": verdict });
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
    }
    println!("overall: {}", verdict.label());
    Ok(Some(verdict))
}

fn run(cli: Cli) -> Result<Option<Verdict>> {
    let threads = Threads::from_option(cli.threads);
    let (flags, only) = flags(cli.command);
    let config = match &cli.config {
        Some(path) => flags.over(RunConfig::load(path)?),
        None => flags,
    };
    let out = config.out.clone();
    let output = match config.command {
        Some(Command::SimulateWalk) => commands::simulate_walk(config, threads)?,
        Some(Command::SimulateCtmc) => commands::simulate_ctmc(config, threads)?,
        Some(Command::SimulateDiffusion) => commands::simulate_diffusion(config, threads)?,
        Some(Command::Corrector) => commands::corrector(config, threads)?,
        Some(Command::EstimateLimit) => commands::estimate_limit(config, threads)?,
        Some(Command::Verify) | None => return verify(&config, threads, &only),
    };
    write_output(&output, out.as_deref())?;
    Ok(output.verdict)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(verdict) => exit_code(verdict),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
