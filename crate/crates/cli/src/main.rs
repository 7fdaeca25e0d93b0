use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bilevel::diagnostics::{self, DiagnosticReport, DEFAULT_TAUS};
use bilevel::harness::{self, ExperimentConfig, Overrides};
use bilevel::{BuiltinReaction, Error, InversionMode, ObservationMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bi-level Landweber identification of reaction laws.
#[derive(Debug, Parser)]
#[command(name = "bilevel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an inversion experiment and write its artifacts.
    Run {
        /// Config file, or the name of a built-in config.
        config: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a numerical verification on the experiment's problem.
    Diag {
        #[arg(value_enum)]
        check: Check,
        config: String,
        #[command(flatten)]
        flags: Flags,
        /// Trials, directions or samples (default 20 / 5 / 20).
        #[arg(long)]
        samples: Option<usize>,
        /// Perturbation radius for the cone check.
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
    },
    /// Discrepancy-stopped inversions over noise levels: error at stop vs δ.
    Sweep {
        /// Comma-separated relative noise levels.
        #[arg(long, value_delimiter = ',', required = true)]
        noise: Vec<f64>,
        config: String,
        #[command(flatten)]
        flags: Flags,
        /// Seeds per noise level.
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Check {
    Adjoint,
    Gradient,
    Tcc,
    Rate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Standard,
    Sequential,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataArg {
    Full,
    Terminal,
}

#[derive(Debug, Args)]
struct Flags {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    data: Option<DataArg>,
    /// Ground-truth reaction law.
    #[arg(long)]
    reaction: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Result<Overrides, Error> {
        Ok(Overrides {
            output: self.out.clone(),
            seed: self.seed,
            mode: self.mode.map(|m| match m {
                ModeArg::Standard => InversionMode::Standard,
                ModeArg::Sequential => InversionMode::Sequential,
            }),
            observation: self.data.map(|d| match d {
                DataArg::Full => ObservationMode::Full,
                DataArg::Terminal => ObservationMode::Terminal,
            }),
            reaction: self
                .reaction
                .as_deref()
                .map(str::parse::<BuiltinReaction>)
                .transpose()?,
        })
    }
}

fn load(config: &str, flags: &Flags) -> Result<ExperimentConfig, Error> {
    let path = Path::new(config);
    let mut cfg = if !path.exists() && harness::CANNED.iter().any(|(n, _)| *n == config) {
        harness::canned_config(config)?
    } else {
        harness::parse_config(path)?
    };
    flags.overrides()?.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn diag(
    cfg: &ExperimentConfig,
    check: Check,
    samples: Option<usize>,
    radius: f64,
) -> Result<DiagnosticReport, Error> {
    let setup = harness::prepare(cfg)?;
    let s = cfg.inversion.sobolev;
    match check {
        Check::Adjoint => diagnostics::adjoint_test(
            &setup.problem,
            &setup.truth,
            &setup.truth_state,
            samples.unwrap_or(20),
            cfg.seed,
        ),
        Check::Gradient => diagnostics::gradient_check(
            &setup.problem,
            &setup.initial,
            &setup.observation,
            samples.unwrap_or(5),
            &DEFAULT_TAUS,
            s,
            cfg.seed,
        ),
        Check::Tcc => diagnostics::tcc_ratio_with(
            &setup.problem,
            &setup.truth,
            radius,
            samples.unwrap_or(20),
            cfg.seed,
            s,
            cfg.observation,
        ),
        Check::Rate => diagnostics::rate_report(
            &setup.problem,
            &setup.truth,
            cfg.inversion.lower.metric,
            10,
            200,
        ),
    }
}

fn check_name(check: Check) -> &'static str {
    match check {
        Check::Adjoint => "adjoint",
        Check::Gradient => "gradient",
        Check::Tcc => "tcc",
        Check::Rate => "rate",
    }
}

/// 0: success, 1: the run or check failed, 2: configuration error.
fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run { config, flags } => {
            let cfg = load(&config, &flags)?;
            let summary = harness::run_experiment(&cfg)?;
            for r in &summary.runs {
                println!(
                    "{} [{}]: stop {} at j = {}, Σκ = {}, reaction error ×{:.4}, misfit ×{:.4}",
                    summary.name,
                    r.mode,
                    r.stop,
                    r.j_stop,
                    r.total_kappa,
                    r.relative_param_error.unwrap_or(f64::NAN),
                    r.relative_misfit.unwrap_or(f64::NAN)
                );
            }
            println!("artifacts in {}", cfg.output.display());
            Ok(true)
        }
        Command::Diag {
            check,
            config,
            flags,
            samples,
            radius,
        } => {
            let cfg = load(&config, &flags)?;
            let report = diag(&cfg, check, samples, radius)?;
            std::fs::create_dir_all(&cfg.output)?;
            let path = cfg.output.join(format!("diag_{}.json", check_name(check)));
            std::fs::write(&path, report.to_json())?;
            println!("{}", report.to_json());
            Ok(report.pass)
        }
        Command::Sweep {
            noise,
            config,
            flags,
            seeds,
            threads,
        } => {
            let cfg = load(&config, &flags)?;
            let sweep = harness::run_sweep(&cfg, &noise, seeds, threads)?;
            println!("{}", harness::SWEEP_HEADER);
            for r in &sweep.rows {
                println!("{},{},{},{}", r.delta, r.j_stop, r.param_error, r.misfit);
            }
            println!(
                "error at stop nonincreasing as noise decreases: {} of {} seeds",
                sweep.per_seed_nonincreasing.iter().filter(|&&b| b).count(),
                sweep.per_seed_nonincreasing.len()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
