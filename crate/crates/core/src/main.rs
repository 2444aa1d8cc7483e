use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tvgp::algorithms::{block_size, BetaSchedule, TheoryConstants};
use tvgp::environment::DomainGrid;
use tvgp::gp::greedy_gamma;
use tvgp::harness::real::{fit_training_eps, prepare};
use tvgp::harness::{emit_csv, run_real, run_synthetic, ExperimentConfig, Mode, SensorDataset};
use tvgp::theory::{self, BoundInputs, RateFamily};
use tvgp::Error;

#[derive(Parser)]
#[command(
    name = "tvgp",
    version,
    about = "Time-varying Gaussian-process bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path; overrides the config. Results go to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of trials; overrides the config.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Use the full-size protocol (50 x 50 grid, 200 trials).
    #[arg(long = "paper-scale", global = true)]
    full_scale: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulated regret curves on a grid.
    Synthetic,
    /// Regret curves on recorded sensor data.
    Real,
    /// Learn the forgetting rate from the training rows of a sensor file.
    FitEps,
    /// Evaluate the regret bounds for the configured experiment.
    Bounds,
    /// Run the randomized inequality checks.
    MiCheck,
}

impl Command {
    fn mode(self) -> Mode {
        match self {
            Command::Synthetic => Mode::Synthetic,
            Command::Real => Mode::Real,
            Command::FitEps => Mode::FitEps,
            Command::Bounds => Mode::Bounds,
            Command::MiCheck => Mode::MiCheck,
        }
    }
}

enum Failure {
    Error(Error),
    ChecksFailed(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ChecksFailed(n)) => {
            eprintln!("{n} inequality violations");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mode = cli.command.mode();
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(Error::Config(format!(
                "config declares mode {} but the {} subcommand was given",
                m.name(),
                mode.name()
            )));
        }
    }
    if cli.full_scale {
        cfg.full_scale();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<SensorDataset, Error> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("`data` must name a sensor CSV file".into()))?;
    SensorDataset::load(path)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Synthetic => {
            let outcome = run_synthetic(&cfg)?;
            for a in &outcome.aborted {
                eprintln!(
                    "aborted trial {} (seed {:#x}): {}",
                    a.trial, a.env_seed, a.message
                );
            }
            match &cfg.out {
                Some(path) => emit_csv(&outcome.table, path)?,
                None => print!("{}", outcome.table.to_csv()),
            }
        }
        Command::Real => {
            let outcome = run_real(&cfg, &load_data(&cfg)?)?;
            eprintln!(
                "eps = {}, block = {}, dropped rows: {} training, {} test",
                outcome.eps, outcome.block, outcome.setup.train_dropped, outcome.setup.test_dropped
            );
            match &cfg.out {
                Some(path) => emit_csv(&outcome.run.table, path)?,
                None => print!("{}", outcome.run.table.to_csv()),
            }
        }
        Command::FitEps => {
            let setup = prepare(&cfg, &load_data(&cfg)?)?;
            let eps = fit_training_eps(&cfg, &setup)?;
            let text = format!(
                "eps = {eps}\ntraining_days = {}\ndropped_rows = {}\n",
                setup.days.len(),
                setup.train_dropped
            );
            write_text(cfg.out.as_deref(), &text)?;
        }
        Command::Bounds => write_text(cfg.out.as_deref(), &bounds_report(&cfg)?)?,
        Command::MiCheck => {
            let (text, violations) = inequality_report(&cfg)?;
            write_text(cfg.out.as_deref(), &text)?;
            if violations > 0 {
                return Err(Failure::ChecksFailed(violations));
            }
        }
    }
    Ok(())
}

fn bounds_report(cfg: &ExperimentConfig) -> Result<String, Error> {
    let grid = DomainGrid::regular(cfg.grid_resolution, cfg.grid_dim, cfg.domain_size)?;
    let kernel = cfg.kernel_spec()?;
    let domain = grid.locations();
    let noise = cfg.assumed_noise();
    let horizon = cfg.horizon;
    let block = match cfg.block_size {
        Some(b) => b.min(horizon),
        None => block_size(cfg.block_rule(), cfg.eps_true, horizon)?,
    };
    let constants = TheoryConstants {
        delta: cfg.delta,
        dim: cfg.grid_dim,
        extent: cfg.domain_size,
        a: cfg.a0,
        b: cfg.b0,
    };
    let beta_tv = BetaSchedule::TheoreticalTv(constants).beta(horizon)?;
    let beta_r = BetaSchedule::TheoreticalR(constants).beta(horizon)?;
    let gamma_tilde = greedy_gamma(&domain, horizon, &kernel, cfg.eps_true, noise)?.value;
    let gamma_block = greedy_gamma(&domain, block, &kernel, 0.0, noise)?.value;
    let inputs = |beta| BoundInputs {
        horizon,
        block,
        eps: cfg.eps_true,
        noise_var: noise,
        delta: cfg.delta,
        beta,
        a0: cfg.a0,
        b0: cfg.b0,
    };
    let family = match cfg.block_rule() {
        tvgp::algorithms::BlockRule::SquaredExponential => RateFamily::SquaredExponential,
        tvgp::algorithms::BlockRule::Matern { nu, dim } => RateFamily::Matern { nu, dim },
    };
    let rates = theory::asymptotic_rates(family, horizon, cfg.eps_true)?;
    let lines = [
        ("horizon", horizon as f64),
        ("block", block as f64),
        ("eps", cfg.eps_true),
        ("c1", theory::c1(noise)),
        ("beta_tv", beta_tv),
        ("beta_r", beta_r),
        ("gamma_tilde_greedy", gamma_tilde),
        ("gamma_block_greedy", gamma_block),
        (
            "bound_tv",
            theory::regret_bound_tv(&inputs(beta_tv), gamma_tilde)?,
        ),
        (
            "bound_tv_split",
            theory::regret_bound_tv_split(&inputs(beta_tv), gamma_block)?,
        ),
        (
            "bound_r",
            theory::regret_bound_r(&inputs(beta_r), gamma_block)?,
        ),
        ("psi", theory::psi(&inputs(beta_r))?),
        ("rate_tv", rates.tv),
        ("rate_r", rates.r),
    ];
    Ok(lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect())
}

fn inequality_report(cfg: &ExperimentConfig) -> Result<(String, usize), Error> {
    let suites = [
        (
            "frobenius",
            theory::frobenius_suite(cfg.seed, cfg.instances)?,
        ),
        ("mi_split", theory::mi_split_suite(cfg.seed, cfg.instances)?),
        ("mismatch", theory::mismatch_suite(cfg.seed, cfg.instances)?),
    ];
    let mut text = String::new();
    let mut violations = 0;
    for (name, report) in &suites {
        text.push_str(&format!(
            "{name}: {} instances, {} violations\n",
            report.instances,
            report.violations.len()
        ));
        for v in &report.violations {
            text.push_str(&format!(
                "  seed {} instance {}: {}\n",
                v.seed, v.instance, v.description
            ));
        }
        violations += report.violations.len();
    }
    Ok((text, violations))
}
