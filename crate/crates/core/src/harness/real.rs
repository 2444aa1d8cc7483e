//! Bandit runs on recorded sensor data.
//!
//! The leading training rows provide the kernel (their empirical covariance)
//! and, optionally, the forgetting rate. The algorithms then run on the rows
//! that follow, one row per step. Readings are centred by the training mean
//! and divided by the root of the largest training variance before the
//! posteriors see them; regret is reported in the original units.

use nalgebra::DMatrix;

use crate::algorithms::{block_size, run_algorithm, BlockRule, TrialSeed};
use crate::environment::ReplayEnv;
use crate::error::{Error, Result};
use crate::harness::config::{EpsSetting, ExperimentConfig};
use crate::harness::sensor::{empirical_covariance, EmpiricalModel, SensorDataset};
use crate::harness::{resolve_algorithms, run_trials, RunOutcome};
use crate::hyperlearn::{fit_eps_with, PanelDay, PanelLikelihood, Search};
use crate::kernel::KernelSpec;

/// Search used when the forgetting rate is learned from training rows.
pub const FIT_SEARCH: Search = Search::GridThenAscent {
    points: 51,
    step: 1e-4,
    iters: 200,
    tol: 1e-7,
};

/// Training and test material derived from a dataset.
#[derive(Clone, Debug)]
pub struct RealSetup {
    pub model: EmpiricalModel,
    pub gram: DMatrix<f64>,
    /// Training days, normalized, with stamps counted in rows from each day's start.
    pub days: Vec<PanelDay>,
    pub test_rows: Vec<Vec<f64>>,
    pub train_dropped: usize,
    pub test_dropped: usize,
}

#[derive(Clone, Debug)]
pub struct RealOutcome {
    pub run: RunOutcome,
    pub eps: f64,
    pub block: usize,
    pub setup: RealSetup,
}

/// Default split: two thirds of the rows (whole days when the day length is known).
pub fn default_train_rows(total: usize, rows_per_day: Option<usize>) -> usize {
    match rows_per_day {
        Some(d) => (total / d) * 2 / 3 * d,
        None => total * 2 / 3,
    }
}

pub fn prepare(config: &ExperimentConfig, dataset: &SensorDataset) -> Result<RealSetup> {
    let data = match &config.sensor_ids {
        Some(ids) => dataset.select(ids)?,
        None => dataset.clone(),
    };
    let total = data.n_rows();
    let train = config
        .train_rows
        .unwrap_or_else(|| default_train_rows(total, config.rows_per_day));
    if train < 2 || train > total {
        return Err(Error::Config(format!(
            "train_rows = {train} does not fit {total} data rows"
        )));
    }
    let training = data.complete_rows(0..train);
    let test = data.complete_rows(train..total);
    if training.dropped > 0 || test.dropped > 0 {
        log::warn!(
            "dropped {} training and {} test rows with missing readings",
            training.dropped,
            test.dropped
        );
    }
    let model = empirical_covariance(&training.rows)?;
    let gram = match &model.kernel {
        KernelSpec::Empirical(e) => e.matrix().clone(),
        _ => unreachable!("empirical_covariance builds an empirical kernel"),
    };
    let day_len = config.rows_per_day.unwrap_or(train);
    let mut days = Vec::new();
    for start in (0..train).step_by(day_len) {
        let part = data.complete_rows(start..(start + day_len).min(train));
        if part.rows.is_empty() {
            continue;
        }
        let positions: Vec<f64> = (start..(start + day_len).min(train))
            .filter(|&i| data.readings[i].iter().all(Option::is_some))
            .map(|i| (i - start) as f64)
            .collect();
        let rows = DMatrix::from_fn(part.rows.len(), gram.nrows(), |a, b| {
            (part.rows[a][b] - model.offset) / model.scale
        });
        days.push(PanelDay::new(positions, rows)?);
    }
    Ok(RealSetup {
        model,
        gram,
        days,
        test_rows: test.rows,
        train_dropped: training.dropped,
        test_dropped: test.dropped,
    })
}

/// Noise variance on the normalized scale the posteriors work in.
fn scaled_noise(config: &ExperimentConfig, setup: &RealSetup) -> f64 {
    config.assumed_noise_var.unwrap_or_else(|| {
        (config.noise_var / (setup.model.scale * setup.model.scale)).max(super::config::NOISE_FLOOR)
    })
}

/// Learns `eps` from the training days.
pub fn fit_training_eps(config: &ExperimentConfig, setup: &RealSetup) -> Result<f64> {
    let panel = PanelLikelihood::new(
        setup.gram.clone(),
        setup.days.clone(),
        scaled_noise(config, setup),
    )?;
    fit_eps_with(&panel, FIT_SEARCH)
}

pub fn run_real(config: &ExperimentConfig, dataset: &SensorDataset) -> Result<RealOutcome> {
    config.validate()?;
    let setup = prepare(config, dataset)?;
    if setup.test_rows.len() < config.horizon {
        return Err(Error::Config(format!(
            "test split has {} complete rows, fewer than the horizon {}",
            setup.test_rows.len(),
            config.horizon
        )));
    }
    let eps = match config.eps {
        EpsSetting::Value(e) => e,
        EpsSetting::Fit => fit_training_eps(config, &setup)?,
    };
    log::info!("real-data run with eps = {eps}");
    let block = block_size(BlockRule::SquaredExponential, eps, config.horizon)?;
    let algorithms = resolve_algorithms(
        &config.algorithms,
        eps,
        block,
        config.beta_schedule(),
        scaled_noise(config, &setup),
    )?;
    let labels = algorithms.iter().map(|a| a.label()).collect();
    let gram = std::sync::Arc::new(setup.gram.clone());
    let rows: Vec<Vec<f64>> = setup.test_rows[..config.horizon].to_vec();
    let n_arms = setup.gram.nrows();
    let (offset, scale) = (setup.model.offset, setup.model.scale);
    let run = run_trials(labels, config.trials, config.seed, |trial| {
        let seed = TrialSeed {
            master: config.seed,
            trial,
        };
        algorithms
            .iter()
            .map(|alg| {
                let mut alg = *alg;
                alg.initial_arm = Some(trial as usize % n_arms);
                let mut env = ReplayEnv::new(
                    rows.clone(),
                    config.observation_noise_var,
                    offset,
                    scale,
                    config.seed,
                    trial,
                )?;
                run_algorithm(&mut env, gram.clone(), &alg, config.horizon, seed)
            })
            .collect()
    })?;
    Ok(RealOutcome {
        run,
        eps,
        block,
        setup,
    })
}
