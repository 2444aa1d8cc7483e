//! Simulated experiments on a regular grid.

use std::sync::Arc;

use crate::algorithms::{block_size, run_algorithm, TrialSeed};
use crate::environment::{DomainGrid, EnvState, GpPrior, ReplayEnv};
use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::{resolve_algorithms, run_trials, RunOutcome};

/// Each trial draws one reward path and replays it to every algorithm, so
/// all algorithms of a trial face identical rewards and noise.
pub fn run_synthetic(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let grid = DomainGrid::regular(config.grid_resolution, config.grid_dim, config.domain_size)?;
    let prior = Arc::new(GpPrior::from_grid(&grid, &config.kernel_spec()?)?);
    run_synthetic_with_prior(config, prior)
}

/// As [`run_synthetic`] with a prepared prior (the grid settings are ignored).
pub fn run_synthetic_with_prior(
    config: &ExperimentConfig,
    prior: Arc<GpPrior>,
) -> Result<RunOutcome> {
    let block = block_size(config.block_rule(), config.eps_true, config.horizon)?;
    let algorithms = resolve_algorithms(
        &config.algorithms,
        config.eps_true,
        block,
        config.beta_schedule(),
        config.assumed_noise(),
    )?;
    let labels = algorithms.iter().map(|a| a.label()).collect();
    let gram = prior.gram().clone();
    log::info!(
        "synthetic run: {} arms, horizon {}, {} trials, eps {}",
        prior.n_arms(),
        config.horizon,
        config.trials,
        config.eps_true
    );
    run_trials(labels, config.trials, config.seed, |trial| {
        let env = EnvState::sample_initial(
            prior.clone(),
            config.eps_true,
            config.noise_var,
            config.seed,
            trial,
        )?;
        let path = env.record_path(config.horizon)?;
        let seed = TrialSeed {
            master: config.seed,
            trial,
        };
        algorithms
            .iter()
            .map(|alg| {
                let mut replay =
                    ReplayEnv::new(path.clone(), config.noise_var, 0.0, 1.0, config.seed, trial)?;
                run_algorithm(&mut replay, gram.clone(), alg, config.horizon, seed)
            })
            .collect()
    })
}
