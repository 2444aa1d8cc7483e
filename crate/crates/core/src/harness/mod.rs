//! Experiment orchestration: configuration, synthetic and real-data runs,
//! sensor-table ingestion and result CSVs.
//!
//! Trials run in parallel; each trial derives its own random streams from
//! the master seed and its index, and results are merged in trial order, so
//! outputs do not depend on the number of worker threads.

pub mod config;
pub mod output;
pub mod real;
pub mod sensor;
pub mod synthetic;

use rayon::prelude::*;

use crate::algorithms::{AlgorithmConfig, BetaSchedule, RegretTrace, Variant};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};

pub use config::{AlgorithmEntry, EpsSetting, ExperimentConfig, Mode};
pub use output::{emit_csv, ResultRow, ResultTable};
pub use real::{run_real, RealOutcome};
pub use sensor::{empirical_covariance, SensorDataset};
pub use synthetic::run_synthetic;

/// Largest fraction of trials allowed to abort on numerical failure.
pub const MAX_ABORTED_FRACTION: f64 = 0.1;

/// A trial dropped after a numerical failure.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub trial: u64,
    pub env_seed: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub table: ResultTable,
    pub labels: Vec<String>,
    pub aborted: Vec<TrialFailure>,
    /// Cumulative regret at the horizon, one vector per algorithm (in
    /// `labels` order) with one entry per completed trial. Entries at the same
    /// index share a reward path, which allows paired comparisons.
    pub final_regret: Vec<Vec<f64>>,
}

/// Fills in parameters the config left open.
pub(crate) fn resolve_algorithms(
    entries: &[AlgorithmEntry],
    default_eps: f64,
    default_block: usize,
    beta: BetaSchedule,
    noise_var: f64,
) -> Result<Vec<AlgorithmConfig>> {
    let configs: Vec<AlgorithmConfig> = entries
        .iter()
        .map(|e| {
            let variant = match *e {
                AlgorithmEntry::GpUcb => Variant::GpUcb,
                AlgorithmEntry::RGpUcb { block } => Variant::RGpUcb {
                    block: block.unwrap_or(default_block),
                },
                AlgorithmEntry::TvGpUcb { eps } => Variant::TvGpUcb {
                    eps: eps.unwrap_or(default_eps),
                },
                AlgorithmEntry::Random => Variant::Random,
            };
            AlgorithmConfig::new(variant, beta, noise_var)
        })
        .collect();
    let mut labels: Vec<String> = configs.iter().map(AlgorithmConfig::label).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config(
            "the algorithm list contains duplicates".into(),
        ));
    }
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

/// Runs `trial_fn` for every trial and aggregates per algorithm.
///
/// `trial_fn(trial)` returns one trace per algorithm, all against the same
/// reward path. Numerical failures drop the trial; more than
/// [`MAX_ABORTED_FRACTION`] of them fail the run.
pub(crate) fn run_trials<F>(
    labels: Vec<String>,
    trials: usize,
    master_seed: u64,
    trial_fn: F,
) -> Result<RunOutcome>
where
    F: Fn(u64) -> Result<Vec<RegretTrace>> + Sync,
{
    let results: Vec<Result<Vec<RegretTrace>>> =
        (0..trials as u64).into_par_iter().map(&trial_fn).collect();
    let mut per_algorithm: Vec<Vec<RegretTrace>> = vec![Vec::new(); labels.len()];
    let mut aborted = Vec::new();
    for (trial, r) in results.into_iter().enumerate() {
        let trial = trial as u64;
        match r {
            Ok(traces) => {
                if traces
                    .windows(2)
                    .any(|w| w[0].env_digest != w[1].env_digest)
                {
                    return Err(Error::invalid(format!(
                        "trial {trial}: algorithms saw different reward paths"
                    )));
                }
                for (slot, t) in per_algorithm.iter_mut().zip(traces) {
                    slot.push(t);
                }
            }
            Err(e) if e.is_numerical() => {
                let env_seed = derive_seed(master_seed, trial, Stream::Environment);
                log::warn!("trial {trial} (environment seed {env_seed:#x}) aborted: {e}");
                aborted.push(TrialFailure {
                    trial,
                    env_seed,
                    message: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    if aborted.len() as f64 > MAX_ABORTED_FRACTION * trials as f64 {
        return Err(Error::TooManyAborted {
            aborted: aborted.len(),
            total: trials,
        });
    }
    let mut rows = Vec::new();
    for (label, traces) in labels.iter().zip(&per_algorithm) {
        if !traces.is_empty() {
            rows.extend(ResultTable::from_traces(label, traces)?);
        }
    }
    let final_regret = per_algorithm
        .iter()
        .map(|ts| ts.iter().map(RegretTrace::cumulative).collect())
        .collect();
    Ok(RunOutcome {
        table: ResultTable::new(rows),
        labels,
        aborted,
        final_regret,
    })
}
