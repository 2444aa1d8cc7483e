//! Seeded simulator of the Markov GP reward model on a finite domain.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelSpec, Location};
use crate::linalg::cholesky_with_ladder;
use crate::rng::{stream_rng, Stream, StreamRng};

/// Diagonal jitter for the grid kernel matrix before factorization.
pub const GRID_JITTER: f64 = 1e-8;

/// Equally spaced points in `[0, extent]^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainGrid {
    dim: usize,
    resolution: usize,
    extent: f64,
    points: Vec<Vec<f64>>,
}

impl DomainGrid {
    /// `resolution` points per axis, including both endpoints.
    pub fn regular(resolution: usize, dim: usize, extent: f64) -> Result<Self> {
        if resolution == 0 || dim == 0 {
            return Err(Error::invalid(
                "grid resolution and dimension must be positive",
            ));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::invalid(format!(
                "grid extent must be positive, got {extent}"
            )));
        }
        let total = resolution
            .checked_pow(dim as u32)
            .filter(|&n| n <= 1 << 20)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        let step = if resolution == 1 {
            0.0
        } else {
            extent / (resolution - 1) as f64
        };
        let points = (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; dim];
                for c in p.iter_mut() {
                    *c = (idx % resolution) as f64 * step;
                    idx /= resolution;
                }
                p
            })
            .collect();
        Ok(DomainGrid {
            dim,
            resolution,
            extent,
            points,
        })
    }

    /// An explicit point set inside `[0, extent]^dim`; duplicates are rejected.
    pub fn from_points(points: Vec<Vec<f64>>, extent: f64) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or(Error::Empty("domain points"))?;
        if dim == 0 {
            return Err(Error::invalid("points must have at least one coordinate"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::invalid("points have inconsistent dimension"));
            }
            if p.iter().any(|&c| !(0.0..=extent).contains(&c)) {
                return Err(Error::invalid(format!(
                    "point {p:?} outside [0, {extent}]^{dim}"
                )));
            }
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("domain contains duplicate points"));
        }
        Ok(DomainGrid {
            dim,
            resolution: 0,
            extent,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis; 0 for an explicit point set.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn locations(&self) -> Vec<Location> {
        self.points.iter().cloned().map(Location::Coords).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSnapshot {
    pub values: Vec<f64>,
    pub time: usize,
}

/// The fixed part of a simulated environment: arm Gram matrix and its
/// jittered lower Cholesky factor. Shared read-only across trials.
#[derive(Debug)]
pub struct GpPrior {
    gram: Arc<DMatrix<f64>>,
    lower: DMatrix<f64>,
}

impl GpPrior {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let ladder = [GRID_JITTER, 1e-7, 1e-6];
        let factor = cholesky_with_ladder(&gram, &ladder)?;
        Ok(GpPrior {
            lower: factor.l(),
            gram: Arc::new(gram),
        })
    }

    pub fn from_grid(grid: &DomainGrid, kernel: &KernelSpec) -> Result<Self> {
        GpPrior::new(kernel_matrix(kernel, &grid.locations())?)
    }

    pub fn gram(&self) -> &Arc<DMatrix<f64>> {
        &self.gram
    }

    pub fn n_arms(&self) -> usize {
        self.gram.nrows()
    }

    /// One draw `L z`, `z ~ N(0, I)`.
    pub fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        let n = self.n_arms();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; n];
        let data = self.lower.as_slice();
        for (j, &zj) in z.iter().enumerate() {
            let col = &data[j * n + j..(j + 1) * n];
            for (o, l) in out[j..].iter_mut().zip(col) {
                *o += l * zj;
            }
        }
        out
    }
}

/// A bandit environment with a hidden reward vector per step.
pub trait RewardEnvironment {
    fn n_arms(&self) -> usize;

    /// Current time step, starting at 1.
    fn time(&self) -> usize;

    /// Current reward values `f_t` over all arms.
    fn values(&self) -> &[f64];

    /// Noisy feedback `y = f_t(x) + z`.
    fn observe(&mut self, arm: usize) -> Result<f64>;

    /// Advances to `f_{t+1}`.
    fn evolve(&mut self) -> Result<()>;

    /// Digest of the reward path so far; identical paths give identical digests.
    fn path_digest(&self) -> u64;

    /// `max_x f_t(x) - f_t(arm)`.
    fn instantaneous_regret(&self, arm: usize) -> Result<f64> {
        instantaneous_regret(self.values(), arm)
    }
}

/// Folds one snapshot into a running path digest.
fn chain_digest(prev: u64, time: usize, values: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    prev.hash(&mut h);
    time.hash(&mut h);
    for v in values {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn instantaneous_regret(values: &[f64], arm: usize) -> Result<f64> {
    let v = *values.get(arm).ok_or(Error::IndexOutOfRange {
        index: arm,
        size: values.len(),
    })?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max - v)
}

/// Simulated Markov GP environment:
/// `f_1 = g_1`, `f_{t+1} = sqrt(1 - eps) f_t + sqrt(eps) g_{t+1}`.
#[derive(Debug)]
pub struct EnvState {
    prior: Arc<GpPrior>,
    eps: f64,
    noise_var: f64,
    snapshot: FunctionSnapshot,
    draws: StreamRng,
    noise: StreamRng,
    digest: u64,
}

impl EnvState {
    /// Draws `f_1` for trial `trial` of the experiment seeded by `master_seed`.
    pub fn sample_initial(
        prior: Arc<GpPrior>,
        eps: f64,
        noise_var: f64,
        master_seed: u64,
        trial: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")));
        }
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be non-negative, got {noise_var}"
            )));
        }
        let mut draws = stream_rng(master_seed, trial, Stream::Environment);
        let noise = stream_rng(master_seed, trial, Stream::Noise);
        let values = prior.draw(&mut draws);
        let mut state = EnvState {
            prior,
            eps,
            noise_var,
            snapshot: FunctionSnapshot { values, time: 1 },
            draws,
            noise,
            digest: 0,
        };
        state.update_digest();
        Ok(state)
    }

    /// Convenience constructor: factors the grid kernel and draws `f_1`.
    pub fn from_grid(
        grid: &DomainGrid,
        kernel: &KernelSpec,
        eps: f64,
        noise_var: f64,
        seed: u64,
    ) -> Result<Self> {
        let prior = Arc::new(GpPrior::from_grid(grid, kernel)?);
        EnvState::sample_initial(prior, eps, noise_var, seed, 0)
    }

    pub fn snapshot(&self) -> &FunctionSnapshot {
        &self.snapshot
    }

    pub fn prior(&self) -> &Arc<GpPrior> {
        &self.prior
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    fn update_digest(&mut self) {
        self.digest = chain_digest(self.digest, self.snapshot.time, &self.snapshot.values);
    }

    /// Consumes the environment and returns `f_1, ..., f_horizon`.
    pub fn record_path(mut self, horizon: usize) -> Result<Vec<Vec<f64>>> {
        let mut path = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            path.push(self.snapshot.values.clone());
            if t < horizon {
                self.evolve()?;
            }
        }
        Ok(path)
    }
}

impl RewardEnvironment for EnvState {
    fn n_arms(&self) -> usize {
        self.snapshot.values.len()
    }

    fn time(&self) -> usize {
        self.snapshot.time
    }

    fn values(&self) -> &[f64] {
        &self.snapshot.values
    }

    fn observe(&mut self, arm: usize) -> Result<f64> {
        let f = *self
            .snapshot
            .values
            .get(arm)
            .ok_or(Error::IndexOutOfRange {
                index: arm,
                size: self.snapshot.values.len(),
            })?;
        let z: f64 = self.noise.sample(StandardNormal);
        Ok(f + self.noise_var.sqrt() * z)
    }

    fn evolve(&mut self) -> Result<()> {
        if self.eps > 0.0 {
            let g = self.prior.draw(&mut self.draws);
            let keep = (1.0 - self.eps).sqrt();
            let fresh = self.eps.sqrt();
            for (f, gi) in self.snapshot.values.iter_mut().zip(g) {
                *f = keep * *f + fresh * gi;
            }
        }
        self.snapshot.time += 1;
        self.update_digest();
        Ok(())
    }

    fn path_digest(&self) -> u64 {
        self.digest
    }
}

/// Replays a recorded reward table, one row per step.
///
/// Observations are `(row[arm] + z - offset) / scale` with `z ~ N(0, noise_var)`,
/// which lets a zero-mean unit-variance GP model consume data recorded in
/// arbitrary units while regret stays in the original units.
#[derive(Debug)]
pub struct ReplayEnv {
    rows: Vec<Vec<f64>>,
    step: usize,
    noise_var: f64,
    offset: f64,
    scale: f64,
    noise: StreamRng,
    digest: u64,
}

impl ReplayEnv {
    pub fn new(
        rows: Vec<Vec<f64>>,
        noise_var: f64,
        offset: f64,
        scale: f64,
        master_seed: u64,
        trial: u64,
    ) -> Result<Self> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or(Error::Empty("replay rows"))?;
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid(
                "replay rows must be rectangular and non-empty",
            ));
        }
        if !(scale > 0.0) || !(noise_var >= 0.0) {
            return Err(Error::invalid(
                "replay scale must be positive and noise non-negative",
            ));
        }
        Ok(ReplayEnv {
            step: 0,
            noise_var,
            offset,
            scale,
            digest: chain_digest(0, 1, &rows[0]),
            noise: stream_rng(master_seed, trial, Stream::Noise),
            rows,
        })
    }

    pub fn remaining(&self) -> usize {
        self.rows.len() - self.step
    }
}

impl RewardEnvironment for ReplayEnv {
    fn n_arms(&self) -> usize {
        self.rows[0].len()
    }

    fn time(&self) -> usize {
        self.step + 1
    }

    fn values(&self) -> &[f64] {
        &self.rows[self.step]
    }

    fn observe(&mut self, arm: usize) -> Result<f64> {
        let f = *self.rows[self.step]
            .get(arm)
            .ok_or(Error::IndexOutOfRange {
                index: arm,
                size: self.n_arms(),
            })?;
        let z: f64 = self.noise.sample(StandardNormal);
        Ok((f + self.noise_var.sqrt() * z - self.offset) / self.scale)
    }

    fn evolve(&mut self) -> Result<()> {
        if self.step + 1 >= self.rows.len() {
            return Err(Error::invalid("replay table exhausted"));
        }
        self.step += 1;
        self.digest = chain_digest(self.digest, self.step + 1, &self.rows[self.step]);
        Ok(())
    }

    fn path_digest(&self) -> u64 {
        self.digest
    }
}
