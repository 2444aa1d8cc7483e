//! Exact posterior inference for the time-invariant and time-varying GP models,
//! and the mutual-information quantities that govern the regret bounds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{decay_power, kernel_matrix, kernel_vector, KernelSpec, Location};
use crate::linalg::{cholesky_jittered, JITTER_LADDER};

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub time: usize,
    pub location: Location,
    pub value: f64,
}

/// Time-stamped noisy samples `y_i = f_{t_i}(x_i) + z_i`, `z_i ~ N(0, noise_var)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationHistory {
    records: Vec<Observation>,
    noise_var: f64,
}

impl ObservationHistory {
    pub fn new(noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(ObservationHistory {
            records: Vec::new(),
            noise_var,
        })
    }

    /// Appends a sample at the next integer time step.
    pub fn push(&mut self, location: impl Into<Location>, value: f64) {
        let time = self.records.last().map_or(1, |r| r.time + 1);
        self.records.push(Observation {
            time,
            location: location.into(),
            value,
        });
    }

    /// Appends a sample at an explicit time, which must exceed the last one.
    pub fn push_at(
        &mut self,
        time: usize,
        location: impl Into<Location>,
        value: f64,
    ) -> Result<()> {
        if time == 0 || self.records.last().is_some_and(|r| r.time >= time) {
            return Err(Error::invalid(format!(
                "observation times must be positive and strictly increasing, got {time}"
            )));
        }
        self.records.push(Observation {
            time,
            location: location.into(),
            value,
        });
        Ok(())
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_time(&self) -> usize {
        self.records.last().map_or(0, |r| r.time)
    }

    fn locations(&self) -> Vec<Location> {
        self.records.iter().map(|r| r.location.clone()).collect()
    }

    fn values(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.records.iter().map(|r| r.value))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorSummary {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Posterior of the time-invariant GP at `query` given all of `history`.
pub fn ti_posterior(
    history: &ObservationHistory,
    kernel: &KernelSpec,
    query: &Location,
) -> Result<PosteriorSummary> {
    let prior = kernel.eval(query, query)?;
    if history.is_empty() {
        return Ok(PosteriorSummary {
            mean: 0.0,
            variance: prior,
        });
    }
    let pts = history.locations();
    let mut gram = kernel_matrix(kernel, &pts)?;
    let k = kernel_vector(kernel, &pts, query)?;
    add_noise(&mut gram, history.noise_var);
    condition(&gram, &k, &history.values(), prior)
}

/// Posterior of `f_{t+1}(query)` under the time-varying model, where `t` is
/// the time of the last observation.
pub fn tv_posterior(
    history: &ObservationHistory,
    kernel: &KernelSpec,
    eps: f64,
    query: &Location,
) -> Result<PosteriorSummary> {
    tv_posterior_at(history, kernel, eps, query, history.last_time() + 1)
}

/// Time-varying posterior of `f_{query_time}(query)`; `query_time` must not
/// precede the last observation.
pub fn tv_posterior_at(
    history: &ObservationHistory,
    kernel: &KernelSpec,
    eps: f64,
    query: &Location,
    query_time: usize,
) -> Result<PosteriorSummary> {
    check_eps(eps)?;
    let prior = kernel.eval(query, query)?;
    if history.is_empty() {
        return Ok(PosteriorSummary {
            mean: 0.0,
            variance: prior,
        });
    }
    if query_time < history.last_time() {
        return Err(Error::invalid("query time precedes the last observation"));
    }
    let pts = history.locations();
    let times: Vec<usize> = history.records.iter().map(|r| r.time).collect();
    let mut gram = kernel_matrix(kernel, &pts)?;
    let mut k = kernel_vector(kernel, &pts, query)?;
    for i in 0..times.len() {
        for j in 0..times.len() {
            gram[(i, j)] *= decay_power(eps, times[i].abs_diff(times[j]) as f64 / 2.0);
        }
        k[i] *= decay_power(eps, (query_time - times[i]) as f64 / 2.0);
    }
    add_noise(&mut gram, history.noise_var);
    condition(&gram, &k, &history.values(), prior)
}

fn add_noise(gram: &mut DMatrix<f64>, noise_var: f64) {
    for i in 0..gram.nrows() {
        gram[(i, i)] += noise_var;
    }
}

fn condition(
    noisy_gram: &DMatrix<f64>,
    k: &DVector<f64>,
    y: &DVector<f64>,
    prior: f64,
) -> Result<PosteriorSummary> {
    let f = cholesky_jittered(noisy_gram)?;
    let alpha = f.solve(y);
    let v = f.forward(k);
    Ok(PosteriorSummary {
        mean: k.dot(&alpha),
        variance: (prior - v.norm_squared()).max(0.0),
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")))
    }
}

/// Reference posterior built from the full joint Gaussian of
/// `(y_1, ..., y_t, f_{query_time}(query))`, using
/// `Cov[f_s(x), f_{s+j}(x')] = (1 - eps)^{j/2} k(x, x')` directly and
/// conditioning by an LU solve. O(t^3) with no reuse; intended as an oracle.
pub fn joint_conditioning_oracle(
    history: &ObservationHistory,
    kernel: &KernelSpec,
    eps: f64,
    query: &Location,
    query_time: usize,
) -> Result<PosteriorSummary> {
    check_eps(eps)?;
    let n = history.len();
    let recs = history.records();
    // Joint covariance over (f_{t_1}(x_1), ..., f_{t_n}(x_n), f_{query_time}(query)).
    let mut stamps: Vec<f64> = recs.iter().map(|r| r.time as f64).collect();
    stamps.push(query_time as f64);
    let mut locs: Vec<&Location> = recs.iter().map(|r| &r.location).collect();
    locs.push(query);
    let rho2 = 1.0 - eps;
    let mut joint = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            let lag = (stamps[i] - stamps[j]).abs();
            let temporal = if lag == 0.0 {
                1.0
            } else {
                rho2.powf(lag / 2.0)
            };
            joint[(i, j)] = temporal * kernel.eval(locs[i], locs[j])?;
        }
    }
    let prior = joint[(n, n)];
    if n == 0 {
        return Ok(PosteriorSummary {
            mean: 0.0,
            variance: prior,
        });
    }
    let mut s_yy = joint.view((0, 0), (n, n)).into_owned();
    for i in 0..n {
        s_yy[(i, i)] += history.noise_var();
    }
    let s_fy = joint.view((n, 0), (1, n)).transpose();
    let lu = s_yy.lu();
    let y = history.values();
    let w = lu
        .solve(&s_fy)
        .ok_or(Error::NotPositiveDefinite { max_jitter: 0.0 })?;
    Ok(PosteriorSummary {
        mean: w.dot(&y),
        variance: prior - w.dot(&s_fy),
    })
}

/// `1/2 log det(I + gram / noise_var)` in nats, via a Cholesky factor.
pub fn mutual_information(gram: &DMatrix<f64>, noise_var: f64) -> Result<f64> {
    if gram.nrows() != gram.ncols() {
        return Err(Error::invalid("gram matrix must be square"));
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    if gram.nrows() == 0 {
        return Ok(0.0);
    }
    let n = gram.nrows();
    let m = DMatrix::identity(n, n) + gram / noise_var;
    Ok(0.5 * cholesky_jittered(&m)?.log_det())
}

/// Information gain of sampling `points` at times `1..=T` under the
/// time-varying model, as `1/2 sum_t log(1 + sigma^{-2} var_{t-1}(x_t))`
/// with each variance recomputed from scratch by [`tv_posterior`].
pub fn mutual_information_telescoped(
    points: &[Location],
    kernel: &KernelSpec,
    eps: f64,
    noise_var: f64,
) -> Result<f64> {
    let mut history = ObservationHistory::new(noise_var)?;
    let mut total = 0.0;
    for p in points {
        let post = tv_posterior(&history, kernel, eps, p)?;
        total += 0.5 * (post.variance / noise_var).ln_1p();
        history.push(p.clone(), 0.0);
    }
    Ok(total)
}

/// Time-varying Gram matrix `K o D` of `points` sampled at times `1..=T`.
pub fn tv_gram(points: &[Location], kernel: &KernelSpec, eps: f64) -> Result<DMatrix<f64>> {
    let k = kernel_matrix(kernel, points)?;
    let d = crate::kernel::decay_matrix(points.len(), eps)?;
    Ok(k.component_mul(&d))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyGamma {
    /// Information gain of the selected sequence, determinant form.
    pub value: f64,
    /// Selected domain indices in sampling order.
    pub sequence: Vec<usize>,
}

/// Greedy lower bound on the maximum information gain over `horizon` samples:
/// at each step pick the domain point of largest posterior variance (lowest
/// index on ties).
pub fn greedy_gamma(
    domain: &[Location],
    horizon: usize,
    kernel: &KernelSpec,
    eps: f64,
    noise_var: f64,
) -> Result<GreedyGamma> {
    if domain.is_empty() {
        return Err(Error::Empty("greedy_gamma needs a non-empty domain"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let gram = Arc::new(kernel_matrix(kernel, domain)?);
    let mut post = SequentialPosterior::new(gram, noise_var, eps)?;
    let mut sequence = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut best = 0;
        for i in 1..domain.len() {
            if post.variance(i) > post.variance(best) {
                best = i;
            }
        }
        post.observe(best, 0.0)?;
        sequence.push(best);
    }
    let chosen: Vec<Location> = sequence.iter().map(|&i| domain[i].clone()).collect();
    let value = mutual_information(&tv_gram(&chosen, kernel, eps)?, noise_var)?;
    Ok(GreedyGamma { value, sequence })
}

/// Incremental time-varying posterior over a finite arm set.
///
/// Keeps `v_t(x) = L_t^{-1} k~_t(x)` for every arm, where `L_t` is the Cholesky
/// factor of `K~_t + sigma^2 I`. Adding a sample extends `L_t` by one row
/// (the decayed Gram block of earlier samples is unchanged) and, since
/// `k~_{t+1}(x) = rho [k~_t(x); k(x_{t+1}, x)]` with `rho = (1 - eps)^{1/2}`,
/// updates every arm in `O(t n)`. With `eps = 0` this is the ordinary
/// rank-extension of the time-invariant posterior.
///
/// Single-owner state; clone it rather than sharing it across threads.
#[derive(Clone, Debug)]
pub struct SequentialPosterior {
    gram: Arc<DMatrix<f64>>,
    noise_var: f64,
    rho: f64,
    rows: Vec<Vec<f64>>,
    mean: Vec<f64>,
    sumsq: Vec<f64>,
}

impl SequentialPosterior {
    /// `gram` is the spatial kernel matrix over all arms.
    pub fn new(gram: Arc<DMatrix<f64>>, noise_var: f64, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if gram.nrows() == 0 || gram.nrows() != gram.ncols() {
            return Err(Error::invalid(
                "arm gram matrix must be square and non-empty",
            ));
        }
        let n = gram.nrows();
        Ok(SequentialPosterior {
            gram,
            noise_var,
            rho: decay_power(eps, 0.5),
            rows: Vec::new(),
            mean: vec![0.0; n],
            sumsq: vec![0.0; n],
        })
    }

    pub fn n_arms(&self) -> usize {
        self.mean.len()
    }

    /// Number of samples conditioned on since construction or the last reset.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.mean.iter_mut().for_each(|m| *m = 0.0);
        self.sumsq.iter_mut().for_each(|s| *s = 0.0);
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.mean[arm]
    }

    pub fn variance(&self, arm: usize) -> f64 {
        (self.gram[(arm, arm)] - self.sumsq[arm]).max(0.0)
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.n_arms())
            .map(|a| self.variance(a).sqrt())
            .collect()
    }

    /// Conditions on `y` observed at `arm` one step after the previous sample.
    pub fn observe(&mut self, arm: usize, y: f64) -> Result<()> {
        let n = self.n_arms();
        if arm >= n {
            return Err(Error::IndexOutOfRange {
                index: arm,
                size: n,
            });
        }
        let base = self.gram[(arm, arm)] - self.sumsq[arm] + self.noise_var;
        let pivot_sq = JITTER_LADDER
            .iter()
            .map(|j| base + j)
            .find(|v| *v > 0.0 && v.is_finite())
            .ok_or(Error::NotPositiveDefinite {
                max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
            })?;
        let pivot = pivot_sq.sqrt();
        let u_new = (y - self.mean[arm]) / pivot;

        let mut w: Vec<f64> = self.gram.column(arm).iter().copied().collect();
        for row in &self.rows {
            let l = row[arm];
            if l != 0.0 {
                for (wx, vx) in w.iter_mut().zip(row) {
                    *wx -= l * vx;
                }
            }
        }
        w.iter_mut().for_each(|x| *x /= pivot);

        let rho = self.rho;
        for ((m, s), &wx) in self.mean.iter_mut().zip(&mut self.sumsq).zip(&w) {
            *m = rho * (*m + wx * u_new);
            *s = rho * rho * (*s + wx * wx);
        }
        if rho != 1.0 {
            for row in &mut self.rows {
                row.iter_mut().for_each(|v| *v *= rho);
            }
            w.iter_mut().for_each(|v| *v *= rho);
        }
        self.rows.push(w);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: &[f64]) -> Location {
        Location::Coords(v.to_vec())
    }

    fn se() -> KernelSpec {
        KernelSpec::squared_exponential(0.2).unwrap()
    }

    #[test]
    fn empty_history_is_prior() {
        let h = ObservationHistory::new(0.01).unwrap();
        let p = ti_posterior(&h, &se(), &c(&[0.5, 0.5])).unwrap();
        assert_eq!(
            p,
            PosteriorSummary {
                mean: 0.0,
                variance: 1.0
            }
        );
        let p = tv_posterior(&h, &se(), 0.3, &c(&[0.5, 0.5])).unwrap();
        assert_eq!(
            p,
            PosteriorSummary {
                mean: 0.0,
                variance: 1.0
            }
        );
    }

    #[test]
    fn single_observation_at_query() {
        let mut h = ObservationHistory::new(0.01).unwrap();
        h.push(c(&[0.3]), 2.0);
        let p = ti_posterior(&h, &se(), &c(&[0.3])).unwrap();
        assert!((p.mean - 2.0 / 1.01).abs() < 1e-12);
        assert!((p.variance - (1.0 - 1.0 / 1.01)).abs() < 1e-12);
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let mut h = ObservationHistory::new(0.01).unwrap();
        h.push(c(&[0.0]), 3.0);
        h.push(c(&[0.1]), -1.0);
        let p = ti_posterior(&h, &se(), &c(&[10.0])).unwrap();
        assert!(p.mean.abs() < 1e-6);
        assert!((p.variance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tv_single_observation_hand_value() {
        let mut h = ObservationHistory::new(0.01).unwrap();
        h.push(c(&[0.3]), 1.7);
        let p = tv_posterior(&h, &se(), 0.19, &c(&[0.3])).unwrap();
        assert!((p.mean - 0.9 * 1.7 / 1.01).abs() < 1e-12);
        assert!((p.variance - (1.0 - 0.81 / 1.01)).abs() < 1e-12);
        assert!((p.variance - 0.198_019_801_980_198).abs() < 1e-12);
        let o = joint_conditioning_oracle(&h, &se(), 0.19, &c(&[0.3]), 2).unwrap();
        assert!((o.mean - p.mean).abs() < 1e-12);
        assert!((o.variance - p.variance).abs() < 1e-12);
    }

    #[test]
    fn full_forgetting_gives_prior() {
        let mut h = ObservationHistory::new(0.05).unwrap();
        h.push(c(&[0.3]), 1.0);
        h.push(c(&[0.4]), 2.0);
        let p = tv_posterior(&h, &se(), 1.0, &c(&[0.35])).unwrap();
        assert_eq!(p.mean, 0.0);
        assert_eq!(p.variance, 1.0);
    }

    #[test]
    fn push_at_rejects_non_increasing() {
        let mut h = ObservationHistory::new(0.1).unwrap();
        h.push_at(3, c(&[0.0]), 1.0).unwrap();
        assert!(h.push_at(3, c(&[0.0]), 1.0).is_err());
        assert!(h.push_at(0, c(&[0.0]), 1.0).is_err());
        assert!(ObservationHistory::new(0.0).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        assert_eq!(
            mutual_information(&DMatrix::zeros(0, 0), 0.01).unwrap(),
            0.0
        );
        let v = mutual_information(&DMatrix::from_element(1, 1, 1.0), 0.01).unwrap();
        assert!((v - 0.5 * 101f64.ln()).abs() < 1e-12);
        assert!((v - 2.3076).abs() < 1e-4);
    }

    #[test]
    fn greedy_gamma_single_step() {
        let domain: Vec<Location> = (0..7).map(|i| c(&[i as f64 / 7.0])).collect();
        let g = greedy_gamma(&domain, 1, &se(), 0.0, 0.01).unwrap();
        assert!((g.value - 0.5 * 101f64.ln()).abs() < 1e-12);
        assert_eq!(g.sequence, vec![0]);
    }

    #[test]
    fn greedy_gamma_duplicate_points() {
        let domain = vec![c(&[0.5]), c(&[0.5])];
        let g = greedy_gamma(&domain, 2, &se(), 0.0, 0.1).unwrap();
        // det(I + 10 * ones(2x2)) = 21.
        assert!((g.value - 0.5 * 21f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn greedy_gamma_grows_with_eps() {
        let domain: Vec<Location> = (0..25)
            .map(|i| c(&[(i % 5) as f64 / 4.0, (i / 5) as f64 / 4.0]))
            .collect();
        let g0 = greedy_gamma(&domain, 30, &se(), 0.0, 0.01).unwrap();
        let g1 = greedy_gamma(&domain, 30, &se(), 0.1, 0.01).unwrap();
        assert!(g0.value <= g1.value);
        assert!(greedy_gamma(&[], 3, &se(), 0.0, 0.01).is_err());
    }

    #[test]
    fn sequential_matches_batch() {
        let domain: Vec<Location> = (0..20)
            .map(|i| c(&[(i as f64 * 0.311).fract(), (i as f64 * 0.737).fract()]))
            .collect();
        let kern = se();
        let gram = Arc::new(kernel_matrix(&kern, &domain).unwrap());
        for &eps in &[0.0, 0.03, 0.4, 1.0] {
            let mut seq = SequentialPosterior::new(gram.clone(), 0.01, eps).unwrap();
            let mut hist = ObservationHistory::new(0.01).unwrap();
            for step in 0..15 {
                let arm = (step * 7) % 20;
                let y = ((step as f64) * 1.3).sin();
                seq.observe(arm, y).unwrap();
                hist.push(domain[arm].clone(), y);
                for q in [0usize, 5, 13, arm] {
                    let b = tv_posterior(&hist, &kern, eps, &domain[q]).unwrap();
                    assert!((seq.mean(q) - b.mean).abs() < 1e-8, "eps={eps} step={step}");
                    assert!((seq.variance(q) - b.variance).abs() < 1e-8);
                }
            }
            seq.reset();
            assert!(seq.is_empty());
            assert_eq!(seq.variance(3), 1.0);
        }
    }
}
