//! Regret-bound evaluators and numerical checks of the inequalities the
//! bounds rest on.
//!
//! The evaluators are plain arithmetic. The checkers build the matrices the
//! inequalities talk about on concrete instances and report the margin, so a
//! randomized sweep either passes or returns a reproducible counterexample.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::environment::{EnvState, GpPrior, RewardEnvironment};
use crate::error::{Error, Result};
use crate::gp::{mutual_information, ti_posterior, tv_gram, tv_posterior, ObservationHistory};
use crate::kernel::{decay_matrix, kernel_matrix, KernelSpec, Location};
use crate::linalg::cholesky_jittered;
use crate::rng::{stream_rng, Stream, StreamRng};

/// `C_1 = 8 / log(1 + 1 / noise_var)`.
pub fn c1(noise_var: f64) -> f64 {
    8.0 / (1.0 / noise_var).ln_1p()
}

/// Shared inputs of the regret bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    pub horizon: usize,
    /// Block length `N` (resetting) or split length `Ñ` (time-varying).
    pub block: usize,
    pub eps: f64,
    pub noise_var: f64,
    pub delta: f64,
    pub beta: f64,
    /// Tail constants of the reward bound, used by the resetting bound only.
    pub a0: f64,
    pub b0: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.block == 0 || self.block > self.horizon {
            return Err(Error::invalid("need 1 <= block <= horizon"));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::invalid("eps must lie in [0, 1)"));
        }
        if !(self.noise_var > 0.0 && self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(
                "noise variance must be positive and delta in (0, 1)",
            ));
        }
        if !(self.beta >= 0.0 && self.a0 > 0.0 && self.b0 > 0.0) {
            return Err(Error::invalid(
                "beta must be non-negative and a0, b0 positive",
            ));
        }
        Ok(())
    }
}

/// `sqrt(C_1 T beta gamma~_T) + 2`.
pub fn regret_bound_tv(inputs: &BoundInputs, gamma_tilde: f64) -> Result<f64> {
    inputs.validate()?;
    let t = inputs.horizon as f64;
    Ok((c1(inputs.noise_var) * t * inputs.beta * gamma_tilde).sqrt() + 2.0)
}

/// `sqrt(C_1 T beta (T/Ñ + 1)(gamma_Ñ + Ñ^3 eps)) + 2`.
pub fn regret_bound_tv_split(inputs: &BoundInputs, gamma_block: f64) -> Result<f64> {
    inputs.validate()?;
    let t = inputs.horizon as f64;
    let n = inputs.block as f64;
    let capacity = (t / n + 1.0) * (gamma_block + n.powi(3) * inputs.eps);
    Ok((c1(inputs.noise_var) * t * inputs.beta * capacity).sqrt() + 2.0)
}

/// Per-step mismatch penalty of the resetting algorithm.
pub fn psi(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let inv = 1.0 / inputs.noise_var;
    let n3e = (inputs.block as f64).powi(3) * inputs.eps;
    let t = inputs.horizon as f64;
    let log_term = (2.0 * (1.0 + inputs.a0) * PI * PI * t * t / (3.0 * inputs.delta)).ln();
    Ok((inputs.beta * (3.0 * inv + inv * inv) * n3e).sqrt()
        + (inv + inv * inv) * n3e * (2.0 + inputs.b0) * log_term.max(0.0).sqrt())
}

/// `sqrt(C_1 T beta (T/N + 1) gamma_N) + 2 + T psi`.
pub fn regret_bound_r(inputs: &BoundInputs, gamma_block: f64) -> Result<f64> {
    let t = inputs.horizon as f64;
    let n = inputs.block as f64;
    let penalty = psi(inputs)?;
    Ok(
        (c1(inputs.noise_var) * t * inputs.beta * (t / n + 1.0) * gamma_block).sqrt()
            + 2.0
            + t * penalty,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFamily {
    SquaredExponential,
    Matern { nu: f64, dim: usize },
}

/// Orders of growth of the two regret bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticRates {
    /// Exponent of `eps` in the linear term, time-varying algorithm.
    pub tv_exponent: f64,
    pub r_exponent: f64,
    pub tv: f64,
    pub r: f64,
}

/// `max{sqrt(T^{1+c}), T eps^alpha}` with `c = 0` for SE and
/// `c = d(d+1)/(2 nu + d(d+1))` for Matérn.
pub fn asymptotic_rates(family: RateFamily, horizon: usize, eps: f64) -> Result<AsymptoticRates> {
    if horizon == 0 || !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("need horizon >= 1 and eps in [0, 1]"));
    }
    let (c, tv_exponent, r_exponent) = match family {
        RateFamily::SquaredExponential => (0.0, 1.0 / 6.0, 1.0 / 8.0),
        RateFamily::Matern { nu, dim } => {
            if !(nu > 0.0) || dim == 0 {
                return Err(Error::invalid("Matérn rate needs nu > 0 and dim >= 1"));
            }
            let dd = (dim * (dim + 1)) as f64;
            let c = dd / (2.0 * nu + dd);
            (
                c,
                (1.0 - c) / (2.0 * (3.0 - c)),
                (1.0 - c) / (2.0 * (4.0 - c)),
            )
        }
    };
    let t = horizon as f64;
    let root = t.powf(0.5 * (1.0 + c));
    Ok(AsymptoticRates {
        tv_exponent,
        r_exponent,
        tv: root.max(t * eps.powf(tv_exponent)),
        r: root.max(t * eps.powf(r_exponent)),
    })
}

/// Outcome of one inequality check, `lhs <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
}

impl Check {
    /// Relative slack that absorbs floating-point rounding only.
    const ROUNDING: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.lhs <= self.rhs + Self::ROUNDING * self.rhs.abs().max(1.0)
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `||K∘D - K||_F <= Ñ^2 eps` on `Ñ = points.len()` samples at consecutive steps.
pub fn frobenius_bound_check(points: &[Location], eps: f64, kernel: &KernelSpec) -> Result<Check> {
    let k = kernel_matrix(kernel, points)?;
    let d = decay_matrix(points.len(), eps)?;
    let a = k.component_mul(&d) - &k;
    let n = points.len() as f64;
    Ok(Check {
        lhs: a.norm(),
        rhs: n * n * eps,
    })
}

/// Largest number of candidate multisets the exact `gamma` search will visit.
pub const MAX_ENUMERATION: u64 = 2_000_000;

/// Exact `gamma_n = max over n-multisets S of candidates of I(f; y_S)` for the
/// time-invariant model, by enumeration. Needs `n <= 8`.
pub fn gamma_exact(
    candidates: &[Location],
    n: usize,
    kernel: &KernelSpec,
    noise_var: f64,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Empty("gamma_exact needs candidates"));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let count = multiset_count(candidates.len() as u64, n as u64);
    if n > 8 || count > MAX_ENUMERATION {
        return Err(Error::Config(format!(
            "exact information capacity over {n}-sample sets of {} candidates needs {count} evaluations; limit is n <= 8 and {MAX_ENUMERATION} sets",
            candidates.len()
        )));
    }
    let gram = kernel_matrix(kernel, candidates)?;
    let mut idx = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        let sub = DMatrix::from_fn(n, n, |i, j| gram[(idx[i], idx[j])]);
        best = best.max(mutual_information(&sub, noise_var)?);
        // Next non-decreasing index tuple.
        let mut pos = n;
        while pos > 0 && idx[pos - 1] == candidates.len() - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        let v = idx[pos - 1];
        for slot in &mut idx[pos..] {
            *slot = v;
        }
    }
    Ok(best)
}

fn multiset_count(m: u64, n: u64) -> u64 {
    // C(m + n - 1, n), saturating.
    let mut acc: u64 = 1;
    for i in 0..n {
        acc = acc.saturating_mul(m + i) / (i + 1);
    }
    acc
}

/// `I~_T <= (T/Ñ + 1)(gamma_Ñ + Ñ^3 eps)` for the sequence `points` sampled at
/// steps `1..=T`, with `gamma_Ñ` computed exactly over `candidates`.
pub fn mi_split_bound_check(
    points: &[Location],
    candidates: &[Location],
    block: usize,
    eps: f64,
    noise_var: f64,
    kernel: &KernelSpec,
) -> Result<Check> {
    if block == 0 || block > points.len() {
        return Err(Error::invalid("split length must lie in 1..=T"));
    }
    let info = mutual_information(&tv_gram(points, kernel, eps)?, noise_var)?;
    let gamma = gamma_exact(candidates, block, kernel, noise_var)?;
    let t = points.len() as f64;
    let n = block as f64;
    Ok(Check {
        lhs: info,
        rhs: (t / n + 1.0) * (gamma + n.powi(3) * eps),
    })
}

/// Chain-rule split: `I~_T <= sum over consecutive blocks of I~_block`.
pub fn mi_chain_split_check(
    points: &[Location],
    block: usize,
    eps: f64,
    noise_var: f64,
    kernel: &KernelSpec,
) -> Result<Check> {
    if block == 0 {
        return Err(Error::invalid("block length must be positive"));
    }
    let lhs = mutual_information(&tv_gram(points, kernel, eps)?, noise_var)?;
    let mut rhs = 0.0;
    for chunk in points.chunks(block) {
        rhs += mutual_information(&tv_gram(chunk, kernel, eps)?, noise_var)?;
    }
    Ok(Check { lhs, rhs })
}

/// Both halves of the posterior-mismatch inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MismatchCheck {
    pub mean: Check,
    pub std_dev: Check,
}

impl MismatchCheck {
    pub fn passed(&self) -> bool {
        self.mean.passed() && self.std_dev.passed()
    }
}

/// Largest gaps between the time-varying and time-invariant posteriors over
/// `queries`, against `(s^-2 + s^-4) N^3 eps L` (mean, `L = max |y|`) and
/// `sqrt((3 s^-2 + s^-4) N^3 eps)` (standard deviation). Both posteriors
/// predict the step after the last sample.
pub fn mismatch_bounds_check(
    history: &ObservationHistory,
    kernel: &KernelSpec,
    eps: f64,
    queries: &[Location],
) -> Result<MismatchCheck> {
    let n = history.len() as f64;
    let inv = 1.0 / history.noise_var();
    let l_max = history
        .records()
        .iter()
        .map(|r| r.value.abs())
        .fold(0.0, f64::max);
    let (mut dmu, mut dsd) = (0.0f64, 0.0f64);
    for q in queries {
        let tv = tv_posterior(history, kernel, eps, q)?;
        let ti = ti_posterior(history, kernel, q)?;
        dmu = dmu.max((tv.mean - ti.mean).abs());
        dsd = dsd.max((tv.std_dev() - ti.std_dev()).abs());
    }
    let n3e = n.powi(3) * eps;
    Ok(MismatchCheck {
        mean: Check {
            lhs: dmu,
            rhs: (inv + inv * inv) * n3e * l_max,
        },
        std_dev: Check {
            lhs: dsd,
            rhs: ((3.0 * inv + inv * inv) * n3e).sqrt(),
        },
    })
}

/// Mean per-step regret of the full-information genie at one `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenieResult {
    pub eps: f64,
    pub mean_regret: f64,
    pub std_error: f64,
}

/// Plays `argmax f_{t-1}` at every step `t >= 2` and averages the regret of
/// steps `2..=T` over trials. Trial `i` uses the environment stream of
/// `(master_seed, i)`.
pub fn genie_baseline(
    prior: Arc<GpPrior>,
    eps_values: &[f64],
    horizon: usize,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<GenieResult>> {
    if horizon < 2 || trials == 0 {
        return Err(Error::invalid(
            "genie baseline needs horizon >= 2 and trials >= 1",
        ));
    }
    eps_values
        .iter()
        .map(|&eps| {
            let per_trial: Vec<Result<f64>> = (0..trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut env =
                        EnvState::sample_initial(prior.clone(), eps, 0.0, master_seed, trial)?;
                    let mut total = 0.0;
                    for _ in 2..=horizon {
                        let prev = argmax(env.values());
                        env.evolve()?;
                        total += env.instantaneous_regret(prev)?;
                    }
                    Ok(total / (horizon - 1) as f64)
                })
                .collect();
            let values = per_trial.into_iter().collect::<Result<Vec<f64>>>()?;
            let (mean, se) = mean_and_std_error(&values);
            Ok(GenieResult {
                eps,
                mean_regret: mean,
                std_error: se,
            })
        })
        .collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid(
            "log-log slope needs at least two positive pairs",
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// A failing randomized instance, reproducible from `(seed, instance)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub seed: u64,
    pub instance: u64,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub instances: usize,
    pub violations: Vec<Counterexample>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_points(rng: &mut StreamRng, n: usize, dim: usize) -> Vec<Location> {
    (0..n)
        .map(|_| Location::Coords((0..dim).map(|_| rng.random_range(0.0..1.0)).collect()))
        .collect()
}

fn random_kernel(rng: &mut StreamRng) -> KernelSpec {
    let l = rng.random_range(0.1..1.0);
    match rng.random_range(0..3) {
        0 => KernelSpec::squared_exponential(l),
        1 => KernelSpec::matern(l, 1.5),
        _ => KernelSpec::matern(l, 2.5),
    }
    .expect("lengthscale is positive")
}

fn run_suite<F>(seed: u64, instances: usize, check: F) -> Result<SuiteReport>
where
    F: Fn(&mut StreamRng) -> Result<Option<String>> + Sync,
{
    let outcomes: Vec<Result<Option<String>>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| check(&mut stream_rng(seed, i, Stream::Instance)))
        .collect();
    let mut violations = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        if let Some(description) = o? {
            violations.push(Counterexample {
                seed,
                instance: i as u64,
                description,
            });
        }
    }
    Ok(SuiteReport {
        instances,
        violations,
    })
}

/// Frobenius check on random instances with `Ñ <= 30`, `eps <= 0.2`.
pub fn frobenius_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    run_suite(seed, instances, |rng| {
        let n = rng.random_range(1..=30);
        let eps = rng.random_range(0.0..=0.2);
        let kernel = random_kernel(rng);
        let points = random_points(rng, n, 2);
        let c = frobenius_bound_check(&points, eps, &kernel)?;
        Ok((!c.passed())
            .then(|| format!("n={n} eps={eps} kernel={kernel:?} points={points:?} check={c:?}")))
    })
}

/// Noise variances drawn by the randomized information checks.
pub const SUITE_NOISE_RANGE: (f64, f64) = (0.01, 1.0);

/// Information-split check on random instances: 2 to 5 candidates, sequences
/// of length `T <= 40` drawn from them, `Ñ <= 6`, `eps <= 0.2`.
pub fn mi_split_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    run_suite(seed, instances, |rng| {
        let m = rng.random_range(2..=5);
        let candidates = random_points(rng, m, 2);
        let kernel = random_kernel(rng);
        let t = rng.random_range(1..=40);
        let block = rng.random_range(1..=t.min(6));
        let eps = rng.random_range(0.0..=0.2);
        let noise_var = rng.random_range(SUITE_NOISE_RANGE.0..=SUITE_NOISE_RANGE.1);
        let points: Vec<Location> = (0..t)
            .map(|_| candidates[rng.random_range(0..m)].clone())
            .collect();
        let c = mi_split_bound_check(&points, &candidates, block, eps, noise_var, &kernel)?;
        let chain = mi_chain_split_check(&points, block, eps, noise_var, &kernel)?;
        Ok((!(c.passed() && chain.passed())).then(|| {
            format!(
                "T={t} block={block} eps={eps} noise_var={noise_var} kernel={kernel:?} candidates={candidates:?} split={c:?} chain={chain:?}"
            )
        }))
    })
}

/// Posterior-mismatch check on random instances: `N <= 20`, `eps <= 0.1`,
/// responses simulated from the time-varying model.
pub fn mismatch_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    run_suite(seed, instances, |rng| {
        let n = rng.random_range(1..=20);
        let eps = rng.random_range(0.0..=0.1);
        let noise_var = rng.random_range(SUITE_NOISE_RANGE.0..=SUITE_NOISE_RANGE.1);
        let kernel = random_kernel(rng);
        let points = random_points(rng, n, 2);
        let mut cov = tv_gram(&points, &kernel, eps)?;
        for i in 0..n {
            cov[(i, i)] += noise_var;
        }
        let l = cholesky_jittered(&cov)?.l();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = l * z;
        let mut history = ObservationHistory::new(noise_var)?;
        for (p, v) in points.iter().zip(y.iter()) {
            history.push(p.clone(), *v);
        }
        let mut queries = random_points(rng, 10, 2);
        queries.extend(points.iter().cloned());
        let c = mismatch_bounds_check(&history, &kernel, eps, &queries)?;
        Ok((!c.passed()).then(|| {
            format!("N={n} eps={eps} noise_var={noise_var} kernel={kernel:?} check={c:?}")
        }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::DomainGrid;

    fn inputs() -> BoundInputs {
        BoundInputs {
            horizon: 100,
            block: 10,
            eps: 1e-4,
            noise_var: 1.0,
            delta: 0.1,
            beta: 5.0,
            a0: 1.0,
            b0: 1.0,
        }
    }

    #[test]
    fn tv_bound_examples() {
        let mut i = inputs();
        i.noise_var = 0.01;
        assert_eq!(regret_bound_tv(&i, 0.0).unwrap(), 2.0);
        assert!((c1(0.01) - 1.7335).abs() < 1e-4);
        let b = regret_bound_tv(&i, 10.0).unwrap();
        assert!((b - 95.10).abs() < 0.01, "{b}");
    }

    #[test]
    fn split_form_dominates_when_capacity_does() {
        let mut i = inputs();
        i.block = i.horizon;
        let (gamma_t, gamma_tilde) = (12.0, 11.0);
        assert!(gamma_tilde <= gamma_t + 1e6 * i.eps);
        assert!(
            regret_bound_tv_split(&i, gamma_t).unwrap()
                >= regret_bound_tv(&i, gamma_tilde).unwrap()
        );
    }

    #[test]
    fn r_bound_hand_instance() {
        // Written out term by term, sigma^2 = 1 so s^-2 = s^-4 = 1.
        let n3e = 1000.0 * 1e-4;
        let psi_hand = (5.0f64 * 4.0 * n3e).sqrt()
            + 2.0 * n3e * 3.0 * (4.0 * PI * PI * 10_000.0 / 0.3f64).ln().sqrt();
        let c1_hand = 8.0 / 2f64.ln();
        let want = (c1_hand * 100.0 * 5.0 * 11.0 * 3.0f64).sqrt() + 2.0 + 100.0 * psi_hand;
        let got = regret_bound_r(&inputs(), 3.0).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        assert!((psi(&inputs()).unwrap() - psi_hand).abs() < 1e-12);
    }

    #[test]
    fn r_bound_zero_eps_and_monotone() {
        let mut i = inputs();
        i.eps = 0.0;
        assert_eq!(psi(&i).unwrap(), 0.0);
        let base = regret_bound_r(&i, 3.0).unwrap();
        assert!((base - ((c1(1.0) * 100.0 * 5.0 * 11.0 * 3.0).sqrt() + 2.0)).abs() < 1e-12);
        let mut prev = base;
        for e in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2] {
            i.eps = e;
            let b = regret_bound_r(&i, 3.0).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn asymptotic_rate_examples() {
        let r = asymptotic_rates(RateFamily::SquaredExponential, 10_000, 0.0).unwrap();
        assert_eq!(r.tv, 100.0);
        assert_eq!(r.r, 100.0);
        let t = 1_000_000usize;
        let r = asymptotic_rates(RateFamily::SquaredExponential, t, 1.0 / t as f64).unwrap();
        assert!((r.tv - (t as f64).powf(5.0 / 6.0)).abs() < 1e-6 * r.tv);
        let m = asymptotic_rates(RateFamily::Matern { nu: 2.5, dim: 2 }, 1000, 0.01).unwrap();
        // c = 6/11: TV exponent (5/11) / (2 * 27/11) = 5/54, R exponent (5/11) / (2 * 38/11) = 5/76.
        assert!((m.tv_exponent - 5.0 / 54.0).abs() < 1e-15);
        assert!((m.r_exponent - 5.0 / 76.0).abs() < 1e-15);
        let root = 1000f64.powf(0.5 * 17.0 / 11.0);
        assert!((m.tv - root.max(1000.0 * 0.01f64.powf(5.0 / 54.0))).abs() < 1e-9);
    }

    #[test]
    fn frobenius_edges() {
        let pts: Vec<Location> = (0..5)
            .map(|i| Location::Coords(vec![i as f64 * 0.1]))
            .collect();
        let k = KernelSpec::squared_exponential(0.3).unwrap();
        assert_eq!(frobenius_bound_check(&pts, 0.0, &k).unwrap().lhs, 0.0);
        let c = frobenius_bound_check(&pts, 1.0, &k).unwrap();
        assert!(c.passed() && c.margin() > 0.0);
    }

    #[test]
    fn gamma_enumeration_matches_hand_cases() {
        let k = KernelSpec::squared_exponential(0.2).unwrap();
        let one = vec![Location::Coords(vec![0.0])];
        // Two copies of one point: 1/2 log(1 + 2 / s).
        let g = gamma_exact(&one, 2, &k, 0.1).unwrap();
        assert!((g - 0.5 * 21f64.ln()).abs() < 1e-12);
        let far = vec![Location::Coords(vec![0.0]), Location::Coords(vec![50.0])];
        let g = gamma_exact(&far, 2, &k, 0.1).unwrap();
        assert!((g - 11f64.ln()).abs() < 1e-12);
        assert_eq!(multiset_count(3, 4), 15);
        assert!(matches!(
            gamma_exact(&far, 9, &k, 0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mi_split_examples() {
        let k = KernelSpec::squared_exponential(0.3).unwrap();
        let cands: Vec<Location> = [0.0, 0.4, 0.9]
            .iter()
            .map(|&x| Location::Coords(vec![x]))
            .collect();
        let seq: Vec<Location> = (0..8).map(|i| cands[(i * 7 + 1) % 3].clone()).collect();
        let c = mi_split_bound_check(&seq, &cands, 4, 0.05, 0.1, &k).unwrap();
        assert!(c.passed(), "{c:?}");
        let full = mi_split_bound_check(&seq[..4], &cands, 4, 0.0, 0.1, &k).unwrap();
        assert!(full.passed() && full.margin() > 0.0);
        // The margin shrinks as eps grows only through the information term here.
        let lo = mi_split_bound_check(&seq, &cands, 4, 0.01, 0.1, &k).unwrap();
        let hi = mi_split_bound_check(&seq, &cands, 4, 0.2, 0.1, &k).unwrap();
        assert!(hi.lhs > lo.lhs);
    }

    #[test]
    fn mi_split_violation_is_reported_at_tiny_noise() {
        let k = KernelSpec::squared_exponential(0.3).unwrap();
        let cands = vec![Location::Coords(vec![0.5])];
        let seq = vec![cands[0].clone(); 199];
        let c = mi_split_bound_check(&seq, &cands, 4, 0.03, 1e-4, &k).unwrap();
        assert!(!c.passed());
        assert!(c.lhs > 560.0 && c.rhs < 370.0, "{c:?}");
    }

    #[test]
    fn mismatch_trivial_cases() {
        let k = KernelSpec::squared_exponential(0.3).unwrap();
        let mut h = ObservationHistory::new(0.1).unwrap();
        for (i, v) in [0.3, -0.8, 1.1].iter().enumerate() {
            h.push(Location::Coords(vec![i as f64 * 0.2]), *v);
        }
        let qs: Vec<Location> = (0..5)
            .map(|i| Location::Coords(vec![i as f64 * 0.15]))
            .collect();
        let c = mismatch_bounds_check(&h, &k, 0.0, &qs).unwrap();
        assert_eq!((c.mean.lhs, c.std_dev.lhs), (0.0, 0.0));
        // One sample: the prediction one step ahead is the static one shrunk by sqrt(1 - eps).
        let mut one = ObservationHistory::new(0.1).unwrap();
        one.push(Location::Coords(vec![0.0]), 0.9);
        let eps = 0.05;
        let q = Location::Coords(vec![0.0]);
        let c = mismatch_bounds_check(&one, &k, eps, &[q]).unwrap();
        let want = (1.0 - (1.0f64 - eps).sqrt()) * 0.9 / 1.1;
        assert!((c.mean.lhs - want).abs() < 1e-12);
        assert!(c.passed());
    }

    #[test]
    fn suites_pass_small() {
        assert!(frobenius_suite(1, 40).unwrap().passed());
        assert!(mi_split_suite(1, 40).unwrap().passed());
        assert!(mismatch_suite(1, 40).unwrap().passed());
    }

    #[test]
    fn genie_static_world_has_no_regret() {
        let grid = DomainGrid::regular(5, 2, 1.0).unwrap();
        let prior = Arc::new(
            GpPrior::from_grid(&grid, &KernelSpec::squared_exponential(0.3).unwrap()).unwrap(),
        );
        let r = genie_baseline(prior.clone(), &[0.0, 0.1], 20, 10, 3).unwrap();
        assert_eq!(r[0].mean_regret, 0.0);
        assert!(r[1].mean_regret > 0.0);
        assert!(genie_baseline(prior, &[0.1], 1, 10, 3).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.9)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 0.9).abs() < 1e-12);
    }
}
