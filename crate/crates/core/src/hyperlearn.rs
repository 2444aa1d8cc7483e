//! Learning the forgetting rate `eps` by maximizing the marginal likelihood
//! of time-stamped training data under the time-varying GP model.
//!
//! Two routes evaluate the same objective. The dense route factors the full
//! `n x n` covariance `K∘D + s I` and accepts arbitrary stamps and locations.
//! The panel route handles complete panels (every location observed at every
//! stamp), where the covariance is the Kronecker product `D ⊗ K + s I` and
//! both factors can be eigendecomposed separately; this is what makes days of
//! thousands of readings tractable. Days are independent, so their
//! log-likelihoods add.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::environment::GpPrior;
use crate::error::{Error, Result};
use crate::kernel::{decay_matrix_for_times, decay_power, kernel_matrix, KernelSpec, Location};
use crate::linalg::cholesky_jittered;
use crate::rng::StreamRng;

/// Lower and upper limits of projected gradient ascent.
pub const ASCENT_LOWER: f64 = 1e-6;
pub const ASCENT_UPPER: f64 = 1.0 - 1e-6;

/// `d/d eps (1 - eps)^v = -v (1 - eps)^{v - 1}`.
pub fn decay_power_derivative(eps: f64, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        -v * (1.0 - eps).powf(v - 1.0)
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var.is_finite() && noise_var > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_var}"
        )))
    }
}

/// Time-stamped observations, optionally split into independent days.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    values: Vec<f64>,
    times: Vec<f64>,
    locations: Vec<Location>,
    days: Vec<usize>,
}

impl TrainingSet {
    pub fn new(values: Vec<f64>, times: Vec<f64>, locations: Vec<Location>) -> Result<Self> {
        let days = vec![0; values.len()];
        TrainingSet::with_days(values, times, locations, days)
    }

    /// Observations on different days are modelled as independent.
    pub fn with_days(
        values: Vec<f64>,
        times: Vec<f64>,
        locations: Vec<Location>,
        days: Vec<usize>,
    ) -> Result<Self> {
        let n = values.len();
        if times.len() != n || locations.len() != n || days.len() != n {
            return Err(Error::invalid("training columns differ in length"));
        }
        if n == 0 {
            return Err(Error::Empty("training set"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("training values must be finite"));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid(
                "time stamps must be finite and non-negative",
            ));
        }
        Ok(TrainingSet {
            values,
            times,
            locations,
            days,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Indices of each day's observations, days in ascending order.
    fn day_groups(&self) -> Vec<Vec<usize>> {
        let mut ids: Vec<usize> = self.days.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .map(|&d| (0..self.len()).filter(|&i| self.days[i] == d).collect())
            .collect()
    }

    /// `eps` is identifiable only if some day contains two distinct stamps.
    pub fn check_identifiable(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::Identifiability(
                "need at least two observations".into(),
            ));
        }
        let informative = self
            .day_groups()
            .iter()
            .any(|g| g.iter().any(|&i| self.times[i] != self.times[g[0]]));
        if informative {
            Ok(())
        } else {
            Err(Error::Identifiability(
                "every day has a single time stamp; the forgetting rate has no effect".into(),
            ))
        }
    }
}

struct DenseDay {
    y: DVector<f64>,
    gram: DMatrix<f64>,
    lags: DMatrix<f64>,
}

fn dense_days(data: &TrainingSet, kernel: &KernelSpec) -> Result<Vec<DenseDay>> {
    data.day_groups()
        .into_iter()
        .map(|g| {
            let locs: Vec<Location> = g.iter().map(|&i| data.locations[i].clone()).collect();
            let n = g.len();
            Ok(DenseDay {
                y: DVector::from_iterator(n, g.iter().map(|&i| data.values[i])),
                gram: kernel_matrix(kernel, &locs)?,
                lags: DMatrix::from_fn(n, n, |a, b| {
                    (data.times[g[a]] - data.times[g[b]]).abs() / 2.0
                }),
            })
        })
        .collect()
}

fn check_eps_closed(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")))
    }
}

/// `log p(y | eps) = -1/2 y' C^{-1} y - 1/2 log|C| - n/2 log 2 pi` with
/// `C = K∘D + noise_var I`, summed over independent days.
pub fn marginal_log_likelihood(
    data: &TrainingSet,
    kernel: &KernelSpec,
    noise_var: f64,
    eps: f64,
) -> Result<f64> {
    check_noise(noise_var)?;
    check_eps_closed(eps)?;
    let mut total = 0.0;
    for day in dense_days(data, kernel)? {
        let n = day.y.len();
        let mut c = day
            .gram
            .component_mul(&day.lags.map(|v| decay_power(eps, v)));
        for i in 0..n {
            c[(i, i)] += noise_var;
        }
        let f = cholesky_jittered(&c)?;
        let w = f.forward(&day.y);
        total += -0.5 * w.norm_squared() - 0.5 * f.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();
    }
    Ok(total)
}

/// `d/d eps log p = 1/2 tr((a a' - C^{-1}) (K∘D'))` with `a = C^{-1} y`.
pub fn mll_grad_eps(
    data: &TrainingSet,
    kernel: &KernelSpec,
    noise_var: f64,
    eps: f64,
) -> Result<f64> {
    check_noise(noise_var)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!(
            "gradient needs eps in [0, 1), got {eps}"
        )));
    }
    let mut total = 0.0;
    for day in dense_days(data, kernel)? {
        let n = day.y.len();
        let mut c = day
            .gram
            .component_mul(&day.lags.map(|v| decay_power(eps, v)));
        for i in 0..n {
            c[(i, i)] += noise_var;
        }
        let f = cholesky_jittered(&c)?;
        let alpha = f.solve(&day.y);
        let c_inv = f.chol.inverse();
        let dk = day
            .gram
            .component_mul(&day.lags.map(|v| decay_power_derivative(eps, v)));
        let mut tr = 0.0;
        for j in 0..n {
            for i in 0..n {
                tr += (alpha[i] * alpha[j] - c_inv[(i, j)]) * dk[(i, j)];
            }
        }
        total += 0.5 * tr;
    }
    Ok(total)
}

/// One day of a complete panel: `rows[a][b]` is the reading of location `b`
/// at stamp `times[a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelDay {
    pub times: Vec<f64>,
    pub rows: DMatrix<f64>,
}

impl PanelDay {
    pub fn new(times: Vec<f64>, rows: DMatrix<f64>) -> Result<Self> {
        if times.len() != rows.nrows() {
            return Err(Error::invalid("panel stamps and rows differ in length"));
        }
        if rows.is_empty() {
            return Err(Error::Empty("panel day"));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
            || rows.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid(
                "panel entries must be finite, stamps non-negative",
            ));
        }
        Ok(PanelDay { times, rows })
    }

    /// Flattens into a dense training set (row-major: stamp, then location).
    pub fn to_training(&self, day: usize) -> (Vec<f64>, Vec<f64>, Vec<Location>, Vec<usize>) {
        let (t, m) = self.rows.shape();
        let mut out = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for a in 0..t {
            for b in 0..m {
                out.0.push(self.rows[(a, b)]);
                out.1.push(self.times[a]);
                out.2.push(Location::Index(b));
                out.3.push(day);
            }
        }
        out
    }
}

/// Marginal likelihood of complete panels sharing one spatial Gram matrix.
#[derive(Clone, Debug)]
pub struct PanelLikelihood {
    days: Vec<PanelDay>,
    noise_var: f64,
    kappa: DVector<f64>,
    /// Each day's rows rotated into the spatial eigenbasis, `Y U_K`.
    rotated: Vec<DMatrix<f64>>,
    u_k: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl PanelLikelihood {
    pub fn new(gram: DMatrix<f64>, days: Vec<PanelDay>, noise_var: f64) -> Result<Self> {
        check_noise(noise_var)?;
        if days.is_empty() {
            return Err(Error::Empty("panel likelihood needs at least one day"));
        }
        if !gram.is_square() || days.iter().any(|d| d.rows.ncols() != gram.nrows()) {
            return Err(Error::invalid(
                "panel width must match the spatial Gram matrix",
            ));
        }
        let eig = SymmetricEigen::new(gram.clone());
        let rotated = days.iter().map(|d| &d.rows * &eig.eigenvectors).collect();
        Ok(PanelLikelihood {
            days,
            noise_var,
            kappa: eig.eigenvalues,
            rotated,
            u_k: eig.eigenvectors,
            gram,
        })
    }

    pub fn check_identifiable(&self) -> Result<()> {
        let informative = self
            .days
            .iter()
            .any(|d| d.times.iter().any(|t| *t != d.times[0]));
        if informative {
            Ok(())
        } else {
            Err(Error::Identifiability(
                "no day spans two distinct time stamps".into(),
            ))
        }
    }

    /// Returns the log-likelihood and, if requested, its derivative in `eps`.
    fn evaluate(&self, eps: f64, with_gradient: bool) -> Result<(f64, f64)> {
        check_eps_closed(eps)?;
        if with_gradient && eps >= 1.0 {
            return Err(Error::invalid("gradient needs eps < 1"));
        }
        let s = self.noise_var;
        let mut value = 0.0;
        let mut grad = 0.0;
        for (day, yk) in self.days.iter().zip(&self.rotated) {
            let d = decay_matrix_for_times(&day.times, eps)?;
            let eig = SymmetricEigen::new(d);
            let u_d = &eig.eigenvectors;
            let lambda = &eig.eigenvalues;
            let y_tilde = u_d.transpose() * yk;
            let (t, m) = y_tilde.shape();
            let mut scaled = DMatrix::zeros(t, m);
            let mut logdet = 0.0;
            let mut quad = 0.0;
            for b in 0..m {
                for a in 0..t {
                    let c = lambda[a] * self.kappa[b] + s;
                    if !(c > 0.0) {
                        return Err(Error::NotPositiveDefinite { max_jitter: 0.0 });
                    }
                    logdet += c.ln();
                    quad += y_tilde[(a, b)] * y_tilde[(a, b)] / c;
                    scaled[(a, b)] = y_tilde[(a, b)] / c;
                }
            }
            value += -0.5 * quad - 0.5 * logdet - 0.5 * (t * m) as f64 * (2.0 * PI).ln();
            if with_gradient {
                let d_prime = DMatrix::from_fn(t, t, |i, j| {
                    decay_power_derivative(eps, (day.times[i] - day.times[j]).abs() / 2.0)
                });
                let alpha = u_d * &scaled * self.u_k.transpose();
                let quad_term = (alpha.transpose() * &d_prime * &alpha)
                    .component_mul(&self.gram)
                    .sum();
                let p = u_d.transpose() * &d_prime * u_d;
                let mut trace_term = 0.0;
                for b in 0..m {
                    for a in 0..t {
                        trace_term += p[(a, a)] * self.kappa[b] / (lambda[a] * self.kappa[b] + s);
                    }
                }
                grad += 0.5 * (quad_term - trace_term);
            }
        }
        Ok((value, grad))
    }

    pub fn log_likelihood(&self, eps: f64) -> Result<f64> {
        Ok(self.evaluate(eps, false)?.0)
    }

    pub fn grad_eps(&self, eps: f64) -> Result<f64> {
        Ok(self.evaluate(eps, true)?.1)
    }
}

/// A scalar objective over `eps` that [`fit_eps`] can maximize.
pub trait EpsObjective: Sync {
    fn value(&self, eps: f64) -> Result<f64>;
    fn gradient(&self, eps: f64) -> Result<f64>;
    fn check_identifiable(&self) -> Result<()>;
}

/// Dense objective over arbitrary training data.
pub struct DenseObjective<'a> {
    pub data: &'a TrainingSet,
    pub kernel: &'a KernelSpec,
    pub noise_var: f64,
}

impl EpsObjective for DenseObjective<'_> {
    fn value(&self, eps: f64) -> Result<f64> {
        marginal_log_likelihood(self.data, self.kernel, self.noise_var, eps)
    }
    fn gradient(&self, eps: f64) -> Result<f64> {
        mll_grad_eps(self.data, self.kernel, self.noise_var, eps)
    }
    fn check_identifiable(&self) -> Result<()> {
        self.data.check_identifiable()
    }
}

impl EpsObjective for PanelLikelihood {
    fn value(&self, eps: f64) -> Result<f64> {
        self.log_likelihood(eps)
    }
    fn gradient(&self, eps: f64) -> Result<f64> {
        self.grad_eps(eps)
    }
    fn check_identifiable(&self) -> Result<()> {
        PanelLikelihood::check_identifiable(self)
    }
}

/// Search strategy for [`fit_eps`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Search {
    /// `points` evenly spaced values on `[0, 1]`, endpoints included.
    Grid { points: usize },
    /// Projected gradient ascent from `start` with backtracking.
    Ascent {
        start: f64,
        step: f64,
        iters: usize,
        tol: f64,
    },
    /// Grid search, then ascent from the best grid point.
    GridThenAscent {
        points: usize,
        step: f64,
        iters: usize,
        tol: f64,
    },
}

fn grid_search<O: EpsObjective + ?Sized>(objective: &O, points: usize) -> Result<f64> {
    if points < 2 {
        return Err(Error::invalid("grid search needs at least two points"));
    }
    let values: Vec<Result<(f64, f64)>> = (0..points)
        .into_par_iter()
        .map(|i| {
            let eps = i as f64 / (points - 1) as f64;
            objective.value(eps).map(|v| (eps, v))
        })
        .collect();
    let mut best = (0.0, f64::NEG_INFINITY);
    for r in values {
        let (eps, v) = r?;
        if v > best.1 {
            best = (eps, v);
        }
    }
    Ok(best.0)
}

fn ascent<O: EpsObjective + ?Sized>(
    objective: &O,
    start: f64,
    step: f64,
    iters: usize,
    tol: f64,
) -> Result<f64> {
    if !(step > 0.0 && tol > 0.0) {
        return Err(Error::invalid("ascent step and tolerance must be positive"));
    }
    let mut x = start.clamp(ASCENT_LOWER, ASCENT_UPPER);
    let mut fx = objective.value(x)?;
    let mut step = step;
    for _ in 0..iters {
        let g = objective.gradient(x)?;
        let mut moved = false;
        while step > tol * 1e-3 {
            let cand = (x + step * g).clamp(ASCENT_LOWER, ASCENT_UPPER);
            let fc = objective.value(cand)?;
            if fc >= fx && cand != x {
                let delta = (cand - x).abs();
                x = cand;
                fx = fc;
                step *= 2.0;
                moved = delta >= tol;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(x)
}

/// Maximizes the objective over `eps in [0, 1]`.
pub fn fit_eps_with<O: EpsObjective + ?Sized>(objective: &O, search: Search) -> Result<f64> {
    objective.check_identifiable()?;
    let eps = match search {
        Search::Grid { points } => grid_search(objective, points)?,
        Search::Ascent {
            start,
            step,
            iters,
            tol,
        } => ascent(objective, start, step, iters, tol)?,
        Search::GridThenAscent {
            points,
            step,
            iters,
            tol,
        } => {
            let start = grid_search(objective, points)?;
            let refined = ascent(objective, start, step, iters, tol)?;
            // The ascent clamps away from the endpoints; keep an endpoint if it wins.
            if objective.value(start)? > objective.value(refined)? {
                start
            } else {
                refined
            }
        }
    };
    Ok(eps.clamp(0.0, 1.0))
}

/// Fits `eps` to arbitrary training data through the dense route.
pub fn fit_eps(
    data: &TrainingSet,
    kernel: &KernelSpec,
    noise_var: f64,
    search: Search,
) -> Result<f64> {
    fit_eps_with(
        &DenseObjective {
            data,
            kernel,
            noise_var,
        },
        search,
    )
}

/// Simulates one day of the Markov GP model observed at every location:
/// `steps` stamps `0, 1, ...`, readings `f_t(x) + N(0, noise_var)`.
pub fn simulate_panel_day(
    prior: &GpPrior,
    eps: f64,
    noise_var: f64,
    steps: usize,
    rng: &mut StreamRng,
) -> Result<PanelDay> {
    check_eps_closed(eps)?;
    if steps == 0 {
        return Err(Error::invalid("a simulated day needs at least one step"));
    }
    let m = prior.n_arms();
    let (keep, fresh) = ((1.0 - eps).sqrt(), eps.sqrt());
    let mut f = prior.draw(rng);
    let mut rows = DMatrix::zeros(steps, m);
    for a in 0..steps {
        if a > 0 {
            let g = prior.draw(rng);
            for (fi, gi) in f.iter_mut().zip(&g) {
                *fi = keep * *fi + fresh * gi;
            }
        }
        for b in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            rows[(a, b)] = f[b] + noise_var.sqrt() * z;
        }
    }
    PanelDay::new((0..steps).map(|a| a as f64).collect(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_set(seed: u64, n: usize, distinct_times: bool) -> TrainingSet {
        let mut rng = stream_rng(seed, 0, Stream::Instance);
        let values = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let times = (0..n)
            .map(|i| {
                if distinct_times {
                    i as f64 + rng.random_range(0.0..0.9)
                } else {
                    3.0
                }
            })
            .collect();
        let locs = (0..n)
            .map(|_| Location::Coords(vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]))
            .collect();
        TrainingSet::new(values, times, locs).unwrap()
    }

    fn se() -> KernelSpec {
        KernelSpec::squared_exponential(0.4).unwrap()
    }

    #[test]
    fn single_point_hand_value() {
        let data =
            TrainingSet::new(vec![0.0], vec![0.0], vec![Location::Coords(vec![0.5])]).unwrap();
        for s in [0.01, 0.5, 2.0] {
            let want = -0.5 * (1.0f64 + s).ln() - 0.5 * (2.0 * PI).ln();
            let got = marginal_log_likelihood(&data, &se(), s, 0.2).unwrap();
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_eps_matches_standard_gp() {
        let data = random_set(3, 7, true);
        let s = 0.1;
        let mut c = kernel_matrix(&se(), data.locations()).unwrap();
        for i in 0..7 {
            c[(i, i)] += s;
        }
        let y = DVector::from_column_slice(data.values());
        let lu = c.clone().lu();
        let quad = y.dot(&lu.solve(&y).unwrap());
        let want = -0.5 * quad - 0.5 * lu.determinant().ln() - 3.5 * (2.0 * PI).ln();
        let got = marginal_log_likelihood(&data, &se(), s, 0.0).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn shared_stamp_gives_zero_gradient() {
        let data = random_set(4, 6, false);
        assert_eq!(mll_grad_eps(&data, &se(), 0.1, 0.3).unwrap(), 0.0);
        assert!(matches!(
            fit_eps(&data, &se(), 0.1, Search::Grid { points: 11 }),
            Err(Error::Identifiability(_))
        ));
    }

    #[test]
    fn two_point_gradient_hand_expansion() {
        let locs = vec![Location::Coords(vec![0.1]), Location::Coords(vec![0.5])];
        let data = TrainingSet::new(vec![0.7, -0.4], vec![1.0, 3.0], locs).unwrap();
        let (s, eps) = (0.2, 0.15);
        let k12 = (-0.16f64 / (2.0 * 0.16)).exp();
        let c12 = k12 * (1.0 - eps);
        let (a, b) = (1.0 + s, 1.0 + s);
        let det = a * b - c12 * c12;
        let alpha1 = (b * 0.7 - c12 * -0.4) / det;
        let alpha2 = (-c12 * 0.7 + a * -0.4) / det;
        let want = -k12 * (alpha1 * alpha2 + c12 / det);
        let got = mll_grad_eps(&data, &se(), s, eps).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn gradient_matches_finite_difference_on_six_points() {
        let data = random_set(9, 6, true);
        let (s, eps, h) = (0.05, 0.2, 1e-5);
        let fd = (marginal_log_likelihood(&data, &se(), s, eps + h).unwrap()
            - marginal_log_likelihood(&data, &se(), s, eps - h).unwrap())
            / (2.0 * h);
        let g = mll_grad_eps(&data, &se(), s, eps).unwrap();
        assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1e-8), "{g} vs {fd}");
    }

    fn small_panel(
        eps: f64,
        seed: u64,
        days: usize,
        steps: usize,
    ) -> (DMatrix<f64>, Vec<PanelDay>) {
        let pts: Vec<Location> = (0..5)
            .map(|i| Location::Coords(vec![i as f64 * 0.2]))
            .collect();
        let gram = kernel_matrix(&se(), &pts).unwrap();
        let prior = GpPrior::new(gram.clone()).unwrap();
        let mut rng = stream_rng(seed, 0, Stream::Environment);
        let d = (0..days)
            .map(|_| simulate_panel_day(&prior, eps, 0.05, steps, &mut rng).unwrap())
            .collect();
        (gram, d)
    }

    #[test]
    fn panel_route_matches_dense_route() {
        let (gram, days) = small_panel(0.1, 1, 2, 6);
        let kernel = KernelSpec::empirical(gram.clone(), 1.0).unwrap();
        let mut cols = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, d) in days.iter().enumerate() {
            let (v, t, l, g) = d.to_training(i);
            cols.0.extend(v);
            cols.1.extend(t);
            cols.2.extend(l);
            cols.3.extend(g);
        }
        let data = TrainingSet::with_days(cols.0, cols.1, cols.2, cols.3).unwrap();
        let panel = PanelLikelihood::new(gram, days, 0.05).unwrap();
        for eps in [0.0, 0.03, 0.4, 0.9] {
            let dense = marginal_log_likelihood(&data, &kernel, 0.05, eps).unwrap();
            let kron = panel.log_likelihood(eps).unwrap();
            assert!(
                (dense - kron).abs() < 1e-8 * dense.abs(),
                "eps={eps}: {dense} vs {kron}"
            );
            let gd = mll_grad_eps(&data, &kernel, 0.05, eps).unwrap();
            let gk = panel.grad_eps(eps).unwrap();
            assert!(
                (gd - gk).abs() < 1e-7 * gd.abs().max(1.0),
                "eps={eps}: {gd} vs {gk}"
            );
        }
    }

    #[test]
    fn grid_and_ascent_agree() {
        let (gram, days) = small_panel(0.2, 2, 3, 20);
        let panel = PanelLikelihood::new(gram, days, 0.05).unwrap();
        let grid = fit_eps_with(&panel, Search::Grid { points: 201 }).unwrap();
        let asc = fit_eps_with(
            &panel,
            Search::Ascent {
                start: 0.5,
                step: 1e-3,
                iters: 200,
                tol: 1e-7,
            },
        )
        .unwrap();
        assert!(
            (grid - asc).abs() <= 1.0 / 200.0,
            "grid {grid} ascent {asc}"
        );
        let both = fit_eps_with(
            &panel,
            Search::GridThenAscent {
                points: 21,
                step: 1e-3,
                iters: 100,
                tol: 1e-7,
            },
        )
        .unwrap();
        assert!((both - asc).abs() < 1e-3);
    }

    #[test]
    fn dense_fit_stays_in_range() {
        let data = random_set(12, 8, true);
        for search in [
            Search::Grid { points: 21 },
            Search::Ascent {
                start: 0.9,
                step: 0.1,
                iters: 50,
                tol: 1e-8,
            },
        ] {
            let e = fit_eps(&data, &se(), 0.1, search).unwrap();
            assert!((0.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = random_set(1, 3, true);
        assert!(marginal_log_likelihood(&data, &se(), 0.0, 0.1).is_err());
        assert!(marginal_log_likelihood(&data, &se(), 0.1, 1.5).is_err());
        assert!(mll_grad_eps(&data, &se(), 0.1, 1.0).is_err());
        assert!(TrainingSet::new(vec![1.0], vec![], vec![]).is_err());
        assert!(TrainingSet::new(vec![1.0], vec![-1.0], vec![Location::Index(0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn permutation_invariance(seed in 0u64..1000, eps in 0.0f64..1.0, shift in 1usize..7) {
            let data = random_set(seed, 7, true);
            let perm: Vec<usize> = (0..7).map(|i| (i + shift) % 7).collect();
            let permuted = TrainingSet::new(
                perm.iter().map(|&i| data.values()[i]).collect(),
                perm.iter().map(|&i| data.times()[i]).collect(),
                perm.iter().map(|&i| data.locations()[i].clone()).collect(),
            ).unwrap();
            let a = marginal_log_likelihood(&data, &se(), 0.1, eps).unwrap();
            let b = marginal_log_likelihood(&permuted, &se(), 0.1, eps).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn gradient_matches_finite_difference(seed in 0u64..10_000, eps in 0.01f64..0.5) {
            let data = random_set(seed, 6, true);
            let h = 1e-5;
            let fd = (marginal_log_likelihood(&data, &se(), 0.1, eps + h).unwrap()
                - marginal_log_likelihood(&data, &se(), 0.1, eps - h).unwrap()) / (2.0 * h);
            let g = mll_grad_eps(&data, &se(), 0.1, eps).unwrap();
            prop_assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1e-6), "{} vs {}", g, fd);
        }
    }
}
