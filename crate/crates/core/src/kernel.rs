//! Spatial kernels and the temporal decay factors of the Markov GP model.
//!
//! The time-varying covariance between `f_s(x)` and `f_t(x')` is
//! `(1 - eps)^{|s - t| / 2} k(x, x')`, so every time-varying Gram matrix is
//! the Hadamard product of a spatial Gram matrix with a [`decay_matrix`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Tolerance on the smallest eigenvalue of an empirical kernel matrix.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// A point of the decision domain.
///
/// Stationary kernels work on coordinates; empirical kernels are defined on
/// a finite indexed set of sites.
#[derive(Clone, Debug, PartialEq)]
pub enum Location {
    Coords(Vec<f64>),
    Index(usize),
}

impl From<Vec<f64>> for Location {
    fn from(v: Vec<f64>) -> Self {
        Location::Coords(v)
    }
}

impl From<&[f64]> for Location {
    fn from(v: &[f64]) -> Self {
        Location::Coords(v.to_vec())
    }
}

impl From<usize> for Location {
    fn from(i: usize) -> Self {
        Location::Index(i)
    }
}

/// Spatial covariance function with unit prior variance bound.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    SquaredExponential { lengthscale: f64 },
    Matern { lengthscale: f64, nu: f64 },
    Empirical(EmpiricalKernel),
}

/// Covariance matrix over a finite indexed domain.
///
/// Always symmetric, with diagonal in `(0, 1]` and smallest eigenvalue at
/// least `-PSD_TOLERANCE`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalKernel {
    cov: DMatrix<f64>,
}

impl EmpiricalKernel {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn len(&self) -> usize {
        self.cov.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.cov.nrows() == 0
    }
}

impl KernelSpec {
    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        check_positive("lengthscale", lengthscale)?;
        Ok(KernelSpec::SquaredExponential { lengthscale })
    }

    pub fn matern(lengthscale: f64, nu: f64) -> Result<Self> {
        check_positive("lengthscale", lengthscale)?;
        check_positive("nu", nu)?;
        Ok(KernelSpec::Matern { lengthscale, nu })
    }

    /// Builds an empirical kernel from a raw covariance estimate.
    ///
    /// The matrix is symmetrized as `(A + A^T) / 2` and rescaled so that its
    /// largest diagonal entry equals `variance_bound`.
    pub fn empirical(matrix: DMatrix<f64>, variance_bound: f64) -> Result<Self> {
        if !(variance_bound > 0.0 && variance_bound <= 1.0) {
            return Err(Error::invalid(format!(
                "variance bound must lie in (0, 1], got {variance_bound}"
            )));
        }
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "empirical covariance must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "empirical covariance has non-finite entries",
            ));
        }
        let mut cov = (&matrix + matrix.transpose()) * 0.5;
        let max_diag = cov.diagonal().max();
        if max_diag <= 0.0 {
            return Err(Error::invalid(
                "empirical covariance has no positive variance",
            ));
        }
        cov *= variance_bound / max_diag;
        if let Some(i) = (0..cov.nrows()).find(|&i| cov[(i, i)] <= 0.0) {
            return Err(Error::invalid(format!(
                "empirical covariance diagonal entry {i} is not positive"
            )));
        }
        let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::invalid(format!(
                "empirical covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(KernelSpec::Empirical(EmpiricalKernel { cov }))
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self, KernelSpec::Empirical(_))
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &Location, y: &Location) -> Result<f64> {
        match (self, x, y) {
            (KernelSpec::Empirical(e), Location::Index(i), Location::Index(j)) => {
                let n = e.len();
                if *i >= n {
                    return Err(Error::IndexOutOfRange { index: *i, size: n });
                }
                if *j >= n {
                    return Err(Error::IndexOutOfRange { index: *j, size: n });
                }
                Ok(e.cov[(*i, *j)])
            }
            (KernelSpec::Empirical(_), _, _) => Err(Error::LocationMismatch(
                "empirical kernels take index locations",
            )),
            (_, Location::Coords(a), Location::Coords(b)) => {
                if a.len() != b.len() {
                    return Err(Error::invalid(format!(
                        "dimension mismatch: {} vs {}",
                        a.len(),
                        b.len()
                    )));
                }
                Ok(self.eval_distance(euclidean(a, b)))
            }
            _ => Err(Error::LocationMismatch(
                "stationary kernels take coordinate locations",
            )),
        }
    }

    /// Evaluates a stationary kernel at Euclidean distance `r`.
    ///
    /// Panics if called on an empirical kernel.
    pub fn eval_distance(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::SquaredExponential { lengthscale } => {
                let z = r / lengthscale;
                (-0.5 * z * z).exp()
            }
            KernelSpec::Matern { lengthscale, nu } => matern(r, lengthscale, nu),
            KernelSpec::Empirical(_) => panic!("eval_distance on an empirical kernel"),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn matern(r: f64, lengthscale: f64, nu: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let s = r / lengthscale;
    if nu == 0.5 {
        (-s).exp()
    } else if nu == 1.5 {
        let z = 3f64.sqrt() * s;
        (1.0 + z) * (-z).exp()
    } else if nu == 2.5 {
        let z = 5f64.sqrt() * s;
        (1.0 + z + z * z / 3.0) * (-z).exp()
    } else {
        matern_general(r, lengthscale, nu)
    }
}

/// Matérn covariance through the modified Bessel function of the second kind:
/// `2^{1-nu} / Gamma(nu) * z^nu * K_nu(z)` with `z = sqrt(2 nu) r / l`.
pub(crate) fn matern_general(r: f64, lengthscale: f64, nu: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * r / lengthscale;
    let log_k =
        (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln() + ln_bessel_k(nu, z);
    log_k.exp().min(1.0)
}

/// `ln K_nu(z)` for `z > 0` from `K_nu(z) = \int_0^inf exp(-z cosh t) cosh(nu t) dt`.
///
/// The integrand decays double-exponentially, so the trapezoid rule on a
/// truncated range converges geometrically in the step size.
pub(crate) fn ln_bessel_k(nu: f64, z: f64) -> f64 {
    debug_assert!(z > 0.0);
    // exp(-z (cosh t - 1)) cosh(nu t) <= exp(-40) beyond t_max.
    let mut t_max: f64 = 1.0;
    while z * (t_max.cosh() - 1.0) - nu * t_max < 40.0 + std::f64::consts::LN_2 {
        t_max += 0.5;
    }
    let n = ((t_max / 0.01).ceil() as usize).max(200);
    let h = t_max / n as f64;
    let f = |t: f64| (-z * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut sum = 0.5 * (f(0.0) + f(t_max));
    for i in 1..n {
        sum += f(i as f64 * h);
    }
    -z + (sum * h).ln()
}

/// `(1 - eps)^v` for a real exponent `v >= 0`, with the endpoints special-cased.
pub fn decay_power(eps: f64, v: f64) -> f64 {
    if v == 0.0 || eps == 0.0 {
        1.0
    } else if eps >= 1.0 {
        0.0
    } else {
        (v * (-eps).ln_1p()).exp()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")))
    }
}

/// Spatial Gram matrix `[k(x_i, x_j)]`.
pub fn kernel_matrix(spec: &KernelSpec, points: &[Location]) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::Empty("kernel_matrix needs at least one point"));
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(&points[i], &points[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-covariance vector `[k(x_i, x)]_i`.
pub fn kernel_vector(spec: &KernelSpec, points: &[Location], x: &Location) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(points.len());
    for (i, p) in points.iter().enumerate() {
        v[i] = spec.eval(p, x)?;
    }
    Ok(v)
}

/// `D[i][j] = (1 - eps)^{|i - j| / 2}` for `i, j = 1..t`.
pub fn decay_matrix(t: usize, eps: f64) -> Result<DMatrix<f64>> {
    check_eps(eps)?;
    if t == 0 {
        return Err(Error::invalid("decay matrix size must be at least 1"));
    }
    Ok(DMatrix::from_fn(t, t, |i, j| {
        decay_power(eps, i.abs_diff(j) as f64 / 2.0)
    }))
}

/// `d[i] = (1 - eps)^{(t + 1 - i) / 2}` for `i = 1..t`: the decay between each
/// of `t` samples and a prediction one step after the last sample.
pub fn decay_vector(t: usize, eps: f64) -> Result<DVector<f64>> {
    check_eps(eps)?;
    if t == 0 {
        return Err(Error::invalid("decay vector length must be at least 1"));
    }
    Ok(DVector::from_fn(t, |i, _| {
        decay_power(eps, (t - i) as f64 / 2.0)
    }))
}

/// Decay matrix for arbitrary real time stamps, `(1 - eps)^{|t_i - t_j| / 2}`.
pub fn decay_matrix_for_times(times: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    check_eps(eps)?;
    let n = times.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        decay_power(eps, (times[i] - times[j]).abs() / 2.0)
    }))
}
