//! Cholesky helpers shared by posterior inference, likelihoods and sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter tried in order before a factorization is declared failed.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// A Cholesky factor together with the diagonal jitter that was needed.
#[derive(Clone, Debug)]
pub struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl Factor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `L^{-1} b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut x);
        x
    }

    /// `log det(A)` of the factored matrix.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }
}

/// Factors a symmetric matrix, climbing [`JITTER_LADDER`] on failure.
pub fn cholesky_jittered(a: &DMatrix<f64>) -> Result<Factor> {
    cholesky_with_ladder(a, &JITTER_LADDER)
}

pub fn cholesky_with_ladder(a: &DMatrix<f64>, ladder: &[f64]) -> Result<Factor> {
    for &jitter in ladder {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            if chol
                .l_dirty()
                .diagonal()
                .iter()
                .all(|d| d.is_finite() && *d > 0.0)
            {
                return Ok(Factor { chol, jitter });
            }
        }
    }
    Err(Error::NotPositiveDefinite {
        max_jitter: ladder.last().copied().unwrap_or(0.0),
    })
}
