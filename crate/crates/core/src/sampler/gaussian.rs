//! Draws from a multivariate normal given in information form.

use alloc::format;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative diagonal jitter tried, in order, when a precision matrix is
/// not numerically positive definite.
const JITTER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Cholesky factor of `a`, retrying with growing diagonal jitter.
/// `iteration` is only used for the error report.
pub fn factor(a: &DMatrix<f64>, iteration: usize) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let n = a.nrows().max(1);
    let scale =
        (a.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64).max(f64::MIN_POSITIVE);
    for eps in JITTER {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += eps * scale;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok(c);
        }
    }
    Err(Error::Numerical {
        iteration,
        message: format!("{n}x{n} precision matrix is not positive definite"),
    })
}

/// `N(Q⁻¹ b, Q⁻¹)` for a precision `Q` and linear term `b`.
#[derive(Debug, Clone)]
pub struct GaussianBlock {
    chol: Cholesky<f64, Dyn>,
    mean: DVector<f64>,
}

impl GaussianBlock {
    pub fn new(precision: &DMatrix<f64>, linear: &DVector<f64>, iteration: usize) -> Result<Self> {
        let chol = factor(precision, iteration)?;
        let mean = chol.solve(linear);
        Ok(GaussianBlock { chol, mean })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        // Q = L Lᵀ, so Lᵀ⁻¹ z has covariance Q⁻¹.
        let dev = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + dev
    }
}

/// Draw `Lᵀ⁻¹ z` with `z` standard normal, i.e. a zero-mean draw with
/// covariance `(L Lᵀ)⁻¹`.
pub(crate) fn centered_draw<R: Rng + ?Sized>(
    chol: &Cholesky<f64, Dyn>,
    rng: &mut R,
) -> DVector<f64> {
    let n = chol.l_dirty().nrows();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    chol.l_dirty()
        .tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a positive diagonal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moments_match_information_form() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_vec(alloc::vec![1.0, -1.0]);
        let block = GaussianBlock::new(&q, &b, 0).unwrap();
        let cov = q.clone().try_inverse().unwrap();
        let mean = &cov * &b;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mut s = DVector::zeros(2);
        let mut ss = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = block.draw(&mut rng);
            s += &x;
            ss += &x * x.transpose();
        }
        let m = s / n as f64;
        let c = ss / n as f64 - &m * m.transpose();
        assert!((m - mean).amax() < 0.01);
        assert!((c - cov).amax() < 0.01);
    }

    #[test]
    fn singular_matrix_is_jittered_or_reported() {
        let semi = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(factor(&semi, 0).is_ok());
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            factor(&neg, 7),
            Err(Error::Numerical { iteration: 7, .. })
        ));
    }
}
