use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::DenseMat;

/// Relative singular-value cutoff applied when `lambda == 0`.
pub const DEFAULT_RCOND: f64 = 1e-14;

/// Factorized ridge problem `min ||W S - Z||^2 + lambda ||W||_F^2`, reusable
/// across regularization strengths.
///
/// `S` (N x T) is never squared. The augmented matrix `[S^T | Z^T]` is
/// QR-factorized, which gives `S^T = Q R` together with `Q^T Z^T` in the
/// trailing columns of the triangular factor. An SVD of the small `R` then
/// yields the singular triplets of `S`, and every `lambda` is a diagonal
/// filter on those: `W = Z V diag(s / (s^2 + lambda)) U^T`.
#[derive(Debug, Clone)]
pub struct RidgeFactorization {
    /// `Z V` in the singular basis (D x k).
    projected_targets: DMatrix<f64>,
    singular_values: Vec<f64>,
    /// Left singular vectors of `S`, transposed (k x N).
    basis_t: DMatrix<f64>,
    rcond: f64,
}

impl RidgeFactorization {
    pub fn new(states: &DenseMat, targets: &DenseMat, rcond: f64) -> Result<Self> {
        let (n, t) = (states.rows(), states.cols());
        let d = targets.rows();
        if targets.cols() != t {
            return Err(Error::DimensionMismatch(format!(
                "states have {t} samples but targets have {}",
                targets.cols()
            )));
        }
        if t == 0 || n == 0 {
            return Err(Error::InsufficientData("ridge regression needs at least one sample".into()));
        }
        if !(rcond >= 0.0) {
            return Err(Error::InvalidConfig(format!("rcond must be >= 0, got {rcond}")));
        }
        // Row-major N x T storage is column-major T x N, so the augmented
        // T x (N + D) matrix is the two buffers back to back.
        let mut buf = Vec::with_capacity(t * (n + d));
        buf.extend_from_slice(states.data());
        buf.extend_from_slice(targets.data());
        let augmented = DMatrix::from_vec(t, n + d, buf);
        let r = augmented.qr().r();
        let rows = t.min(n);
        let r11 = r.view((0, 0), (rows, n)).into_owned();
        let qtz = r.view((0, n), (rows, d)).into_owned();
        let svd = r11.svd(true, true);
        let u = svd.u.ok_or(Error::NoConvergence)?;
        let v_t = svd.v_t.ok_or(Error::NoConvergence)?;
        Ok(RidgeFactorization {
            projected_targets: qtz.transpose() * u,
            singular_values: svd.singular_values.iter().copied().collect(),
            basis_t: v_t,
            rcond,
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Number of singular values kept by the `lambda = 0` cutoff.
    pub fn effective_rank(&self) -> usize {
        let cutoff = self.cutoff();
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    fn cutoff(&self) -> f64 {
        let smax = self.singular_values.iter().copied().fold(0.0, f64::max);
        self.rcond * smax
    }

    /// Readout weights (D x N) for the given regularization.
    pub fn solve(&self, lambda: f64) -> Result<DenseMat> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
        }
        let cutoff = self.cutoff();
        let filter = |s: f64| {
            if lambda == 0.0 {
                if s > cutoff && s > 0.0 {
                    1.0 / s
                } else {
                    0.0
                }
            } else {
                s / (s * s + lambda)
            }
        };
        let mut scaled = self.projected_targets.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            let f = filter(s);
            scaled.column_mut(j).scale_mut(f);
        }
        let w = scaled * &self.basis_t;
        let (d, n) = w.shape();
        let out = DenseMat::from_fn(d, n, |i, j| w[(i, j)]);
        if !out.is_finite() {
            return Err(Error::NoConvergence);
        }
        Ok(out)
    }
}

/// Ridge readout with the default `lambda = 0` cutoff.
pub fn ridge_solve(states: &DenseMat, targets: &DenseMat, lambda: f64) -> Result<DenseMat> {
    ridge_solve_with_rcond(states, targets, lambda, DEFAULT_RCOND)
}

pub fn ridge_solve_with_rcond(
    states: &DenseMat,
    targets: &DenseMat,
    lambda: f64,
    rcond: f64,
) -> Result<DenseMat> {
    RidgeFactorization::new(states, targets, rcond)?.solve(lambda)
}
