use rand::Rng;

use crate::error::{Error, Result};

use super::{dense_spectral_radius, SparseMat};

/// Matrices up to this dimension go straight to the dense eigensolver.
pub const DENSE_CUTOFF: usize = 64;

const REL_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

/// Largest eigenvalue magnitude of `a`.
///
/// Large matrices use a two-vector subspace iteration: each sweep applies `a`
/// to an orthonormal pair, and the estimate is the largest modulus among the
/// eigenvalues of the projected 2x2 matrix. Tracking a pair lets the iteration
/// converge when the dominant eigenvalues form a complex-conjugate pair or a
/// `±r` pair, where single-vector power iteration oscillates. Small matrices,
/// and large ones where the iteration stalls, use the dense QR eigensolver.
pub fn spectral_radius<R: Rng + ?Sized>(a: &SparseMat, rng: &mut R) -> Result<f64> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch("spectral radius of an empty matrix".into()));
    }
    if a.nnz() == 0 {
        return Ok(0.0);
    }
    if n <= DENSE_CUTOFF {
        return dense_spectral_radius(&a.to_dense());
    }
    match subspace_iteration(a, rng) {
        Some(r) => Ok(r),
        None => dense_spectral_radius(&a.to_dense()),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Make `v` orthonormal to unit vector `u`; re-draw it if it collapses.
fn orthonormalize_against<R: Rng + ?Sized>(u: &[f64], v: &mut [f64], rng: &mut R) {
    for _ in 0..4 {
        let c = dot(u, v);
        v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        let c = dot(u, v);
        v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        if normalize(v) > 1e-300 {
            return;
        }
        v.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
    }
}

fn max_modulus_2x2(h: [[f64; 2]; 2]) -> f64 {
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc < 0.0 {
        det.abs().sqrt()
    } else {
        let s = disc.sqrt();
        (0.5 * tr + s).abs().max((0.5 * tr - s).abs())
    }
}

fn subspace_iteration<R: Rng + ?Sized>(a: &SparseMat, rng: &mut R) -> Option<f64> {
    let n = a.dim();
    let mut v1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut v2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v1);
    orthonormalize_against(&v1, &mut v2, rng);
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut previous = f64::NAN;
    let mut settled = 0;
    for _ in 0..MAX_ITERS {
        w1.iter_mut().for_each(|x| *x = 0.0);
        w2.iter_mut().for_each(|x| *x = 0.0);
        a.matvec_add_into(&v1, &mut w1);
        a.matvec_add_into(&v2, &mut w2);
        let h = [[dot(&v1, &w1), dot(&v1, &w2)], [dot(&v2, &w1), dot(&v2, &w2)]];
        let estimate = max_modulus_2x2(h);
        if !estimate.is_finite() {
            return None;
        }
        if (estimate - previous).abs() <= REL_TOL * estimate {
            settled += 1;
            if settled == 3 {
                return Some(estimate);
            }
        } else {
            settled = 0;
        }
        previous = estimate;
        std::mem::swap(&mut v1, &mut w1);
        std::mem::swap(&mut v2, &mut w2);
        if normalize(&mut v1) == 0.0 {
            // a maps the whole iterate to zero: nilpotent along this orbit
            v1.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            normalize(&mut v1);
        }
        orthonormalize_against(&v1, &mut v2, rng);
    }
    None
}

/// `a` scaled so its spectral radius equals `target`. A zero target yields
/// the zero matrix.
pub fn rescale_to_radius<R: Rng + ?Sized>(a: &SparseMat, target: f64, rng: &mut R) -> Result<SparseMat> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidConfig(format!("target radius must be >= 0, got {target}")));
    }
    if target == 0.0 {
        return Ok(SparseMat::zeros(a.dim()));
    }
    let radius = spectral_radius(a, rng)?;
    if radius == 0.0 {
        return Err(Error::ZeroRadiusInput);
    }
    Ok(a.scaled(target / radius))
}
