//! Eigenvalues of a small dense real matrix: balancing, reduction to upper
//! Hessenberg form by stabilized elementary similarity transforms, then
//! Francis double-shift QR iteration.

use crate::error::{Error, Result};

use super::DenseMat;

const RADIX: f64 = 2.0;
const MAX_ITS_PER_EIGENVALUE: usize = 60;

/// One-based square working array, so the index arithmetic of the classic
/// formulation can be kept verbatim.
struct Work {
    n: usize,
    a: Vec<f64>,
}

impl Work {
    fn new(m: &DenseMat) -> Self {
        let n = m.rows();
        let mut a = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[(i + 1) * (n + 1) + j + 1] = m.get(i, j);
            }
        }
        Work { n, a }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let n = self.n;
        &mut self.a[i * (n + 1) + j]
    }

    fn swap(&mut self, (i1, j1): (usize, usize), (i2, j2): (usize, usize)) {
        let n = self.n;
        self.a.swap(i1 * (n + 1) + j1, i2 * (n + 1) + j2);
    }

    fn balance(&mut self) {
        let n = self.n;
        let sqrdx = RADIX * RADIX;
        let mut done = false;
        while !done {
            done = true;
            for i in 1..=n {
                let mut c = 0.0;
                let mut r = 0.0;
                for j in 1..=n {
                    if j != i {
                        c += self.at(j, i).abs();
                        r += self.at(i, j).abs();
                    }
                }
                if c != 0.0 && r != 0.0 {
                    let mut g = r / RADIX;
                    let mut f = 1.0;
                    let s = c + r;
                    while c < g {
                        f *= RADIX;
                        c *= sqrdx;
                    }
                    g = r * RADIX;
                    while c > g {
                        f /= RADIX;
                        c /= sqrdx;
                    }
                    if (c + r) / f < 0.95 * s {
                        done = false;
                        let g = 1.0 / f;
                        for j in 1..=n {
                            *self.at_mut(i, j) *= g;
                        }
                        for j in 1..=n {
                            *self.at_mut(j, i) *= f;
                        }
                    }
                }
            }
        }
    }

    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        for m in 2..n {
            let mut x: f64 = 0.0;
            let mut pivot = m;
            for j in m..=n {
                if self.at(j, m - 1).abs() > x.abs() {
                    x = self.at(j, m - 1);
                    pivot = j;
                }
            }
            if pivot != m {
                for j in (m - 1)..=n {
                    self.swap((pivot, j), (m, j));
                }
                for j in 1..=n {
                    self.swap((j, pivot), (j, m));
                }
            }
            if x != 0.0 {
                for i in (m + 1)..=n {
                    let mut y = self.at(i, m - 1);
                    if y != 0.0 {
                        y /= x;
                        *self.at_mut(i, m - 1) = y;
                        for j in m..=n {
                            let v = self.at(m, j);
                            *self.at_mut(i, j) -= y * v;
                        }
                        for j in 1..=n {
                            let v = self.at(j, i);
                            *self.at_mut(j, m) += y * v;
                        }
                    }
                }
            }
        }
        // discard the stored multipliers below the subdiagonal
        for i in 1..=n {
            for j in 1..i.saturating_sub(1) {
                *self.at_mut(i, j) = 0.0;
            }
        }
    }

    /// Eigenvalues of the Hessenberg matrix as `(re, im)` pairs.
    fn hqr(&mut self) -> Result<Vec<(f64, f64)>> {
        let n = self.n;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];
        let mut anorm = 0.0;
        for i in 1..=n {
            for j in (i.max(2) - 1)..=n {
                anorm += self.at(i, j).abs();
            }
        }
        let mut nn = n;
        let mut t = 0.0;
        while nn >= 1 {
            let mut its = 0;
            loop {
                // look for a single small subdiagonal element
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.at(l - 1, l - 1).abs() + self.at(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.at(l, l - 1).abs() + s == s {
                        *self.at_mut(l, l - 1) = 0.0;
                        break;
                    }
                    l -= 1;
                }
                let l = l.max(1);
                let mut x = self.at(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.at(nn - 1, nn - 1);
                let mut w = self.at(nn, nn - 1) * self.at(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                    break;
                }
                if its == MAX_ITS_PER_EIGENVALUE {
                    return Err(Error::NoConvergence);
                }
                if its > 0 && its % 10 == 0 {
                    // exceptional shift
                    t += x;
                    for i in 1..=nn {
                        *self.at_mut(i, i) -= x;
                    }
                    let s = self.at(nn, nn - 1).abs() + self.at(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;
                // look for two consecutive small subdiagonal elements
                let mut m = nn - 2;
                let (mut p, mut q, mut r);
                let mut z;
                loop {
                    z = self.at(m, m);
                    r = x - z;
                    let s = y - z;
                    p = (r * s - w) / self.at(m + 1, m) + self.at(m, m + 1);
                    q = self.at(m + 1, m + 1) - z - r - s;
                    r = self.at(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = self.at(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs()
                        * (self.at(m - 1, m - 1).abs() + z.abs() + self.at(m + 1, m + 1).abs());
                    if u + v == v {
                        break;
                    }
                    m -= 1;
                }
                for i in (m + 2)..=nn {
                    *self.at_mut(i, i - 2) = 0.0;
                    if i != m + 2 {
                        *self.at_mut(i, i - 3) = 0.0;
                    }
                }
                // double QR step on rows l..nn, columns m..nn
                let mut k = m;
                while k < nn {
                    if k != m {
                        p = self.at(k, k - 1);
                        q = self.at(k + 1, k - 1);
                        r = 0.0;
                        if k != nn - 1 {
                            r = self.at(k + 2, k - 1);
                        }
                        x = p.abs() + q.abs() + r.abs();
                        if x != 0.0 {
                            p /= x;
                            q /= x;
                            r /= x;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().copysign(p);
                    if s != 0.0 {
                        if k == m {
                            if l != m {
                                *self.at_mut(k, k - 1) = -self.at(k, k - 1);
                            }
                        } else {
                            *self.at_mut(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for j in k..=nn {
                            let mut pp = self.at(k, j) + q * self.at(k + 1, j);
                            if k != nn - 1 {
                                pp += r * self.at(k + 2, j);
                                *self.at_mut(k + 2, j) -= pp * z;
                            }
                            *self.at_mut(k + 1, j) -= pp * y;
                            *self.at_mut(k, j) -= pp * x;
                        }
                        let mmin = nn.min(k + 3);
                        for i in l..=mmin {
                            let mut pp = x * self.at(i, k) + y * self.at(i, k + 1);
                            if k != nn - 1 {
                                pp += z * self.at(i, k + 2);
                                *self.at_mut(i, k + 2) -= pp * r;
                            }
                            *self.at_mut(i, k + 1) -= pp * q;
                            *self.at_mut(i, k) -= pp;
                        }
                    }
                    k += 1;
                }
            }
        }
        Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
    }
}

/// All eigenvalues of a square dense matrix as `(re, im)` pairs, unordered.
pub fn dense_eigenvalues(m: &DenseMat) -> Result<Vec<(f64, f64)>> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == 0 {
        return Ok(Vec::new());
    }
    if !m.is_finite() {
        return Err(Error::NoConvergence);
    }
    let mut work = Work::new(m);
    work.balance();
    work.reduce_to_hessenberg();
    work.hqr()
}

pub fn dense_spectral_radius(m: &DenseMat) -> Result<f64> {
    Ok(dense_eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_moduli(m: &DenseMat) -> Vec<f64> {
        let mut v: Vec<f64> = dense_eigenvalues(m)
            .unwrap()
            .into_iter()
            .map(|(a, b)| a.hypot(b))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn diagonal_and_triangular() {
        let d = DenseMat::from_fn(3, 3, |i, j| if i == j { [2.0, -3.0, 0.5][i] } else { 0.0 });
        assert_eq!(sorted_moduli(&d), vec![0.5, 2.0, 3.0]);
        let u = DenseMat::from_fn(4, 4, |i, j| if j >= i { (i + j + 1) as f64 } else { 0.0 });
        let got = sorted_moduli(&u);
        for (g, e) in got.iter().zip([1.0, 3.0, 5.0, 7.0]) {
            assert!((g - e).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn rotation_has_complex_pair() {
        let (c, s) = (0.6_f64, 0.8_f64);
        let r = DenseMat::new(2, 2, vec![2.0 * c, -2.0 * s, 2.0 * s, 2.0 * c]).unwrap();
        let eig = dense_eigenvalues(&r).unwrap();
        for (re, im) in eig {
            assert!((re - 1.2).abs() < 1e-12);
            assert!((im.abs() - 1.6).abs() < 1e-12);
        }
    }

    #[test]
    fn companion_matrix_roots() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let c = DenseMat::new(3, 3, vec![6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let got = sorted_moduli(&c);
        for (g, e) in got.iter().zip([1.0, 2.0, 3.0]) {
            assert!((g - e).abs() < 1e-10, "{got:?}");
        }
    }

    #[test]
    fn nilpotent_is_zero() {
        let m = DenseMat::from_fn(5, 5, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        assert_eq!(dense_spectral_radius(&m).unwrap(), 0.0);
    }
}
