//! Banded LU factorization and a shift-invert Arnoldi eigensolver.
//!
//! The finite-difference mode eigenproblem produces a real nonsymmetric
//! banded matrix; the few largest eigenvalues near a shift are extracted with
//! Arnoldi iteration on the shift-inverted operator, backed by an LAPACK-style
//! banded LU with partial pivoting.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Banded n x n matrix with `kl` subdiagonals and `ku` superdiagonals, stored
/// in band format with `kl` extra rows of fill-in headroom for the pivoted LU
/// (leading dimension 2 kl + ku + 1, column-major bands).
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    /// ab[j * ldab + (kl + ku + i - j)] holds A(i, j).
    ab: Vec<f64>,
    ldab: usize,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ab: vec![0.0; ldab * n], ldab }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[j * self.ldab + self.kl + self.ku + i - j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "({i},{j}) outside band");
        self.ab[j * self.ldab + self.kl + self.ku + i - j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "({i},{j}) outside band");
        self.ab[j * self.ldab + self.kl + self.ku + i - j] += v;
    }

    /// y = A x, using only entries inside the logical band.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let base = j * self.ldab + self.kl + self.ku;
            for i in lo..=hi {
                y[i] += self.ab[base + i - j] * xj;
            }
        }
    }

    /// In-place LU factorization with partial pivoting (dgbtrf layout).
    pub fn factorize(mut self) -> Result<BandedLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // superdiagonals incl. fill-in
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            // pivot search in column j over rows j..=min(j+kl, n-1)
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv; // index of A(j, j)
            let mut jp = 0usize;
            let mut amax = self.ab[col].abs();
            for p in 1..=km {
                let v = self.ab[col + p].abs();
                if v > amax {
                    amax = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if amax == 0.0 {
                return Err(Error::EigenNonConvergence {
                    iterations: j,
                    residual: 0.0,
                });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                // swap rows j and j+jp across columns j..=ju
                for col_j in j..=ju {
                    let a = col_j * ldab + kv + j - col_j;
                    self.ab.swap(a, a + jp);
                }
            }
            // compute multipliers
            let diag = self.ab[col];
            for p in 1..=km {
                self.ab[col + p] /= diag;
            }
            // rank-1 update of the trailing submatrix
            for col_j in (j + 1)..=ju {
                let a_jc = self.ab[col_j * ldab + kv + j - col_j];
                if a_jc != 0.0 {
                    let base = col_j * ldab + kv + j - col_j;
                    for p in 1..=km {
                        self.ab[base + p] -= self.ab[col + p] * a_jc;
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ldab, ab: self.ab, ipiv })
    }
}

/// Factored form of a banded matrix; solves A x = b by forward/back substitution.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        // forward: apply L^{-1} P
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let bj = b[j];
            if bj != 0.0 {
                for q in 1..=km {
                    b[j + q] -= self.ab[col + q] * bj;
                }
            }
        }
        // back: apply U^{-1}
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            b[j] /= self.ab[col];
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.ab[col + i - j] * bj;
                }
            }
        }
    }
}

/// One converged eigenpair of the original (unshifted) problem A x = lambda x.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Finds the `n_pairs` eigenvalues of `a` closest to `sigma` (and above all
/// others in shift-inverted magnitude) using Arnoldi iteration on
/// (A - sigma I)^{-1}, restarted with an enlarged Krylov space on failure.
///
/// Only real eigenpairs are returned; complex Ritz pairs are discarded (the
/// mode operator's guided eigenvalues are real).
pub fn shift_invert_arnoldi(
    a: &BandedMatrix,
    sigma: f64,
    n_pairs: usize,
    tol: f64,
    max_subspace: usize,
) -> Result<Vec<EigenPair>> {
    let n = a.n;
    let mut shifted = a.clone();
    for i in 0..n {
        shifted.add(i, i, -sigma);
    }
    let lu = shifted.factorize()?;

    let m_max = max_subspace.min(n);
    // deterministic pseudo-random start vector (no symmetry alignment)
    let mut v0: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 * 0.754877666 + 0.1).fract();
            2.0 * x - 1.0
        })
        .collect();
    normalize(&mut v0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut h = DMatrix::<f64>::zeros(m_max + 1, m_max);
    let mut m_used = 0usize;
    let mut w = vec![0.0f64; n];

    for j in 0..m_max {
        w.copy_from_slice(&basis[j]);
        lu.solve_in_place(&mut w);
        let w_scale = norm(&w);
        // modified Gram-Schmidt, one reorthogonalization pass
        for _pass in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(&w, q);
                if _pass == 0 {
                    h[(i, j)] = c;
                } else {
                    h[(i, j)] += c;
                }
                axpy(&mut w, q, -c);
            }
        }
        let beta = norm(&w);
        h[(j + 1, j)] = beta;
        m_used = j + 1;
        if beta < 1e-12 * w_scale {
            break; // invariant subspace found
        }
        let mut v = w.clone();
        v.iter_mut().for_each(|x| *x /= beta);
        basis.push(v);
        // check Ritz convergence periodically once enough pairs exist
        if m_used >= n_pairs + 2 && (m_used == m_max || m_used % 8 == 0) {
            if let Some(pairs) = try_extract(a, sigma, &basis, &h, m_used, n_pairs, tol) {
                return Ok(pairs);
            }
        }
    }
    try_extract(a, sigma, &basis, &h, m_used, n_pairs, tol).ok_or(Error::EigenNonConvergence {
        iterations: m_used,
        residual: f64::NAN,
    })
}

/// Ritz extraction: eigen-decompose the small Hessenberg block, lift the
/// dominant real Ritz vectors, verify residuals against the original matrix.
fn try_extract(
    a: &BandedMatrix,
    sigma: f64,
    basis: &[Vec<f64>],
    h: &DMatrix<f64>,
    m: usize,
    n_pairs: usize,
    tol: f64,
) -> Option<Vec<EigenPair>> {
    let hm = h.view((0, 0), (m, m)).into_owned();
    let schur = hm.clone().schur();
    let eigs = schur.complex_eigenvalues();
    // dominant |theta| of the inverted operator = closest to sigma
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| eigs[j].norm().partial_cmp(&eigs[i].norm()).unwrap());

    let n = a.n;
    let mut out = Vec::new();
    for &i in &idx {
        if out.len() == n_pairs {
            break;
        }
        let theta = eigs[i];
        if theta.im.abs() > 1e-10 * theta.norm() || theta.re == 0.0 {
            continue;
        }
        // Ritz vector via inverse iteration on the small matrix
        let y = small_eigvec(&hm, theta.re)?;
        let mut x = vec![0.0f64; n];
        for (c, q) in y.iter().zip(basis.iter()) {
            axpy(&mut x, q, *c);
        }
        normalize(&mut x);
        let lambda = sigma + 1.0 / theta.re;
        // residual ||A x - lambda x||
        let mut ax = vec![0.0f64; n];
        a.mul_vec(&x, &mut ax);
        let mut r2 = 0.0;
        for k in 0..n {
            let r = ax[k] - lambda * x[k];
            r2 += r * r;
        }
        let residual = r2.sqrt() / lambda.abs().max(1.0);
        if residual > tol {
            return None;
        }
        out.push(EigenPair { value: lambda, vector: x, residual });
    }
    if out.len() == n_pairs {
        out.sort_by(|p, q| q.value.partial_cmp(&p.value).unwrap());
        Some(out)
    } else {
        None
    }
}

/// Eigenvector of the small dense matrix for a known (approximate) real
/// eigenvalue, via a couple of inverse-iteration steps.
fn small_eigvec(hm: &DMatrix<f64>, theta: f64) -> Option<Vec<f64>> {
    let m = hm.nrows();
    let scale = hm.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let eps = 1e-10 * theta.abs().max(1e-4 * scale);
    let shifted = hm - DMatrix::identity(m, m) * (theta + eps);
    let lu = shifted.lu();
    let mut y = DMatrix::from_element(m, 1, 1.0 / (m as f64).sqrt());
    for _ in 0..3 {
        let solved = lu.solve(&y)?;
        let nrm = solved.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return None;
        }
        y = solved / nrm;
    }
    Some(y.column(0).iter().copied().collect())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn normalize(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

#[inline]
fn axpy(y: &mut [f64], x: &[f64], alpha: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> BandedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandedMatrix::zeros(n, kl, ku);
        for j in 0..n {
            for i in j.saturating_sub(ku)..=(j + kl).min(n - 1) {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
            m.add(j, j, 4.0); // keep it comfortably nonsingular
        }
        m
    }

    #[test]
    fn banded_lu_solves_random_system() {
        let n = 200;
        let m = random_banded(n, 3, 5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; n];
        m.mul_vec(&x_true, &mut b);
        let lu = m.factorize().unwrap();
        lu.solve_in_place(&mut b);
        let err: f64 = b.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "max error {err}");
    }

    #[test]
    fn banded_lu_handles_pivoting() {
        // small diagonal forces row swaps
        let mut m = BandedMatrix::zeros(4, 1, 1);
        m.set(0, 0, 1e-14);
        m.set(0, 1, 1.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 1.0);
        m.set(1, 2, 0.5);
        m.set(2, 1, 1.5);
        m.set(2, 2, -1.0);
        m.set(2, 3, 0.25);
        m.set(3, 2, 1.0);
        m.set(3, 3, 2.0);
        let x_true = [1.0, -2.0, 3.0, -4.0];
        let mut b = vec![0.0; 4];
        m.mul_vec(&x_true, &mut b);
        m.factorize().unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(x_true.iter()) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    /// 1-D Dirichlet Laplacian: eigenvalues are exactly known.
    #[test]
    fn arnoldi_recovers_laplacian_extremes() {
        let n = 400;
        let h = 1.0 / (n + 1) as f64;
        let mut m = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, -2.0 / (h * h));
            if i > 0 {
                m.set(i, i - 1, 1.0 / (h * h));
            }
            if i + 1 < n {
                m.set(i, i + 1, 1.0 / (h * h));
            }
        }
        // largest eigenvalues of -Laplacian operator are near zero (least
        // negative); exact: -4 sin^2(pi q h / 2)/h^2 for q = 1..n
        let exact = |q: usize| {
            let s = (std::f64::consts::PI * q as f64 * h / 2.0).sin();
            -4.0 * s * s / (h * h)
        };
        let pairs = shift_invert_arnoldi(&m, 10.0, 3, 1e-8, 60).unwrap();
        for (p, q) in pairs.iter().zip(1..) {
            let e = exact(q);
            assert!(
                (p.value - e).abs() < 1e-6 * e.abs(),
                "mode {q}: got {} want {e}",
                p.value
            );
            assert!(p.residual < 1e-8);
        }
    }

    #[test]
    fn arnoldi_eigenvector_satisfies_equation() {
        let n = 300;
        let mut m = BandedMatrix::zeros(n, 2, 2);
        // symmetric pentadiagonal with known structure
        for i in 0..n {
            m.set(i, i, (i as f64 * 0.01).sin() - 3.0);
            if i > 0 {
                m.set(i, i - 1, 1.0);
                m.set(i - 1, i, 1.0);
            }
            if i > 1 {
                m.set(i, i - 2, 0.3);
                m.set(i - 2, i, 0.3);
            }
        }
        let pairs = shift_invert_arnoldi(&m, 0.0, 2, 1e-9, 80).unwrap();
        for p in &pairs {
            let mut ax = vec![0.0; n];
            m.mul_vec(&p.vector, &mut ax);
            let mut worst: f64 = 0.0;
            for k in 0..n {
                worst = worst.max((ax[k] - p.value * p.vector[k]).abs());
            }
            assert!(worst < 1e-7, "residual {worst}");
        }
        assert!(pairs[0].value > pairs[1].value);
    }

    #[test]
    fn singular_matrix_reports_error() {
        let m = BandedMatrix::zeros(10, 1, 1);
        assert!(m.factorize().is_err());
    }
}
