//! Small dense symmetric linear algebra: Jacobi eigendecomposition and the
//! Moore-Penrose pseudo-inverse built on it.
//!
//! For a symmetric matrix the eigendecomposition `A = V diag(l) V^T` is also
//! a singular value decomposition with singular values `|l|`, so the
//! pseudo-inverse keeps the eigenpairs with `|l| > rcond * max|l|` and
//! inverts them. Matrices are dense row-major `n * n` slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};

const MAX_SWEEPS: usize = 64;

/// Eigenpairs of a symmetric matrix. `vectors` is row-major with the
/// eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotConverged;

/// Cyclic Jacobi eigendecomposition of the symmetric matrix `a`.
///
/// Only the upper triangle is read. Sweeps continue until every
/// off-diagonal entry is either rotated away or too small to move the
/// diagonal it couples.
pub fn sym_eigen(a: &[f64], n: usize) -> Result<SymEigen, NotConverged> {
    assert_eq!(a.len(), n * n);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            m[i * n + j] = a[i * n + j];
            m[j * n + i] = a[i * n + j];
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return Ok(SymEigen { n, values: m, vectors: v });
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += abs(m[i * n + j]);
            }
        }
        if off == 0.0 {
            return Ok(finish(n, &m, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Rotations that cannot change either diagonal entry are dropped.
                let g = 100.0 * abs(apq);
                if abs(app) + g == abs(app) && abs(aqq) + g == abs(aqq) {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (abs(theta) + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(NotConverged)
}

fn finish(n: usize, m: &[f64], vectors: Vec<f64>) -> SymEigen {
    SymEigen { n, values: (0..n).map(|i| m[i * n + i]).collect(), vectors }
}

/// Pseudo-inverse of a symmetric matrix in factored form.
#[derive(Debug, Clone)]
pub struct SymPinv {
    eig: SymEigen,
    /// Indices of the eigenpairs kept above the cutoff.
    kept: Vec<usize>,
}

impl SymPinv {
    pub fn new(a: &[f64], n: usize, rcond: f64) -> Result<Self, NotConverged> {
        Ok(Self::from_eigen(sym_eigen(a, n)?, rcond))
    }

    pub fn from_eigen(eig: SymEigen, rcond: f64) -> Self {
        let n = eig.n;
        let smax = eig.values.iter().fold(0.0f64, |acc, l| acc.max(abs(*l)));
        let cutoff = rcond * smax;
        let kept = (0..n)
            .filter(|&i| smax > 0.0 && abs(eig.values[i]) > cutoff)
            .collect();
        Self { eig, kept }
    }

    pub fn dim(&self) -> usize {
        self.eig.n
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.eig.n;
        (0..n).map(move |r| self.eig.vectors[r * n + k])
    }

    fn project(&self, x: &[f64], k: usize) -> f64 {
        crate::sum::neumaier(self.column(k).zip(x).map(|(v, x)| v * x))
    }

    /// `A^+ x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.eig.n;
        let mut out = vec![0.0; n];
        for &k in &self.kept {
            let coef = self.project(x, k) / self.eig.values[k];
            for (o, v) in out.iter_mut().zip(self.column(k)) {
                *o += coef * v;
            }
        }
        out
    }

    /// `(I - A^+ A) x`: the component of `x` in the numerical null space.
    pub fn null_component(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for &k in &self.kept {
            let coef = self.project(x, k);
            for (o, v) in out.iter_mut().zip(self.column(k)) {
                *o -= coef * v;
            }
        }
        out
    }

    /// Dense `A^+`, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.eig.n;
        let mut out = vec![0.0; n * n];
        for &k in &self.kept {
            let inv = 1.0 / self.eig.values[k];
            for i in 0..n {
                let vi = self.eig.vectors[i * n + k] * inv;
                for j in 0..n {
                    out[i * n + j] += vi * self.eig.vectors[j * n + k];
                }
            }
        }
        out
    }
}

/// `y = A x` for a dense row-major square matrix.
pub fn mat_vec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert_eq!(a.len(), n * n);
    (0..n).map(|i| crate::math::dot(&a[i * n..(i + 1) * n], x)).collect()
}
