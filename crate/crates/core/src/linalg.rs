//! Direct solvers used by the implicit steppers.
//!
//! * [`Tridiagonal`]: real tridiagonal matrix, factored once (Thomas) and
//!   applied to complex right-hand sides.
//! * [`DenseLu`]: complex LU with partial pivoting for small dense blocks.
//! * [`BlockTridiagonal`]: block Thomas elimination on top of `DenseLu`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;

/// Real tridiagonal matrix `A` with `A[i][i-1] = lower[i]`, `A[i][i] = diag[i]`,
/// `A[i][i+1] = upper[i]` (`lower[0]` and `upper[n-1]` are ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = x[i] * self.diag[i];
            if i > 0 {
                acc += x[i - 1] * self.lower[i];
            }
            if i + 1 < n {
                acc += x[i + 1] * self.upper[i];
            }
            y[i] = acc;
        }
    }

    /// Thomas factorisation without pivoting.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        let n = self.len();
        let mut inv_pivot = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let l = if i > 0 { self.lower[i] } else { 0.0 };
            let p = self.diag[i] - l * prev_c;
            if !(p.abs() > PIVOT_FLOOR) {
                return Err(Error::SingularSystem { mode: None, row: i });
            }
            inv_pivot[i] = 1.0 / p;
            c[i] = if i + 1 < n { self.upper[i] / p } else { 0.0 };
            prev_c = c[i];
        }
        Ok(TridiagonalLu {
            lower: self.lower.clone(),
            inv_pivot,
            c,
        })
    }
}

/// Factored tridiagonal system.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    inv_pivot: Vec<f64>,
    c: Vec<f64>,
}

impl TridiagonalLu {
    /// Solves in place.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = self.inv_pivot.len();
        debug_assert_eq!(rhs.len(), n);
        let mut prev = Complex64::zero();
        for i in 0..n {
            let l = if i > 0 { self.lower[i] } else { 0.0 };
            prev = (rhs[i] - prev * l) * self.inv_pivot[i];
            rhs[i] = prev;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = rhs[i + 1];
            rhs[i] -= next * self.c[i];
        }
    }
}

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn factor(&self) -> Result<DenseLu> {
        DenseLu::new(self.clone())
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(mut a: DenseMatrix) -> Result<Self> {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut best = col;
            let mut best_mag = a.get(col, col).norm();
            for row in col + 1..n {
                let mag = a.get(row, col).norm();
                if mag > best_mag {
                    best = row;
                    best_mag = mag;
                }
            }
            if !(best_mag > PIVOT_FLOOR) {
                return Err(Error::SingularSystem { mode: None, row: col });
            }
            if best != col {
                for j in 0..n {
                    a.data.swap(best * n + j, col * n + j);
                }
                perm.swap(best, col);
            }
            let inv = a.get(col, col).inv();
            for row in col + 1..n {
                let f = a.get(row, col) * inv;
                if f.is_zero() {
                    continue;
                }
                *a.get_mut(row, col) = f;
                for j in col + 1..n {
                    let u = a.data[col * n + j];
                    a.data[row * n + j] -= f * u;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = self.lu.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        rhs[..n].copy_from_slice(&x);
    }

    /// `A^{-1} B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = b.n;
        let mut out = DenseMatrix::zeros(n);
        let mut col = vec![Complex64::zero(); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b.get(i, j);
            }
            self.solve(&mut col);
            for i in 0..n {
                *out.get_mut(i, j) = col[i];
            }
        }
        out
    }
}

/// Block tridiagonal matrix with square dense blocks of equal size.
///
/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    pub lower: Vec<DenseMatrix>,
    pub diag: Vec<DenseMatrix>,
    pub upper: Vec<DenseMatrix>,
}

impl BlockTridiagonal {
    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |d| d.n)
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.block_size();
        let n = self.diag.len();
        let mut tmp = vec![Complex64::zero(); m];
        for i in 0..n {
            let yi = &mut y[i * m..(i + 1) * m];
            self.diag[i].mul_vec(&x[i * m..(i + 1) * m], yi);
            if i > 0 {
                self.lower[i].mul_vec(&x[(i - 1) * m..i * m], &mut tmp);
                for (a, b) in yi.iter_mut().zip(&tmp) {
                    *a += b;
                }
            }
            if i + 1 < n {
                self.upper[i].mul_vec(&x[(i + 1) * m..(i + 2) * m], &mut tmp);
                for (a, b) in yi.iter_mut().zip(&tmp) {
                    *a += b;
                }
            }
        }
    }

    /// Block Thomas elimination: `S_i = D_i − L_i S_{i−1}^{−1} U_{i−1}`.
    pub fn factor(&self) -> Result<BlockTridiagonalLu> {
        let n = self.diag.len();
        let mut pivots: Vec<DenseLu> = Vec::with_capacity(n);
        let mut sinv_u: Vec<DenseMatrix> = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = self.diag[i].clone();
            if i > 0 {
                let corr = self.lower[i].mul(&sinv_u[i - 1]);
                for (a, b) in s.data.iter_mut().zip(&corr.data) {
                    *a -= b;
                }
            }
            let lu = s.factor().map_err(|e| match e {
                Error::SingularSystem { .. } => Error::SingularSystem { mode: None, row: i },
                other => other,
            })?;
            if i + 1 < n {
                sinv_u.push(lu.solve_matrix(&self.upper[i]));
            }
            pivots.push(lu);
        }
        Ok(BlockTridiagonalLu {
            lower: self.lower.clone(),
            pivots,
            sinv_u,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BlockTridiagonalLu {
    lower: Vec<DenseMatrix>,
    pivots: Vec<DenseLu>,
    sinv_u: Vec<DenseMatrix>,
}

impl BlockTridiagonalLu {
    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = self.pivots.len();
        let m = if n > 0 { self.lower[0].n } else { 0 };
        let mut tmp = vec![Complex64::zero(); m];
        for i in 0..n {
            if i > 0 {
                let (done, rest) = rhs.split_at_mut(i * m);
                self.lower[i].mul_vec(&done[(i - 1) * m..], &mut tmp);
                for (a, b) in rest[..m].iter_mut().zip(&tmp) {
                    *a -= b;
                }
            }
            self.pivots[i].solve(&mut rhs[i * m..(i + 1) * m]);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let (head, tail) = rhs.split_at_mut((i + 1) * m);
            self.sinv_u[i].mul_vec(&tail[..m], &mut tmp);
            for (a, b) in head[i * m..].iter_mut().zip(&tmp) {
                *a -= b;
            }
        }
    }
}
