//! Sparse kernels for the propagators.
//!
//! Every model Hamiltonian is a real diagonal plus a short list of couplings
//! in working-frame coordinates, so products with state blocks are done
//! entry by entry instead of through dense matrices.

use nalgebra::DMatrix;

use crate::hilbert::{C64, ZERO};

/// `H[row, col] = value` and, implicitly, `H[col, row] = conj(value)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

/// Hermitian operator stored as a real diagonal plus off-diagonal couplings.
///
/// Couplings with the same `(row, col)` add; `row != col` always.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    pub diag: Vec<f64>,
    pub couplings: Vec<Coupling>,
}

impl SparseHermitian {
    pub fn zeros(dim: usize) -> Self {
        Self { diag: vec![0.0; dim], couplings: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn clear(&mut self) {
        self.diag.iter_mut().for_each(|d| *d = 0.0);
        self.couplings.clear();
    }

    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row != col, "diagonal entries go through `diag`");
        self.couplings.push(Coupling { row, col, value });
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, self.diag.iter().map(|&d| C64::from(d))));
        for c in &self.couplings {
            m[(c.row, c.col)] += c.value;
            m[(c.col, c.row)] += c.value.conj();
        }
        m
    }

    /// Upper bound on the spectral norm (largest absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        let mut rows: Vec<f64> = self.diag.iter().map(|d| d.abs()).collect();
        for c in &self.couplings {
            let a = c.value.norm();
            rows[c.row] += a;
            rows[c.col] += a;
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `y += scale * H x` for column-major blocks with `dim` rows.
    pub fn apply_add(&self, x: &[C64], y: &mut [C64], scale: C64) {
        let n = self.dim();
        debug_assert_eq!(x.len(), y.len());
        for (xc, yc) in x.chunks_exact(n).zip(y.chunks_exact_mut(n)) {
            for i in 0..n {
                yc[i] += scale * (self.diag[i] * xc[i]);
            }
            for c in &self.couplings {
                let v = scale * c.value;
                let vc = scale * c.value.conj();
                yc[c.row] += v * xc[c.col];
                yc[c.col] += vc * xc[c.row];
            }
        }
    }

    /// Replace `x` by `exp(-i h H) x` using a Taylor series run to machine
    /// precision, with substeps so that each has `h |H| <= 1/2`.
    pub fn expm_apply(&self, h: f64, x: &mut [C64], work: &mut ExpWorkspace) {
        let bound = self.norm_bound() * h.abs();
        let sub = (bound / 0.5).ceil().max(1.0) as usize;
        let hs = h / sub as f64;
        work.resize(x.len());
        for _ in 0..sub {
            work.term.copy_from_slice(x);
            for k in 1..=40 {
                work.next.iter_mut().for_each(|v| *v = ZERO);
                self.apply_add(&work.term, &mut work.next, C64::new(0.0, -hs / k as f64));
                std::mem::swap(&mut work.term, &mut work.next);
                let mut tmax: f64 = 0.0;
                for (xi, ti) in x.iter_mut().zip(&work.term) {
                    *xi += *ti;
                    tmax = tmax.max(ti.norm_sqr());
                }
                if tmax < 1e-36 {
                    break;
                }
            }
        }
    }
}

/// Scratch buffers for [`SparseHermitian::expm_apply`].
#[derive(Clone, Debug, Default)]
pub struct ExpWorkspace {
    term: Vec<C64>,
    next: Vec<C64>,
}

impl ExpWorkspace {
    fn resize(&mut self, n: usize) {
        if self.term.len() != n {
            self.term = vec![ZERO; n];
            self.next = vec![ZERO; n];
        }
    }
}

/// General sparse operator as a list of `(row, col, value)` entries.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    /// Keep entries above `tol * max|entry|`.
    pub fn from_dense(m: &DMatrix<C64>, tol: f64) -> Self {
        let max = m.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let mut entries = Vec::new();
        if max > 0.0 {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if m[(i, j)].norm() > tol * max {
                        entries.push((i, j, m[(i, j)]));
                    }
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += A rho A^dag` for a column-major `dim x dim` block.
    pub fn sandwich_add(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for &(i, k, a) in &self.entries {
            for &(j, l, b) in &self.entries {
                // out[i, j] += a rho[k, l] conj(b)
                out[i + j * n] += a * rho[k + l * n] * b.conj();
            }
        }
    }
}
