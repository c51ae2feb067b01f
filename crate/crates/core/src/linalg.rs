//! Sparse symmetric positive definite systems on a fixed sparsity pattern.
//!
//! The pattern stores the lower triangle in compressed columns. Its symbolic
//! Cholesky analysis is computed once and shared by every matrix on it.

use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::{Error, Result};

/// Relative residual accepted after a direct solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct SparsePattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic: OnceLock<std::result::Result<SymbolicLlt<usize>, String>>,
}

impl SparsePattern {
    /// Builds the lower-triangular pattern covering every `(i, j)` (in either order)
    /// plus the full diagonal.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cols: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        for (i, j) in entries {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            cols[c].push(r);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for mut c in cols {
            c.sort_unstable();
            c.dedup();
            row_idx.extend(c);
            col_ptr.push(row_idx.len());
        }
        Self {
            n,
            col_ptr,
            row_idx,
            symbolic: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage slot of entry `(i, j)`, if present.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let lo = self.col_ptr[c];
        let hi = self.col_ptr[c + 1];
        self.row_idx[lo..hi].binary_search(&r).ok().map(|k| lo + k)
    }

    fn symbolic_matrix(&self) -> SymbolicSparseColMat<usize> {
        SymbolicSparseColMat::new_checked(
            self.n,
            self.n,
            self.col_ptr.clone(),
            None,
            self.row_idx.clone(),
        )
    }

    fn symbolic_llt(&self) -> Result<&SymbolicLlt<usize>> {
        self.symbolic
            .get_or_init(|| {
                let m = self.symbolic_matrix();
                SymbolicLlt::try_new(m.as_ref(), Side::Lower).map_err(|e| format!("{e:?}"))
            })
            .as_ref()
            .map_err(|e| Error::Solver {
                context: "symbolic factorization".into(),
                detail: e.clone(),
            })
    }
}

/// Symmetric matrix with values on a shared [`SparsePattern`].
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `v` to entry `(i, j)` (and by symmetry `(j, i)`).
    ///
    /// # Panics
    /// If the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .pattern
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        let mut y = vec![0.0; p.n];
        for c in 0..p.n {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                let r = p.row_idx[k];
                let v = self.values[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    pub fn factorize(&self, context: &str) -> Result<Factorization<'_>> {
        let symbolic = self.pattern.symbolic_llt()?.clone();
        let sym = self.pattern.symbolic_matrix();
        let mat = SparseColMatRef::new(sym.as_ref(), &self.values);
        let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower).map_err(|e| {
            Error::Solver {
                context: context.to_string(),
                detail: format!("Cholesky factorization failed ({e:?}); matrix not positive definite"),
            }
        })?;
        Ok(Factorization {
            matrix: self,
            llt,
            context: context.to_string(),
        })
    }

    /// Factorizes and solves a single right-hand side.
    pub fn solve(&self, b: &[f64], context: &str) -> Result<Vec<f64>> {
        self.factorize(context)?.solve(b)
    }
}

pub struct Factorization<'a> {
    matrix: &'a SymmetricMatrix,
    llt: Llt<usize, f64>,
    context: String,
}

impl Factorization<'_> {
    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.llt.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `K x = b` and verifies the relative residual, applying one step
    /// of iterative refinement if needed.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.pattern.n;
        if b.len() != n {
            return Err(Error::InvalidInput(format!(
                "right-hand side has length {} but system has {n} unknowns",
                b.len()
            )));
        }
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.raw_solve(b);
        for attempt in 0..2 {
            let kx = self.matrix.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
            let rel = norm(&r) / bnorm;
            if !rel.is_finite() {
                break;
            }
            if rel <= RESIDUAL_TOL {
                return Ok(x);
            }
            if attempt == 1 {
                return Err(Error::Solver {
                    context: self.context.clone(),
                    detail: format!("relative residual {rel:.3e} exceeds {RESIDUAL_TOL:e}"),
                });
            }
            let dx = self.raw_solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
        }
        Err(Error::Solver {
            context: self.context.clone(),
            detail: "solution is not finite".into(),
        })
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
