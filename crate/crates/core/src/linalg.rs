//! Sparse/dense helpers and the SPD direct solver.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};

pub fn to_dense(m: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        out[(i, j)] += *v;
    }
    out
}

/// Sparse copy of a dense matrix; exact zeros are dropped.
pub fn to_sparse(m: &DMatrix<f64>) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                coo.push(i, j, v);
            }
        }
    }
    CscMatrix::from(&coo)
}

pub fn csc_from_rows(rows: usize, cols: usize, data: &[f64]) -> CscMatrix<f64> {
    to_sparse(&DMatrix::from_row_slice(rows, cols, data))
}

/// `‖M‖_max`
pub fn max_abs(m: &CscMatrix<f64>) -> f64 {
    m.values().iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// `M x` for sparse `M`.
pub fn spmv(m: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(m.nrows());
    for (j, col) in m.col_iter().enumerate() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

/// `Mᵀ x` for sparse `M`.
pub fn spmv_t(m: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        m.ncols(),
        m.col_iter().map(|col| {
            col.row_indices()
                .iter()
                .zip(col.values())
                .map(|(&i, &v)| v * x[i])
                .sum::<f64>()
        }),
    )
}

/// `M X` for sparse `M` and dense `X`.
pub fn spmm(m: &CscMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(m.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let xc = x.column(c);
        let mut yc = y.column_mut(c);
        for (j, col) in m.col_iter().enumerate() {
            let xj = xc[j];
            if xj == 0.0 {
                continue;
            }
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                yc[i] += v * xj;
            }
        }
    }
    y
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdFactor {
    chol: CscCholesky<f64>,
    dim: usize,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SpdFactor(dim={}, nnz(L)={})",
            self.dim,
            self.chol.l().nnz()
        )
    }
}

impl SpdFactor {
    /// Factors `m`; non-finite input is a [`Error::FactorizationFailure`],
    /// loss of definiteness a [`Error::SingularAssembly`].
    pub fn new(m: &CscMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::FactorizationFailure(format!(
                "matrix is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::FactorizationFailure(
                "matrix has non-finite entries".into(),
            ));
        }
        if m.nrows() == 0 {
            return Err(Error::SingularAssembly("empty system".into()));
        }
        let chol = CscCholesky::factor(m).map_err(|e| Error::SingularAssembly(e.to_string()))?;
        // A zero pivot can slip through as a tiny positive one.
        let l = chol.l();
        let diag: Vec<f64> = (0..l.ncols())
            .map(|j| l.col(j).get_entry(j).map_or(0.0, |e| e.into_value()))
            .collect();
        let dmax = diag.iter().fold(0.0f64, |a, &v| a.max(v));
        let dmin = diag.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if !(dmin > 1e-7 * dmax) {
            return Err(Error::SingularAssembly(format!(
                "Cholesky pivot ratio {:.3e} indicates a numerically singular matrix",
                dmin / dmax
            )));
        }
        Ok(SpdFactor {
            dim: m.nrows(),
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.chol.solve_mut(&mut x);
        DVector::from_column_slice(x.as_slice())
    }

    pub fn solve_many(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.chol.solve_mut(&mut x);
        x
    }
}
