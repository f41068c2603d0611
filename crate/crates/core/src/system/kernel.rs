//! Orthonormal basis of `ker Eᵀ`.

use nalgebra::DMatrix;
use nalgebra_sparse::CscMatrix;

use crate::linalg::to_dense;

/// Singular values below `DEFAULT_RANK_TOL · σ_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct KernelBasis {
    /// `n×d` matrix with orthonormal columns spanning `ker Eᵀ`.
    pub v: DMatrix<f64>,
    pub d: usize,
    pub tol: f64,
}

impl KernelBasis {
    pub fn n(&self) -> usize {
        self.v.nrows()
    }
}

/// Kernel of `Eᵀ` from the right singular vectors of `Eᵀ` whose singular
/// values fall below `tol · σ_max`. Each column is signed so that its
/// largest entry in magnitude is positive.
pub fn kernel_basis(e: &CscMatrix<f64>, tol: f64) -> KernelBasis {
    let n = e.nrows();
    let et = to_dense(e).transpose();
    // Right singular vectors of Eᵀ are the eigenvectors of E Eᵀ; use the
    // full SVD of the square matrix so all n of them are available.
    let svd = et.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sigma = &svd.singular_values;
    let smax = sigma.max();
    let cols: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || sigma[i] <= tol * smax)
        .collect();
    let mut v = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        let mut col = vt.row(i).transpose();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        v.set_column(c, &col);
    }
    KernelBasis {
        d: cols.len(),
        v,
        tol,
    }
}
