//! Uniform time grids, hat functions and the temporal Gram matrices.
//!
//! With hats `σ_0, …, σ_K` on `t_k = k·Δt` the three matrices are
//!
//! ```text
//! [K]_{k,l} = (σ̇_k, σ̇_l)    [L]_{k,l} = (σ_k, σ_l)    [O]_{k,l} = (σ̇_k, σ_l)
//! ```
//!
//! and each is split as `[[Π¹¹, Π¹²], [Π²¹, Π²²]]` with the last node in the
//! second block row/column.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::TimeFunction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    intervals: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if intervals == 0 {
            return Err(Error::InvalidInput("time grid needs K >= 1".into()));
        }
        Ok(TimeGrid {
            horizon,
            intervals,
            dt: horizon / intervals as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of cells `K`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `t_k = k·Δt`; the last node is pinned to `T`.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.node(k)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.intervals)
            .map(|k| 0.5 * (self.node(k) + self.node(k + 1)))
            .collect()
    }

    pub fn refined(&self, factor: usize) -> Result<Self> {
        TimeGrid::new(self.horizon, self.intervals * factor)
    }

    /// Cell containing `t` and the local coordinate `s ∈ [0, 1]`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let c = ((t / self.dt).floor() as isize).clamp(0, self.intervals as isize - 1) as usize;
        let s = (t - self.node(c)) / self.dt;
        (c, s.clamp(0.0, 1.0))
    }

    pub fn same_horizon(&self, other: &TimeGrid) -> bool {
        (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon.max(other.horizon)
    }
}

/// Symmetric-pattern tridiagonal matrix of size `(K+1)×(K+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j == i + 1 {
            self.upper[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            0.0
        }
    }

    /// Non-zero pattern of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(self.dim() - 1);
        (lo..=hi).map(move |j| (j, self.get(i, j)))
    }

    pub fn transpose(&self) -> Tridiagonal {
        Tridiagonal {
            lower: self.upper.clone(),
            diag: self.diag.clone(),
            upper: self.lower.clone(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// `Π¹¹`: leading `K×K` block.
    pub fn block11(&self) -> DMatrix<f64> {
        let k = self.dim() - 1;
        DMatrix::from_fn(k, k, |i, j| self.get(i, j))
    }

    /// `Π¹²`: last column without its last entry.
    pub fn block12(&self) -> DVector<f64> {
        let k = self.dim() - 1;
        DVector::from_fn(k, |i, _| self.get(i, k))
    }

    /// `Π²¹`: last row without its last entry.
    pub fn block21(&self) -> DVector<f64> {
        let k = self.dim() - 1;
        DVector::from_fn(k, |j, _| self.get(k, j))
    }

    pub fn block22(&self) -> f64 {
        let k = self.dim() - 1;
        self.get(k, k)
    }
}

/// Temporal Gram matrices `K_Δt` (derivatives), `L_Δt` (values) and
/// `O_Δt` (derivative against value).
#[derive(Clone, Debug, PartialEq)]
pub struct GramTriplet {
    pub stiffness: Tridiagonal,
    pub mass: Tridiagonal,
    pub mixed: Tridiagonal,
}

/// Closed-form Gram matrices for piecewise-linear hats on a uniform grid.
pub fn build_grams(grid: &TimeGrid) -> GramTriplet {
    let k = grid.intervals();
    let dt = grid.dt();
    let n = k + 1;
    let interior = |v: f64, edge: f64| -> Vec<f64> {
        (0..n)
            .map(|i| if i == 0 || i == k { edge } else { v })
            .collect()
    };
    let mass = Tridiagonal {
        lower: vec![dt / 6.0; k],
        diag: interior(2.0 * dt / 3.0, dt / 3.0),
        upper: vec![dt / 6.0; k],
    };
    let stiffness = Tridiagonal {
        lower: vec![-1.0 / dt; k],
        diag: interior(2.0 / dt, 1.0 / dt),
        upper: vec![-1.0 / dt; k],
    };
    let mut odiag = vec![0.0; n];
    odiag[0] = -0.5;
    odiag[k] = 0.5;
    let mixed = Tridiagonal {
        lower: vec![0.5; k],
        diag: odiag,
        upper: vec![-0.5; k],
    };
    GramTriplet {
        stiffness,
        mass,
        mixed,
    }
}

/// Nodal samples `(f(t_0), …, f(t_K))` as the columns of an `n×(K+1)`
/// matrix; its column-major storage is the time-node-major sample vector.
pub fn sample_on_grid(fun: &TimeFunction, grid: &TimeGrid) -> DMatrix<f64> {
    let nodes = grid.nodes();
    let mut out = DMatrix::zeros(fun.dim(), nodes.len());
    for (k, &t) in nodes.iter().enumerate() {
        out.set_column(k, &fun.eval(t));
    }
    out
}

/// Evaluates the coarse hat expansion with nodal values `coarse` (one column
/// per coarse node) at the fine grid nodes.
pub fn prolong_control(
    coarse: &DMatrix<f64>,
    coarse_grid: &TimeGrid,
    fine_grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    if !coarse_grid.same_horizon(fine_grid) {
        return Err(Error::GridMismatch {
            left: coarse_grid.horizon(),
            right: fine_grid.horizon(),
        });
    }
    if coarse.ncols() != coarse_grid.intervals() + 1 {
        return Err(Error::dims(
            "coarse samples",
            coarse_grid.intervals() + 1,
            coarse.ncols(),
        ));
    }
    let ku = coarse_grid.intervals();
    let k = fine_grid.intervals();
    let mut out = DMatrix::zeros(coarse.nrows(), k + 1);
    for j in 0..=k {
        // Exact integer arithmetic for the shared nodes of nested grids.
        let pos = (j * ku) as f64 / k as f64;
        let c = (pos.floor() as usize).min(ku - 1);
        let s = pos - c as f64;
        let col = coarse.column(c) * (1.0 - s) + coarse.column(c + 1) * s;
        out.set_column(j, &col);
    }
    Ok(out)
}
