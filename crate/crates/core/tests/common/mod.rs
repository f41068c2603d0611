//! Oracles shared by the integration tests. Everything here is written
//! from the definitions (hat functions, `ξ = −Eᵀψ' − Aᵀψ`, two-point
//! Gauss) without calling into the assembly code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Trial functions `ξ_i(t)` for all `i` as the columns of an `n×𝒩` matrix,
/// evaluated at `t = (cell + s)·dt` from inside `cell`.
pub fn trial_functions(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    horizon: f64,
    intervals: usize,
    cell: usize,
    s: f64,
) -> DMatrix<f64> {
    let n = e.nrows();
    let d = kernel.ncols();
    let dt = horizon / intervals as f64;
    // hat k on this cell: (value, derivative)
    let hat = |k: usize| -> (f64, f64) {
        if k == cell {
            (1.0 - s, -1.0 / dt)
        } else if k == cell + 1 {
            (s, 1.0 / dt)
        } else {
            (0.0, 0.0)
        }
    };
    let mut out = DMatrix::zeros(n, n * intervals + d);
    let (et, at) = (e.transpose(), a.transpose());
    for k in 0..intervals {
        let (v, dv) = hat(k);
        if v == 0.0 && dv == 0.0 {
            continue;
        }
        for i in 0..n {
            let col = -(et.column(i) * dv) - at.column(i) * v;
            out.set_column(k * n + i, &col);
        }
    }
    let (v, dv) = hat(intervals);
    for m in 0..d {
        let psi = kernel.column(m);
        let col = -(&et * psi) * dv - (&at * psi) * v;
        out.set_column(n * intervals + m, &col);
    }
    out
}

pub const GAUSS2: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

/// `∫₀ᵀ ξ_iᵀ ξ_j dt`, exact since each `ξ_i` is affine on every cell.
pub fn trial_gram(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    horizon: f64,
    intervals: usize,
) -> DMatrix<f64> {
    let n = e.nrows();
    let dim = n * intervals + kernel.ncols();
    let dt = horizon / intervals as f64;
    let mut g = DMatrix::zeros(dim, dim);
    for cell in 0..intervals {
        for (s, w) in GAUSS2 {
            let xi = trial_functions(e, a, kernel, horizon, intervals, cell, s);
            g += xi.transpose() * &xi * (w * dt);
        }
    }
    g
}

/// Random sparse square matrix with roughly `density` nonzeros.
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| {
        if rng.random_bool(density) {
            rng.random_range(-2.0..2.0)
        } else {
            0.0
        }
    })
}

/// `E` of prescribed rank `r`: a random product of an `n×r` and an `r×n`
/// sparse factor.
pub fn random_rank_matrix(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DMatrix<f64> {
    let left = DMatrix::from_fn(n, r, |_, _| {
        if rng.random_bool(0.6) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    let right = DMatrix::from_fn(r, n, |_, _| {
        if rng.random_bool(0.6) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    left * right
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sqrt(∫₀ᵀ ‖g‖² dt)` with a composite 8-point Gauss rule on `cells` cells.
pub fn l2_norm_fn(g: &dyn Fn(f64) -> DVector<f64>, horizon: f64, cells: usize) -> f64 {
    let (x, w) = gauss8();
    let dt = horizon / cells as f64;
    let mut acc = 0.0;
    for c in 0..cells {
        for (s, wt) in x.iter().zip(&w) {
            acc += wt * dt * g((c as f64 + s) * dt).norm_squared();
        }
    }
    acc.sqrt()
}

/// Eight-point Gauss–Legendre rule on `(0, 1)`.
pub fn gauss8() -> ([f64; 8], [f64; 8]) {
    let nodes = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    let weights = [
        0.362_683_783_378_362,
        0.313_706_645_877_887,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_2,
    ];
    let mut x = [0.0; 8];
    let mut w = [0.0; 8];
    for i in 0..4 {
        x[2 * i] = 0.5 - 0.5 * nodes[i];
        x[2 * i + 1] = 0.5 + 0.5 * nodes[i];
        w[2 * i] = 0.5 * weights[i];
        w[2 * i + 1] = 0.5 * weights[i];
    }
    (x, w)
}

/// `‖g − Σ c_i ξ_i‖_{L²}` with eight Gauss points per cell.
pub fn projection_error(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    horizon: f64,
    intervals: usize,
    c: &DVector<f64>,
    g: &dyn Fn(f64) -> DVector<f64>,
) -> f64 {
    let (xs, ws) = gauss8();
    let dt = horizon / intervals as f64;
    let mut acc = 0.0;
    for cell in 0..intervals {
        for (s, w) in xs.iter().zip(&ws) {
            let xi = trial_functions(e, a, kernel, horizon, intervals, cell, *s);
            acc += w * dt * (g((cell as f64 + s) * dt) - xi * c).norm_squared();
        }
    }
    acc.sqrt()
}
