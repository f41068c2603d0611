//! Kronecker assembly of the space-time stiffness matrix `B^N` and of the
//! right-hand side operator `F`.
//!
//! Unknowns are ordered time-node-major: index `k·n + i` belongs to the test
//! function `e_i σ_k` (`k < K`), the trailing `d` entries to `v_m σ_K` with
//! `v_m` the columns of the `ker Eᵀ` basis.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::linalg::to_sparse;
use crate::system::{DaeSystem, KernelBasis, TimeFunction};
use crate::temporal::{
    build_grams, prolong_control, sample_on_grid, GramTriplet, TimeGrid, Tridiagonal,
};

/// `B^N` split into the blocks belonging to nodes `0..K` and to the kernel
/// columns at node `K`.
#[derive(Clone, Debug)]
pub struct StiffnessMatrix {
    pub b11: CscMatrix<f64>,
    pub b12: CscMatrix<f64>,
    pub b21: CscMatrix<f64>,
    pub b22: CscMatrix<f64>,
    pub n: usize,
    pub intervals: usize,
    pub d: usize,
}

impl StiffnessMatrix {
    /// `𝒩 = nK + d`
    pub fn dim(&self) -> usize {
        self.n * self.intervals + self.d
    }

    /// Blocks glued into one sparse matrix.
    pub fn monolithic(&self) -> CscMatrix<f64> {
        let off = self.n * self.intervals;
        let mut coo = CooMatrix::new(self.dim(), self.dim());
        for (block, (r0, c0)) in [
            (&self.b11, (0, 0)),
            (&self.b12, (0, off)),
            (&self.b21, (off, 0)),
            (&self.b22, (off, off)),
        ] {
            for (i, j, v) in block.triplet_iter() {
                coo.push(r0 + i, c0 + j, *v);
            }
        }
        CscMatrix::from(&coo)
    }
}

/// Spatial factors shared by every block.
struct Spatial {
    eet: CscMatrix<f64>,
    eat: CscMatrix<f64>,
    aet: CscMatrix<f64>,
    aat: CscMatrix<f64>,
    eat_v: DMatrix<f64>,
    aat_v: DMatrix<f64>,
}

impl Spatial {
    fn new(e: &CscMatrix<f64>, a: &CscMatrix<f64>, v: &DMatrix<f64>) -> Self {
        let et = e.transpose();
        let at = a.transpose();
        let eat = e * &at;
        let aat = a * &at;
        Spatial {
            eet: e * &et,
            aet: eat.transpose(),
            eat_v: &eat * v,
            aat_v: &aat * v,
            eat,
            aat,
        }
    }
}

/// `B^N` for a given `A` (already evaluated at the parameter).
pub fn assemble_stiffness_matrices(
    e: &CscMatrix<f64>,
    a: &CscMatrix<f64>,
    grid: &TimeGrid,
    kernel: &KernelBasis,
) -> Result<StiffnessMatrix> {
    let n = e.nrows();
    if a.nrows() != n || a.ncols() != n || e.ncols() != n {
        return Err(Error::dims("A", n, a.nrows()));
    }
    if kernel.n() != n {
        return Err(Error::dims("kernel basis rows", n, kernel.n()));
    }
    let kk = grid.intervals();
    let d = kernel.d;
    let g = build_grams(grid);
    let sp = Spatial::new(e, a, &kernel.v);
    let GramTriplet {
        stiffness: kt,
        mass: lt,
        mixed: ot,
    } = &g;

    let mut b11 = CooMatrix::new(n * kk, n * kk);
    for l in 0..kk {
        for k in l.saturating_sub(1)..(l + 2).min(kk) {
            let terms = [
                (kt.get(l, k), &sp.eet),
                (ot.get(l, k), &sp.eat),
                (ot.get(k, l), &sp.aet),
                (lt.get(l, k), &sp.aat),
            ];
            for (c, m) in terms {
                if c == 0.0 {
                    continue;
                }
                for (j, i, v) in m.triplet_iter() {
                    b11.push(l * n + j, k * n + i, c * v);
                }
            }
        }
    }

    // Only node K−1 couples to node K.
    let mut b12 = DMatrix::zeros(n * kk, d);
    if d > 0 {
        let l = kk - 1;
        let block = &sp.eat_v * ot.get(l, kk) + &sp.aat_v * lt.get(l, kk);
        b12.view_mut((l * n, 0), (n, d)).copy_from(&block);
    }
    let b22 = (kernel.v.transpose() * &sp.aat_v) * lt.block22();
    let b22 = (&b22 + b22.transpose()) * 0.5;

    let b12 = to_sparse(&b12);
    Ok(StiffnessMatrix {
        b11: CscMatrix::from(&b11),
        b21: b12.transpose(),
        b12,
        b22: to_sparse(&b22),
        n,
        intervals: kk,
        d,
    })
}

/// `B^N_μ` for the system at parameter `μ`.
pub fn assemble_stiffness(
    sys: &DaeSystem,
    mu: &[f64],
    grid: &TimeGrid,
    kernel: &KernelBasis,
) -> Result<StiffnessMatrix> {
    let a = sys.a_at(mu)?;
    assemble_stiffness_matrices(&sys.e, &a, grid, kernel)
}

/// The map `s ↦ Fᵀ s` from time-node-major nodal samples (length
/// `n(K+1)`) to the right-hand side vector (length `𝒩`).
#[derive(Clone, Debug)]
pub struct RhsOperator {
    /// `F`, of size `n(K+1) × 𝒩`.
    pub f: CscMatrix<f64>,
    pub grid: TimeGrid,
    pub n: usize,
    v: DMatrix<f64>,
    mass: Tridiagonal,
}

impl RhsOperator {
    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    /// `Fᵀ s` for samples given as an `n×(K+1)` matrix, one column per node.
    pub fn apply(&self, samples: &DMatrix<f64>) -> Result<DVector<f64>> {
        let kk = self.grid.intervals();
        if samples.shape() != (self.n, kk + 1) {
            return Err(Error::dims("rhs samples", self.n * (kk + 1), samples.len()));
        }
        // column l of S·L is Σ_k s_k [L]_{k,l}
        let mut sl = DMatrix::zeros(self.n, kk + 1);
        for l in 0..=kk {
            let mut col = sl.column_mut(l);
            for (k, c) in self.mass.row(l) {
                col.axpy(c, &samples.column(k), 1.0);
            }
        }
        let mut out = DVector::zeros(self.dim());
        out.rows_mut(0, self.n * kk)
            .copy_from_slice(&sl.as_slice()[..self.n * kk]);
        let tail = self.v.transpose() * sl.column(kk);
        out.rows_mut(self.n * kk, self.v.ncols()).copy_from(&tail);
        Ok(out)
    }

    /// `Fᵀ s` for a flat time-node-major sample vector.
    pub fn apply_flat(&self, samples: &DVector<f64>) -> Result<DVector<f64>> {
        let kk = self.grid.intervals();
        if samples.len() != self.n * (kk + 1) {
            return Err(Error::dims("rhs samples", self.n * (kk + 1), samples.len()));
        }
        self.apply(&DMatrix::from_column_slice(
            self.n,
            kk + 1,
            samples.as_slice(),
        ))
    }

    /// `Fᵀ sample(f)` for one time function.
    pub fn apply_function(&self, f: &TimeFunction) -> Result<DVector<f64>> {
        if f.dim() != self.n {
            return Err(Error::dims("rhs term", self.n, f.dim()));
        }
        self.apply(&sample_on_grid(f, &self.grid))
    }
}

pub fn assemble_rhs_operator(grid: &TimeGrid, n: usize, kernel: &KernelBasis) -> RhsOperator {
    let kk = grid.intervals();
    let d = kernel.d;
    let lt = build_grams(grid).mass;
    let mut coo = CooMatrix::new(n * (kk + 1), n * kk + d);
    for l in 0..kk {
        for (k, c) in lt.row(l) {
            for i in 0..n {
                coo.push(k * n + i, l * n + i, c);
            }
        }
    }
    for (k, c) in lt.row(kk) {
        for m in 0..d {
            for i in 0..n {
                let v = c * kernel.v[(i, m)];
                if v != 0.0 {
                    coo.push(k * n + i, n * kk + m, v);
                }
            }
        }
    }
    RhsOperator {
        f: CscMatrix::from(&coo),
        grid: *grid,
        n,
        v: kernel.v.clone(),
        mass: lt,
    }
}

/// `f^N_μ = Fᵀ f_{μ,Δt}` with `f_μ` sampled at the state grid nodes; the
/// control enters through its prolongation from the control grid.
pub fn assemble_control_rhs(
    sys: &DaeSystem,
    mu: &[f64],
    rhs: &RhsOperator,
) -> Result<DVector<f64>> {
    sys.check_mu(mu)?;
    let grid = &rhs.grid;
    let n = sys.n();
    let mut samples = DMatrix::zeros(n, grid.intervals() + 1);
    for (k, t) in grid.nodes().into_iter().enumerate() {
        samples.set_column(k, &sys.rhs.eval(mu, t, n)?);
    }
    if let Some(ctrl) = &sys.control {
        let m = ctrl.inputs();
        let coarse_grid = TimeGrid::new(sys.horizon, ctrl.intervals)?;
        let u = DMatrix::from_column_slice(m, ctrl.intervals + 1, &mu[..ctrl.param_len()]);
        let fine = prolong_control(&u, &coarse_grid, grid)?;
        samples += &ctrl.matrix * fine;
    }
    rhs.apply(&samples)
}

/// `f_q = Fᵀ sample(f̃_q)` for every expanded right-hand side term, control
/// hats first (the order of [`DaeSystem::rhs_terms`]).
pub fn assemble_rhs_terms(sys: &DaeSystem, rhs: &RhsOperator) -> Result<DMatrix<f64>> {
    let terms = sys.rhs_terms();
    let mut out = DMatrix::zeros(rhs.dim(), terms.len());
    for (q, term) in terms.iter().enumerate() {
        out.set_column(q, &rhs.apply_function(&term.value)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{csc_from_rows, to_dense};
    use crate::system::{kernel_basis, ScalarProfile, Theta, DEFAULT_RANK_TOL};

    fn grid(k: usize) -> TimeGrid {
        TimeGrid::new(1.0, k).unwrap()
    }

    #[test]
    fn pure_algebraic_scalar_gives_the_mass_matrix() {
        let e = csc_from_rows(1, 1, &[0.0]);
        let a = csc_from_rows(1, 1, &[1.0]);
        let kb = kernel_basis(&e, DEFAULT_RANK_TOL);
        let g = grid(2);
        let b = assemble_stiffness_matrices(&e, &a, &g, &kb).unwrap();
        let lt = build_grams(&g).mass.to_dense();
        assert_eq!(b.dim(), 3);
        assert!((to_dense(&b.monolithic()) - &lt).amax() < 1e-15);
        let f = assemble_rhs_operator(&g, 1, &kb);
        assert!((to_dense(&f.f).transpose() - lt).amax() < 1e-15);
    }

    #[test]
    fn pure_integrator_gives_stiffness_block() {
        let e = csc_from_rows(1, 1, &[1.0]);
        let a = csc_from_rows(1, 1, &[0.0]);
        let kb = kernel_basis(&e, DEFAULT_RANK_TOL);
        let g = grid(4);
        let b = assemble_stiffness_matrices(&e, &a, &g, &kb).unwrap();
        assert_eq!(b.d, 0);
        let kt = build_grams(&g).stiffness.block11();
        assert!((to_dense(&b.monolithic()) - kt).amax() < 1e-12);
    }

    #[test]
    fn monolithic_equals_blocks_bitwise() {
        let e = csc_from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = csc_from_rows(2, 2, &[-1.0, 2.0, 0.5, -1.0]);
        let kb = kernel_basis(&e, DEFAULT_RANK_TOL);
        let b = assemble_stiffness_matrices(&e, &a, &grid(3), &kb).unwrap();
        let m = to_dense(&b.monolithic());
        assert_eq!(m.view((0, 0), (6, 6)).into_owned(), to_dense(&b.b11));
        assert_eq!(m.view((0, 6), (6, 1)).into_owned(), to_dense(&b.b12));
        assert_eq!(m.view((6, 0), (1, 6)).into_owned(), to_dense(&b.b21));
        assert_eq!(m.view((6, 6), (1, 1)).into_owned(), to_dense(&b.b22));
    }

    #[test]
    fn apply_matches_explicit_operator() {
        let e = csc_from_rows(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let kb = kernel_basis(&e, DEFAULT_RANK_TOL);
        let g = grid(5);
        let f = assemble_rhs_operator(&g, 3, &kb);
        let s = DVector::from_fn(18, |i, _| (i as f64 * 0.7).sin());
        let direct = to_dense(&f.f).transpose() * &s;
        assert!((f.apply_flat(&s).unwrap() - direct).amax() < 1e-15);
        assert_eq!(
            f.apply_flat(&DVector::zeros(18)).unwrap(),
            DVector::zeros(16)
        );
    }

    #[test]
    fn control_path_equals_plain_path_with_constant_input() {
        let e = CscMatrix::identity(2);
        let a = csc_from_rows(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let g = grid(4);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let sys = DaeSystem::new(e.clone(), a, 1.0).with_control(b, 4);
        let kb = kernel_basis(&e, DEFAULT_RANK_TOL);
        let f = assemble_rhs_operator(&g, 2, &kb);
        let via_control = assemble_control_rhs(&sys, &[1.0; 5], &f).unwrap();
        let plain = f
            .apply_function(&TimeFunction::Constant(DVector::from_vec(vec![1.0, 0.0])))
            .unwrap();
        assert!((via_control - plain).amax() < 1e-15);
        assert_eq!(
            assemble_control_rhs(&sys, &[0.0; 5], &f).unwrap(),
            DVector::zeros(8)
        );
    }

    #[test]
    fn affine_terms_sum_to_the_full_rhs() {
        let e = csc_from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = csc_from_rows(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let g = grid(6);
        let sys = DaeSystem::new(e.clone(), a, 1.0)
            .with_control(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), 3)
            .with_rhs(
                Theta::one(),
                TimeFunction::Profile {
                    direction: DVector::from_vec(vec![1.0, 1.0]),
                    profile: ScalarProfile::smooth_source(1.0),
                },
            );
        let kb = kernel_basis(&e, DEFAULT_RANK_TOL);
        let f = assemble_rhs_operator(&g, 2, &kb);
        let mu = [0.3, -1.0, 2.0, 0.5];
        let terms = assemble_rhs_terms(&sys, &f).unwrap();
        let theta: Vec<f64> = sys
            .rhs_terms()
            .iter()
            .map(|t| t.theta.eval(&mu).unwrap())
            .collect();
        let combined = terms * DVector::from_vec(theta);
        let direct = assemble_control_rhs(&sys, &mu, &f).unwrap();
        assert!((combined - direct).amax() < 1e-14);
    }
}
