//! Detailed space-time solve, evaluation of the ultraweak solution, residual
//! estimator and an implicit Euler baseline.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;

use crate::assembly::{
    assemble_control_rhs, assemble_rhs_operator, assemble_stiffness_matrices, RhsOperator,
    StiffnessMatrix,
};
use crate::error::{Error, Result};
use crate::linalg::{spmm, spmv, to_dense, SpdFactor};
use crate::quadrature::gauss_legendre;
use crate::system::{kernel_basis, DaeSystem, KernelBasis, DEFAULT_RANK_TOL};
use crate::temporal::{prolong_control, TimeGrid};

/// Everything needed to solve on one grid: the factored `B^N` and the
/// right-hand side operator.
#[derive(Debug)]
pub struct Discretization {
    pub system: Arc<DaeSystem>,
    /// Parameter at which `A` was evaluated.
    pub mu: Vec<f64>,
    pub grid: TimeGrid,
    pub a: CscMatrix<f64>,
    pub kernel: KernelBasis,
    pub stiffness: StiffnessMatrix,
    pub matrix: CscMatrix<f64>,
    pub factor: SpdFactor,
    pub rhs: RhsOperator,
}

impl Discretization {
    pub fn new(system: Arc<DaeSystem>, mu: &[f64], grid: TimeGrid) -> Result<Arc<Self>> {
        let kernel = kernel_basis(&system.e, DEFAULT_RANK_TOL);
        Self::with_kernel(system, mu, grid, kernel)
    }

    /// Uses a given `ker Eᵀ` basis, e.g. one restored from a saved model.
    pub fn with_kernel(
        system: Arc<DaeSystem>,
        mu: &[f64],
        grid: TimeGrid,
        kernel: KernelBasis,
    ) -> Result<Arc<Self>> {
        if !system.is_homogeneous() {
            return Err(Error::NotHomogeneous);
        }
        if !system.horizon.is_finite()
            || (system.horizon - grid.horizon()).abs() > 1e-12 * system.horizon
        {
            return Err(Error::GridMismatch {
                left: system.horizon,
                right: grid.horizon(),
            });
        }
        let a = system.a_at(mu)?;
        let stiffness = assemble_stiffness_matrices(&system.e, &a, &grid, &kernel)?;
        let matrix = stiffness.monolithic();
        let factor = SpdFactor::new(&matrix)?;
        let rhs = assemble_rhs_operator(&grid, system.n(), &kernel);
        log::debug!(
            "discretized n={} K={} d={} dim={}",
            system.n(),
            grid.intervals(),
            kernel.d,
            stiffness.dim()
        );
        Ok(Arc::new(Discretization {
            system,
            mu: mu.to_vec(),
            grid,
            a,
            kernel,
            stiffness,
            matrix,
            factor,
            rhs,
        }))
    }

    /// `𝒩 = nK + d`
    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    /// Same system and kernel basis on a grid refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Arc<Self>> {
        Self::with_kernel(
            self.system.clone(),
            &self.mu,
            self.grid.refined(factor)?,
            self.kernel.clone(),
        )
    }

    /// `f^N_μ`
    pub fn rhs_vector(&self, mu: &[f64]) -> Result<DVector<f64>> {
        assemble_control_rhs(&self.system, mu, &self.rhs)
    }

    /// Solves at `μ`, reusing the factorization; `A` must not depend on the
    /// parameter unless `μ` is the one used for assembly.
    pub fn solve(self: &Arc<Self>, mu: &[f64]) -> Result<DetailedSolution> {
        if mu != self.mu.as_slice() && !self.system.has_parameter_independent_a() {
            return Err(Error::ParameterDependentOperator);
        }
        let f = self.rhs_vector(mu)?;
        let coeffs = self.factor.solve(&f);
        let res = (spmv(&self.matrix, &coeffs) - &f).norm();
        let fnorm = f.norm();
        log::debug!(
            "detailed solve residual {:.3e} (rhs norm {:.3e})",
            res,
            fnorm
        );
        if !res.is_finite() {
            return Err(Error::FactorizationFailure("non-finite solution".into()));
        }
        Ok(DetailedSolution {
            coeffs,
            mu: mu.to_vec(),
            disc: self.clone(),
        })
    }

    /// Nodal weights `w_0, …, w_K` (columns) of the test function with
    /// coefficients `c`.
    pub fn nodal_weights(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let n = self.system.n();
        let kk = self.grid.intervals();
        let mut w = DMatrix::zeros(n, kk + 1);
        w.view_mut((0, 0), (n, kk))
            .copy_from_slice(&c.as_slice()[..n * kk]);
        let tail = &self.kernel.v * c.rows(n * kk, self.kernel.d);
        w.set_column(kk, &tail);
        w
    }
}

/// Coefficients of `x^N_μ` in the trial basis `ξ_i = B*ψ_i`.
#[derive(Clone, Debug)]
pub struct DetailedSolution {
    pub coeffs: DVector<f64>,
    pub mu: Vec<f64>,
    pub disc: Arc<Discretization>,
}

impl DetailedSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.disc.grid
    }

    pub fn from_coeffs(
        disc: Arc<Discretization>,
        mu: &[f64],
        coeffs: DVector<f64>,
    ) -> Result<Self> {
        if coeffs.len() != disc.dim() {
            return Err(Error::dims(
                "solution coefficients",
                disc.dim(),
                coeffs.len(),
            ));
        }
        Ok(DetailedSolution {
            coeffs,
            mu: mu.to_vec(),
            disc,
        })
    }

    /// `‖B^N c − f^N‖₂`
    pub fn residual_norm(&self) -> Result<f64> {
        let f = self.disc.rhs_vector(&self.mu)?;
        Ok((spmv(&self.disc.matrix, &self.coeffs) - f).norm())
    }
}

pub fn solve_detailed(sys: &DaeSystem, mu: &[f64], grid: &TimeGrid) -> Result<DetailedSolution> {
    sys.check_mu(mu)?;
    Discretization::new(Arc::new(sys.clone()), mu, *grid)?.solve(mu)
}

/// State evaluator on one cell: `x = −Eᵀ(w₊ − w₋)/Δt − Aᵀ((1−s)w₋ + s w₊)`.
struct CellEval {
    etw: DMatrix<f64>,
    atw: DMatrix<f64>,
    dt: f64,
}

impl CellEval {
    fn new(sol: &DetailedSolution) -> Self {
        let d = &sol.disc;
        let w = d.nodal_weights(&sol.coeffs);
        CellEval {
            etw: spmm(&d.system.e.transpose(), &w),
            atw: spmm(&d.a.transpose(), &w),
            dt: d.grid.dt(),
        }
    }

    fn at(&self, cell: usize, s: f64) -> DVector<f64> {
        let de = (self.etw.column(cell + 1) - self.etw.column(cell)) / self.dt;
        let a = self.atw.column(cell) * (1.0 - s) + self.atw.column(cell + 1) * s;
        -(de + a)
    }
}

/// Values of `x^N` at `times` as the columns of an `n×len` matrix. At
/// interior nodes the two one-sided limits are averaged.
pub fn evaluate_state(sol: &DetailedSolution, times: &[f64]) -> Result<DMatrix<f64>> {
    let grid = sol.grid();
    let horizon = grid.horizon();
    let kk = grid.intervals();
    let ev = CellEval::new(sol);
    let mut out = DMatrix::zeros(sol.disc.system.n(), times.len());
    for (col, &t) in times.iter().enumerate() {
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::OutOfDomain { t, horizon });
        }
        let pos = t / grid.dt();
        let node = pos.round();
        let value = if (pos - node).abs() <= 1e-12 * pos.max(1.0) {
            let k = node as usize;
            if k == 0 {
                ev.at(0, 0.0)
            } else if k >= kk {
                ev.at(kk - 1, 1.0)
            } else {
                (ev.at(k - 1, 1.0) + ev.at(k, 0.0)) * 0.5
            }
        } else {
            let (c, s) = grid.locate(t);
            ev.at(c, s)
        };
        out.set_column(col, &value);
    }
    Ok(out)
}

/// `‖x^N‖_{L²} = sqrt(cᵀ B^N c)`
pub fn l2_norm(sol: &DetailedSolution) -> f64 {
    sol.coeffs
        .dot(&spmv(&sol.disc.matrix, &sol.coeffs))
        .max(0.0)
        .sqrt()
}

/// `‖x^N − x_ref‖_{L²}` by composite Gauss quadrature with `points` nodes
/// per cell.
pub fn l2_error(
    sol: &DetailedSolution,
    reference: &dyn Fn(f64) -> DVector<f64>,
    points: usize,
) -> f64 {
    let grid = sol.grid();
    let ev = CellEval::new(sol);
    let (xs, ws) = gauss_legendre(points);
    let mut acc = 0.0;
    for c in 0..grid.intervals() {
        for (&s, &w) in xs.iter().zip(&ws) {
            let t = grid.node(c) + s * grid.dt();
            acc += w * grid.dt() * (ev.at(c, s) - reference(t)).norm_squared();
        }
    }
    acc.sqrt()
}

/// `‖x₁ − x₂‖_{L²}` for two solutions on possibly different grids of the
/// same horizon, integrated exactly over the union of their breakpoints.
pub fn l2_distance(a: &DetailedSolution, b: &DetailedSolution) -> Result<f64> {
    let (ga, gb) = (a.grid(), b.grid());
    if !ga.same_horizon(gb) {
        return Err(Error::GridMismatch {
            left: ga.horizon(),
            right: gb.horizon(),
        });
    }
    let mut cuts: Vec<f64> = ga.nodes().into_iter().chain(gb.nodes()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * ga.horizon());
    let (ea, eb) = (CellEval::new(a), CellEval::new(b));
    // Integrands are quadratic on each piece.
    let (xs, ws) = gauss_legendre(2);
    let mut acc = 0.0;
    for win in cuts.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        let mid = 0.5 * (t0 + t1);
        let (ca, _) = ga.locate(mid);
        let (cb, _) = gb.locate(mid);
        for (&s, &w) in xs.iter().zip(&ws) {
            let t = t0 + s * (t1 - t0);
            let sa = (t - ga.node(ca)) / ga.dt();
            let sb = (t - gb.node(cb)) / gb.dt();
            acc += w * (t1 - t0) * (ea.at(ca, sa) - eb.at(cb, sb)).norm_squared();
        }
    }
    Ok(acc.sqrt())
}

/// Coefficients of the test function `Σ c_i ψ_i` in the test basis of a grid
/// refined by an integer factor (same kernel basis).
pub fn prolong_coefficients(
    coarse: &Discretization,
    fine: &Discretization,
    c: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = coarse.system.n();
    let d = coarse.kernel.d;
    let w = coarse.nodal_weights(c);
    let wf = prolong_control(&w, &coarse.grid, &fine.grid)?;
    let kf = fine.grid.intervals();
    let mut out = DVector::zeros(fine.dim());
    out.rows_mut(0, n * kf)
        .copy_from_slice(&wf.as_slice()[..n * kf]);
    out.rows_mut(n * kf, d)
        .copy_from(&c.rows(n * coarse.grid.intervals(), d));
    Ok(out)
}

/// Dual norm of the residual over the test space of the grid refined by
/// `refinement`: `sqrt(ρᵀ (B^fine)⁻¹ ρ)` with `ρ = f^fine − B^fine P c`.
pub fn estimator_detailed(sol: &DetailedSolution, refinement: usize) -> Result<f64> {
    if refinement == 0 {
        return Err(Error::InvalidInput("refinement must be at least 1".into()));
    }
    let fine = if refinement == 1 {
        sol.disc.clone()
    } else {
        sol.disc.refined(refinement)?
    };
    let pc = prolong_coefficients(&sol.disc, &fine, &sol.coeffs)?;
    let rho = fine.rhs_vector(&sol.mu)? - spmv(&fine.matrix, &pc);
    let z = fine.factor.solve(&rho);
    Ok(rho.dot(&z).max(0.0).sqrt())
}

/// Implicit Euler `(E − Δt A) x_k = E x_{k−1} + Δt f(t_k)` from `x₀(μ)`;
/// nodal states are the columns of the result.
pub fn implicit_euler_reference(
    sys: &DaeSystem,
    mu: &[f64],
    grid: &TimeGrid,
) -> Result<DMatrix<f64>> {
    let n = sys.n();
    let e = to_dense(&sys.e);
    let a = to_dense(&sys.a_at(mu)?);
    let dt = grid.dt();
    let step = &e - &a * dt;
    let lu = step.lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    if !(diag.min() > 1e-13 * diag.max()) {
        return Err(Error::StepSingular);
    }
    let mut out = DMatrix::zeros(n, grid.intervals() + 1);
    out.set_column(0, &sys.x0_at(mu)?);
    for k in 1..=grid.intervals() {
        let rhs = &e * out.column(k - 1) + sys.rhs_at(mu, grid.node(k))? * dt;
        let x = lu.solve(&rhs).ok_or(Error::StepSingular)?;
        out.set_column(k, &x);
    }
    Ok(out)
}

/// `y = C x^N` at the cell midpoints: returns the midpoints and a
/// `p×K` matrix.
pub fn output_trajectory(
    sol: &DetailedSolution,
    c: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = sol.disc.system.n();
    if c.ncols() != n {
        return Err(Error::dims("output matrix columns", n, c.ncols()));
    }
    let mids = sol.grid().midpoints();
    let x = evaluate_state(sol, &mids)?;
    Ok((mids, c * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_from_rows;
    use crate::system::{ScalarProfile, Theta, TimeFunction};

    fn algebraic() -> DaeSystem {
        DaeSystem::new(
            csc_from_rows(1, 1, &[0.0]),
            csc_from_rows(1, 1, &[1.0]),
            1.0,
        )
        .with_rhs(
            Theta::one(),
            TimeFunction::Profile {
                direction: DVector::from_vec(vec![1.0]),
                profile: ScalarProfile::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
            },
        )
    }

    fn decay(k: usize) -> DetailedSolution {
        let sys = DaeSystem::new(
            csc_from_rows(1, 1, &[1.0]),
            csc_from_rows(1, 1, &[-1.0]),
            1.0,
        )
        .with_rhs(
            Theta::one(),
            TimeFunction::Constant(DVector::from_vec(vec![1.0])),
        );
        solve_detailed(&sys, &[], &TimeGrid::new(1.0, k).unwrap()).unwrap()
    }

    #[test]
    fn algebraic_equation_is_solved_exactly() {
        let sol = solve_detailed(&algebraic(), &[], &TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let err = l2_error(&sol, &|t| DVector::from_vec(vec![-t]), 4);
        assert!(err < 1e-12, "{err}");
        let x = evaluate_state(&sol, &[0.25, 0.5, 1.0]).unwrap();
        assert!((x[(0, 0)] + 0.25).abs() < 1e-12);
        assert!((x[(0, 1)] + 0.5).abs() < 1e-12);
        assert!((x[(0, 2)] + 1.0).abs() < 1e-12);
        assert!(sol.residual_norm().unwrap() < 1e-12);
    }

    #[test]
    fn zero_coefficients_evaluate_to_zero() {
        let sol = decay(4);
        let zero = DetailedSolution::from_coeffs(sol.disc.clone(), &[], DVector::zeros(4)).unwrap();
        assert_eq!(evaluate_state(&zero, &[0.0, 0.3, 1.0]).unwrap().amax(), 0.0);
        assert!(matches!(
            evaluate_state(&zero, &[1.5]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn gram_identity_for_unit_coefficients() {
        let sol = decay(4);
        let mut e1 = DVector::zeros(4);
        e1[0] = 1.0;
        let unit = DetailedSolution::from_coeffs(sol.disc.clone(), &[], e1).unwrap();
        let b00 = to_dense(&sol.disc.matrix)[(0, 0)];
        assert!((l2_norm(&unit) - b00.sqrt()).abs() < 1e-14);
        // quadrature of the same function agrees
        let q = l2_error(&unit, &|_| DVector::zeros(1), 4);
        assert!((q - b00.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn decay_error_is_first_order() {
        let exact = |t: f64| DVector::from_vec(vec![1.0 - (-t).exp()]);
        let e1 = l2_error(&decay(64), &exact, 4);
        let e2 = l2_error(&decay(128), &exact, 4);
        let rate = (e1 / e2).log2();
        assert!((rate - 1.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn estimator_vanishes_on_its_own_space_and_grows_with_refinement() {
        let sol = decay(16);
        assert!(estimator_detailed(&sol, 1).unwrap() < 1e-10);
        let r2 = estimator_detailed(&sol, 2).unwrap();
        let r4 = estimator_detailed(&sol, 4).unwrap();
        assert!(r2 > 0.0 && r4 >= r2);
    }

    #[test]
    fn distance_on_nested_grids_matches_quadrature() {
        let a = decay(8);
        let b = decay(24);
        let fine = *b.grid();
        let (xs, ws) = gauss_legendre(3);
        let mut acc = 0.0;
        for c in 0..fine.intervals() {
            let ts: Vec<f64> = xs.iter().map(|s| fine.node(c) + s * fine.dt()).collect();
            let diff = evaluate_state(&a, &ts).unwrap() - evaluate_state(&b, &ts).unwrap();
            for (col, w) in diff.column_iter().zip(&ws) {
                acc += w * fine.dt() * col.norm_squared();
            }
        }
        let d = l2_distance(&a, &b).unwrap();
        assert!((acc.sqrt() - d).abs() < 1e-13);
        assert!((l2_distance(&b, &a).unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn implicit_euler_examples() {
        let sys = DaeSystem::new(
            csc_from_rows(1, 1, &[1.0]),
            csc_from_rows(1, 1, &[-1.0]),
            1.0,
        )
        .with_rhs(
            Theta::one(),
            TimeFunction::Constant(DVector::from_vec(vec![1.0])),
        );
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let x = implicit_euler_reference(&sys, &[], &grid).unwrap();
        for k in 0..=10 {
            let want = 1.0 - (1.1f64).powi(-(k as i32));
            assert!((x[(0, k)] - want).abs() < 1e-14);
        }
        let x = implicit_euler_reference(&algebraic(), &[], &grid).unwrap();
        for k in 1..=10 {
            assert!((x[(0, k)] + grid.node(k)).abs() < 1e-15);
        }
        let singular = DaeSystem::new(
            csc_from_rows(1, 1, &[0.0]),
            csc_from_rows(1, 1, &[0.0]),
            1.0,
        );
        assert!(matches!(
            implicit_euler_reference(&singular, &[], &grid),
            Err(Error::StepSingular)
        ));
    }

    #[test]
    fn output_trajectory_picks_components() {
        let sol = decay(8);
        let (mids, y) = output_trajectory(&sol, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let x = evaluate_state(&sol, &mids).unwrap();
        assert_eq!(y, x);
        let (_, z) = output_trajectory(&sol, &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(z.amax(), 0.0);
        assert!(output_trajectory(&sol, &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn inhomogeneous_system_is_rejected() {
        let sys = DaeSystem::new(
            csc_from_rows(1, 1, &[1.0]),
            csc_from_rows(1, 1, &[-1.0]),
            1.0,
        )
        .with_initial_value(Theta::one(), DVector::from_vec(vec![1.0]));
        assert!(matches!(
            solve_detailed(&sys, &[], &TimeGrid::new(1.0, 4).unwrap()),
            Err(Error::NotHomogeneous)
        ));
    }
}
