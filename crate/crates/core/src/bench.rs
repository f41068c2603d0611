//! Benchmark systems and the convergence, greedy and control-reduction
//! studies run on them.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{csc_from_rows, spmv};
use crate::quadrature::gauss_legendre;
use crate::rbm::{greedy_with, GreedyStep, TrainingSet};
use crate::solver::{
    estimator_detailed, evaluate_state, l2_distance, l2_error, l2_norm, DetailedSolution,
    Discretization,
};
use crate::system::{homogenize, DaeSystem, ScalarProfile, Theta, TimeFunction};
use crate::temporal::TimeGrid;

/// Series RLC circuit driven by a voltage source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RlcParams {
    pub resistance: f64,
    pub inductance: f64,
    pub capacitance: f64,
    pub horizon: f64,
}

impl Default for RlcParams {
    fn default() -> Self {
        RlcParams {
            resistance: 1.0,
            inductance: 1.0,
            capacitance: 1.0,
            horizon: 4.0 * PI,
        }
    }
}

impl RlcParams {
    fn check(&self) -> Result<()> {
        let ok = [
            self.resistance,
            self.inductance,
            self.capacitance,
            self.horizon,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "RLC parameters must be positive: {self:?}"
            )))
        }
    }
}

/// State `(I, V_C, V_L, V_R)` with `E = diag(1,1,0,0)` and source term
/// `(0, 0, 0, −f)`.
pub fn make_rlc(p: &RlcParams, source: ScalarProfile) -> Result<DaeSystem> {
    p.check()?;
    let e = csc_from_rows(
        4,
        4,
        &[
            1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.,
        ],
    );
    #[rustfmt::skip]
    let a = csc_from_rows(4, 4, &[
        0.0, 0.0, 1.0 / p.inductance, 0.0,
        1.0 / p.capacitance, 0.0, 0.0, 0.0,
        p.resistance, 0.0, 0.0, -1.0,
        0.0, 1.0, 1.0, 1.0,
    ]);
    Ok(DaeSystem::new(e, a, p.horizon).with_rhs(
        Theta::one(),
        TimeFunction::Profile {
            direction: DVector::from_vec(vec![0.0, 0.0, 0.0, -1.0]),
            profile: source,
        },
    ))
}

#[derive(Clone, Copy, Debug)]
enum Transient {
    /// `e^{−γt}(c₁ cos ωt + c₂ sin ωt)`
    Under {
        gamma: f64,
        omega: f64,
        c1: f64,
        c2: f64,
    },
    /// `c₁e^{r₁t} + c₂e^{r₂t}`
    Over { r1: f64, r2: f64, c1: f64, c2: f64 },
    /// `e^{rt}(c₁ + c₂t)`
    Critical { r: f64, c1: f64, c2: f64 },
}

impl Transient {
    /// Solution of `L h'' + R h' + h/C = 0` with `h(0) = h0`, `h'(0) = h1`.
    fn new(p: &RlcParams, h0: f64, h1: f64) -> Self {
        let (r, l, c) = (p.resistance, p.inductance, p.capacitance);
        let disc = r * r - 4.0 * l / c;
        let gamma = r / (2.0 * l);
        let scale = r * r + 4.0 * l / c;
        if disc.abs() <= 1e-12 * scale {
            Transient::Critical {
                r: -gamma,
                c1: h0,
                c2: h1 + gamma * h0,
            }
        } else if disc < 0.0 {
            let omega = (-disc).sqrt() / (2.0 * l);
            Transient::Under {
                gamma,
                omega,
                c1: h0,
                c2: (h1 + gamma * h0) / omega,
            }
        } else {
            let s = disc.sqrt() / (2.0 * l);
            let (r1, r2) = (-gamma + s, -gamma - s);
            let c1 = (h1 - r2 * h0) / (r1 - r2);
            Transient::Over {
                r1,
                r2,
                c1,
                c2: h0 - c1,
            }
        }
    }

    /// `(h, h', h'')`
    fn eval(&self, t: f64) -> [f64; 3] {
        match *self {
            Transient::Under {
                gamma,
                omega,
                c1,
                c2,
            } => {
                let (s, co) = (omega * t).sin_cos();
                let g = (-gamma * t).exp();
                let h = c1 * co + c2 * s;
                let dh = -c1 * omega * s + c2 * omega * co;
                let ddh = -omega * omega * h;
                [
                    g * h,
                    g * (dh - gamma * h),
                    g * (ddh - 2.0 * gamma * dh + gamma * gamma * h),
                ]
            }
            Transient::Over { r1, r2, c1, c2 } => {
                let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
                [
                    c1 * e1 + c2 * e2,
                    c1 * r1 * e1 + c2 * r2 * e2,
                    c1 * r1 * r1 * e1 + c2 * r2 * r2 * e2,
                ]
            }
            Transient::Critical { r, c1, c2 } => {
                let g = (r * t).exp();
                let h = c1 + c2 * t;
                [g * h, g * (r * h + c2), g * (r * r * h + 2.0 * r * c2)]
            }
        }
    }
}

/// Closed-form solution of the RLC system for `f(t) = a sin(ωt)` from rest.
///
/// The current solves `L I'' + R I' + I/C = f'` with `I(0) = I'(0) = 0`;
/// the voltages follow as `V_L = L I'`, `V_R = R I`, `V_C = f − V_L − V_R`.
#[derive(Clone, Copy, Debug)]
pub struct RlcAnalytic {
    params: RlcParams,
    amplitude: f64,
    omega: f64,
    /// Periodic part `P cos ωt + Q sin ωt` of the current.
    p: f64,
    q: f64,
    transient: Transient,
}

impl RlcAnalytic {
    pub fn new(params: &RlcParams, source: &ScalarProfile) -> Result<Self> {
        params.check()?;
        let ScalarProfile::Sine { amplitude, omega } = *source else {
            return Err(Error::UnsupportedSource(format!("{source:?}")));
        };
        let (r, l, c) = (params.resistance, params.inductance, params.capacitance);
        let alpha = 1.0 / c - l * omega * omega;
        let beta = r * omega;
        let den = alpha * alpha + beta * beta;
        let p = amplitude * omega * alpha / den;
        let q = amplitude * omega * beta / den;
        Ok(RlcAnalytic {
            params: *params,
            amplitude,
            omega,
            p,
            q,
            transient: Transient::new(params, -p, -q * omega),
        })
    }

    /// `(I, I', I'')`
    fn current(&self, t: f64) -> [f64; 3] {
        let (s, c) = (self.omega * t).sin_cos();
        let w = self.omega;
        let [h, dh, ddh] = self.transient.eval(t);
        [
            self.p * c + self.q * s + h,
            w * (-self.p * s + self.q * c) + dh,
            -w * w * (self.p * c + self.q * s) + ddh,
        ]
    }

    pub fn state(&self, t: f64) -> DVector<f64> {
        let [i, di, _] = self.current(t);
        let f = self.amplitude * (self.omega * t).sin();
        let vl = self.params.inductance * di;
        let vr = self.params.resistance * i;
        DVector::from_vec(vec![i, f - vl - vr, vl, vr])
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let [_, di, ddi] = self.current(t);
        let df = self.amplitude * self.omega * (self.omega * t).cos();
        let vl = self.params.inductance * ddi;
        let vr = self.params.resistance * di;
        DVector::from_vec(vec![di, df - vl - vr, vl, vr])
    }
}

pub fn rlc_analytic(p: &RlcParams, source: &ScalarProfile, t: f64) -> Result<DVector<f64>> {
    Ok(RlcAnalytic::new(p, source)?.state(t))
}

/// Synthetic semi-discrete Stokes flow in the unit square on a staggered
/// grid, driven by one velocity input.
#[derive(Clone, Debug, PartialEq)]
pub struct StokesLikeParams {
    /// Cells per side `m_g`.
    pub cells: usize,
    pub viscosity: f64,
    pub horizon: f64,
    /// Control grid intervals `K_u`.
    pub control_intervals: usize,
    /// Velocity unknown receiving the input; defaults to the x-face nearest
    /// the centre.
    pub input: Option<usize>,
    /// Velocity unknown observed by the output; defaults to a y-face in the
    /// lower-left quadrant.
    pub output: Option<usize>,
    /// Add the divergence-free initial velocity built from the stream
    /// function `sin²(πx) sin²(πy)`.
    pub initial_vortex: bool,
}

impl Default for StokesLikeParams {
    fn default() -> Self {
        StokesLikeParams {
            cells: 8,
            viscosity: 0.1,
            horizon: 1.0,
            control_intervals: 75,
            input: None,
            output: None,
            initial_vortex: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StokesLike {
    pub system: DaeSystem,
    pub velocity: usize,
    pub pressure: usize,
    /// Discrete divergence, `pressure × velocity`.
    pub divergence: CscMatrix<f64>,
}

impl StokesLike {
    /// The system shifted to a zero initial value.
    pub fn homogeneous(&self) -> Result<DaeSystem> {
        homogenize(&self.system, &[])
    }

    /// `max_t ‖D u(t)‖ / max_t ‖u(t)‖` over the cell midpoints of `sol`.
    /// The shift removed by homogenization is divergence-free and is added
    /// back to the velocity.
    pub fn divergence_ratio(&self, sol: &DetailedSolution) -> Result<f64> {
        let mids = sol.grid().midpoints();
        let x = evaluate_state(sol, &mids)?;
        let x0 = self.system.x0_at(&sol.mu)?;
        let (mut div, mut vel) = (0.0f64, 0.0f64);
        for col in x.column_iter() {
            let u = (col.rows(0, self.velocity) + x0.rows(0, self.velocity)).into_owned();
            div = div.max(spmv(&self.divergence, &u).norm());
            vel = vel.max(u.norm());
        }
        Ok(if vel == 0.0 { 0.0 } else { div / vel })
    }
}

/// Velocity layout: x-faces `(i, j)`, `i = 1..m−1`, `j = 0..m−1` first,
/// then y-faces `(i, j)`, `i = 0..m−1`, `j = 1..m−1`. Pressure lives in
/// the cells, the last one dropped to fix the constant.
pub fn make_stokes_like(p: &StokesLikeParams) -> Result<StokesLike> {
    let m = p.cells;
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 cells per side, got {m}"
        )));
    }
    if !(p.viscosity > 0.0 && p.viscosity.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "viscosity must be positive, got {}",
            p.viscosity
        )));
    }
    if p.control_intervals == 0 {
        return Err(Error::InvalidInput(
            "control needs at least one interval".into(),
        ));
    }
    let h = 1.0 / m as f64;
    let nx = (m - 1) * m;
    let nv = 2 * nx;
    let np = m * m - 1;
    let n = nv + np;
    let ux = |i: usize, j: usize| (i - 1) * m + j;
    let uy = |i: usize, j: usize| nx + i * (m - 1) + (j - 1);

    let mut coo = CooMatrix::new(n, n);
    let lap = p.viscosity / (h * h);
    // x-faces: Dirichlet walls at i = 0, m lie on faces; walls at y = 0, 1
    // are half a cell away and use the ghost value −u.
    for i in 1..m {
        for j in 0..m {
            let r = ux(i, j);
            let mut diag = -2.0;
            for ii in [i - 1, i + 1] {
                if (1..m).contains(&ii) {
                    coo.push(r, ux(ii, j), lap);
                }
            }
            for jj in [j.wrapping_sub(1), j + 1] {
                if jj < m {
                    coo.push(r, ux(i, jj), lap);
                    diag -= 1.0;
                } else {
                    diag -= 2.0;
                }
            }
            coo.push(r, r, lap * diag);
        }
    }
    for i in 0..m {
        for j in 1..m {
            let r = uy(i, j);
            let mut diag = -2.0;
            for jj in [j - 1, j + 1] {
                if (1..m).contains(&jj) {
                    coo.push(r, uy(i, jj), lap);
                }
            }
            for ii in [i.wrapping_sub(1), i + 1] {
                if ii < m {
                    coo.push(r, uy(ii, j), lap);
                    diag -= 1.0;
                } else {
                    diag -= 2.0;
                }
            }
            coo.push(r, r, lap * diag);
        }
    }
    let mut div = CooMatrix::new(np, nv);
    for i in 0..m {
        for j in 0..m {
            let c = i * m + j;
            if c == m * m - 1 {
                continue;
            }
            if i + 1 < m {
                div.push(c, ux(i + 1, j), 1.0 / h);
            }
            if i > 0 {
                div.push(c, ux(i, j), -1.0 / h);
            }
            if j + 1 < m {
                div.push(c, uy(i, j + 1), 1.0 / h);
            }
            if j > 0 {
                div.push(c, uy(i, j), -1.0 / h);
            }
        }
    }
    for (r, c, &v) in div.triplet_iter() {
        coo.push(nv + r, c, v);
        coo.push(c, nv + r, v);
    }
    let a = CscMatrix::from(&coo);
    let mut ecoo = CooMatrix::new(n, n);
    for i in 0..nv {
        ecoo.push(i, i, 1.0);
    }
    let e = CscMatrix::from(&ecoo);

    let input = p.input.unwrap_or(ux(m / 2, m / 2));
    let output = p.output.unwrap_or(uy(m / 4, (m / 4).max(1)));
    if input >= nv || output >= nv {
        return Err(Error::InvalidInput(format!(
            "input/output must address one of the {nv} velocity unknowns"
        )));
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(input, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, n);
    c[(0, output)] = 1.0;

    let mut system = DaeSystem::new(e, a, p.horizon)
        .with_control(b, p.control_intervals)
        .with_output(c);
    if p.initial_vortex {
        // u = ∂ψ/∂y, v = −∂ψ/∂x from corner values of ψ, exactly
        // divergence-free in the discrete sense.
        let psi = |i: usize, j: usize| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            ((PI * x).sin() * (PI * y).sin()).powi(2)
        };
        let mut x0 = DVector::zeros(n);
        for i in 1..m {
            for j in 0..m {
                x0[ux(i, j)] = (psi(i, j + 1) - psi(i, j)) / h;
            }
        }
        for i in 0..m {
            for j in 1..m {
                x0[uy(i, j)] = -(psi(i + 1, j) - psi(i, j)) / h;
            }
        }
        system = system.with_initial_value(Theta::one(), x0);
    }
    Ok(StokesLike {
        system,
        velocity: nv,
        pressure: np,
        divergence: CscMatrix::from(&div),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let m = pts.len() as f64;
    if m < 2.0 {
        return f64::NAN;
    }
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |acc, p| {
        (acc.0 + (p.0 - mx) * (p.1 - my), acc.1 + (p.0 - mx).powi(2))
    });
    num / den
}

/// Reference solution for a convergence study.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    Exact(&'a (dyn Fn(f64) -> DVector<f64> + Sync)),
    /// Detailed solution on a grid `factor` times finer than the largest `K`.
    Refined {
        factor: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub k: usize,
    pub rel_err: f64,
    pub rel_est: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub error_slope: f64,
    pub estimator_slope: f64,
}

/// Gauss points per cell when integrating against a closed-form reference.
const REFERENCE_POINTS: usize = 4;

/// `‖g‖_{L²(0,T)}` by composite Gauss quadrature.
pub fn function_l2_norm(g: &dyn Fn(f64) -> DVector<f64>, horizon: f64, cells: usize) -> f64 {
    let (xs, ws) = gauss_legendre(REFERENCE_POINTS);
    let dt = horizon / cells as f64;
    let mut acc = 0.0;
    for c in 0..cells {
        for (&s, &w) in xs.iter().zip(&ws) {
            acc += w * dt * g((c as f64 + s) * dt).norm_squared();
        }
    }
    acc.sqrt()
}

/// Relative error and relative estimator (refinement `refinement`) for each
/// `K` in `ks`.
pub fn convergence_study(
    sys: &DaeSystem,
    mu: &[f64],
    reference: Reference<'_>,
    ks: &[usize],
    refinement: usize,
) -> Result<ConvergenceTable> {
    sys.check_mu(mu)?;
    if ks.is_empty() {
        return Err(Error::InvalidInput("no grid sizes given".into()));
    }
    let sys = Arc::new(sys.clone());
    let kmax = *ks.iter().max().unwrap();
    let fine = match reference {
        Reference::Refined { factor } => {
            if factor < 2 {
                return Err(Error::InvalidInput(
                    "reference refinement must be at least 2".into(),
                ));
            }
            let grid = TimeGrid::new(sys.horizon, kmax * factor)?;
            Some(Discretization::new(sys.clone(), mu, grid)?.solve(mu)?)
        }
        Reference::Exact(_) => None,
    };
    let ref_norm = match (&fine, reference) {
        (Some(f), _) => l2_norm(f),
        (None, Reference::Exact(g)) => function_l2_norm(g, sys.horizon, 4 * kmax),
        _ => unreachable!(),
    };
    if ref_norm == 0.0 {
        return Err(Error::InvalidInput("reference solution vanishes".into()));
    }
    let rows = ks
        .par_iter()
        .map(|&k| {
            let grid = TimeGrid::new(sys.horizon, k)?;
            let sol = Discretization::new(sys.clone(), mu, grid)?.solve(mu)?;
            let err = match (&fine, reference) {
                (Some(f), _) => l2_distance(&sol, f)?,
                (None, Reference::Exact(g)) => l2_error(&sol, g, REFERENCE_POINTS),
                _ => unreachable!(),
            };
            let est = estimator_detailed(&sol, refinement)?;
            log::info!(
                "convergence K={k} rel_err={:.4e} rel_est={:.4e}",
                err / ref_norm,
                est / ref_norm
            );
            Ok(ConvergenceRow {
                k,
                rel_err: err / ref_norm,
                rel_est: est / ref_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let kx: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ee: Vec<f64> = rows.iter().map(|r| r.rel_err).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.rel_est).collect();
    Ok(ConvergenceTable {
        error_slope: loglog_slope(&kx, &ee),
        estimator_slope: loglog_slope(&kx, &es),
        rows,
    })
}

/// `‖x^{2K} − x^K‖_{L²}` for each `K` in `ks`.
pub fn doubling_differences(
    sys: &DaeSystem,
    mu: &[f64],
    ks: &[usize],
) -> Result<Vec<(usize, f64)>> {
    sys.check_mu(mu)?;
    let sys = Arc::new(sys.clone());
    ks.par_iter()
        .map(|&k| {
            let coarse = Discretization::new(sys.clone(), mu, TimeGrid::new(sys.horizon, k)?)?;
            let fine = coarse.refined(2)?;
            Ok((k, l2_distance(&coarse.solve(mu)?, &fine.solve(mu)?)?))
        })
        .collect()
}

/// Greedy decay curve for each `K`; `build(K)` supplies the system, whose
/// parameter box is `[lower, upper]^P`.
pub fn greedy_study(
    build: &dyn Fn(usize) -> Result<DaeSystem>,
    ks: &[usize],
    bounds: (f64, f64),
    train_size: usize,
    seed: u64,
    n_max: Option<usize>,
) -> Result<Vec<(usize, Vec<GreedyStep>)>> {
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let sys = build(k)?;
        let p = sys.param_dim;
        let train = TrainingSet::uniform(&vec![bounds.0; p], &vec![bounds.1; p], train_size, seed)?;
        let q_f = sys.rhs_terms().len();
        let grid = TimeGrid::new(sys.horizon, k)?;
        let disc = Discretization::new(Arc::new(sys), &train.params[0], grid)?;
        let res = greedy_with(&disc, &train, 0.0, n_max.unwrap_or(q_f))?;
        out.push((k, res.history));
    }
    Ok(out)
}

/// Random smooth control `u(t) = Σ_j a_j sin(jπt/T + φ_j)`, `j = 1..=4`.
pub fn smooth_control(rng: &mut ChaCha8Rng, horizon: f64) -> impl Fn(f64) -> f64 + Send + Sync {
    let modes: Vec<(f64, f64)> = (1..=4)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    move |t| {
        modes
            .iter()
            .enumerate()
            .map(|(j, (a, phi))| a * ((j + 1) as f64 * PI * t / horizon + phi).sin())
            .sum()
    }
}

/// Samples a scalar control at the `ku + 1` nodes of the control grid.
pub fn control_samples(u: &dyn Fn(f64) -> f64, horizon: f64, ku: usize) -> Vec<f64> {
    (0..=ku)
        .map(|k| u(horizon * k as f64 / ku as f64))
        .collect()
}

/// Maximum relative state error of the control sampled on `K_u` nodes
/// against the control sampled on the state grid, over `samples` random
/// smooth controls. `build(K_u)` supplies a homogeneous single-input system.
pub fn timereduction_study(
    build: &dyn Fn(usize) -> Result<DaeSystem>,
    k: usize,
    kus: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let full_sys = build(k)?;
    let horizon = full_sys.horizon;
    let grid = TimeGrid::new(horizon, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let controls: Vec<_> = (0..samples)
        .map(|_| smooth_control(&mut rng, horizon))
        .collect();
    let extra = |sys: &DaeSystem, ku: usize| -> Result<usize> {
        let ctrl = sys
            .control
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("system has no control".into()))?;
        if ctrl.inputs() != 1 || ctrl.intervals != ku {
            return Err(Error::InvalidInput(format!(
                "expected one input on {ku} control intervals"
            )));
        }
        Ok(sys.param_dim - (ku + 1))
    };
    let tail = extra(&full_sys, k)?;
    let mu_for = |u: &dyn Fn(f64) -> f64, ku: usize| {
        let mut mu = control_samples(u, horizon, ku);
        mu.extend(std::iter::repeat_n(1.0, tail));
        mu
    };
    let full = Discretization::new(Arc::new(full_sys), &mu_for(&controls[0], k), grid)?;
    let truth: Vec<DetailedSolution> = controls
        .par_iter()
        .map(|u| full.solve(&mu_for(u, k)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(kus.len());
    for &ku in kus {
        let sys = build(ku)?;
        if extra(&sys, ku)? != tail {
            return Err(Error::InvalidInput(
                "systems differ beyond the control grid".into(),
            ));
        }
        let disc = Discretization::new(Arc::new(sys), &mu_for(&controls[0], ku), grid)?;
        let errs = controls
            .par_iter()
            .zip(&truth)
            .map(|(u, x)| {
                let xr = disc.solve(&mu_for(u, ku))?;
                Ok(l2_distance(x, &xr)? / l2_norm(x))
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = errs.into_iter().fold(0.0f64, f64::max);
        log::info!("timereduction Ku={ku} max_rel_err={worst:.4e}");
        out.push((ku, worst));
    }
    Ok(out)
}
