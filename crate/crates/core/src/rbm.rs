//! Weak greedy reduced basis with an online-efficient certified estimator.
//!
//! Only the right-hand side may depend on the parameter. Snapshots are
//! stored through their test coefficients `η` (the trial function is
//! `B*η`), orthonormalized in the energy inner product so that `B_N = I`.
//!
//! For a reduced solution `x_N` the residual has the Riesz representer
//! `R θ − Eta x_N` with `R = (B^N)⁻¹ F` the representers of the affine
//! right-hand side terms. Splitting `R = R⊥ + Eta Aᵀ`, where
//! `A = Fᵀ Eta` and `R⊥` is energy-orthogonal to the basis, gives
//!
//! ```text
//! Δ_N(μ)² = θᵀ (R⊥ᵀ B^N R⊥) θ + ‖Aᵀθ − x_N‖²_{B_N}
//! ```
//!
//! which is evaluated from a factor `S` with `SᵀS = R⊥ᵀ B^N R⊥`, free of
//! the cancellation of the expanded quadratic form.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::assemble_rhs_terms;
use crate::error::{Error, Result};
use crate::io::{read_dense, write_dense, write_json};
use crate::linalg::spmv;
use crate::solver::{DetailedSolution, Discretization};
use crate::system::{DaeSystem, KernelBasis, Theta};
use crate::temporal::TimeGrid;

/// Relative norm below which an orthogonalized snapshot counts as dependent.
const REJECT_TOL: f64 = 1e-10;

pub const MODEL_SCHEMA: &str = "uwdae-reduced-model/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub params: Vec<Vec<f64>>,
    pub seed: u64,
}

impl TrainingSet {
    /// `count` i.i.d. uniform samples of the box `[lower, upper]`.
    pub fn uniform(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dims("parameter box", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput(
                "parameter box has lower > upper".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..count)
            .map(|_| {
                lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..u) })
                    .collect()
            })
            .collect();
        Ok(TrainingSet { params, seed })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// One line of the greedy history: basis size, the training index with the
/// largest estimator, and that estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub n: usize,
    pub argmax: usize,
    pub max_error: f64,
}

/// Offline quantities of the final basis; truncated models are cut from it.
#[derive(Debug)]
pub struct OfflineData {
    pub disc: Arc<Discretization>,
    pub thetas: Vec<Theta>,
    /// `F`: one column `f_q` per affine right-hand side term.
    pub f_terms: DMatrix<f64>,
    /// `R = (B^N)⁻¹ F`
    pub representers: DMatrix<f64>,
    pub eta: DMatrix<f64>,
    pub b_eta: DMatrix<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n: usize,
    #[serde(rename = "K")]
    pub intervals: usize,
    pub d: usize,
    pub detailed: usize,
    pub q_f: usize,
    #[serde(rename = "N")]
    pub basis: usize,
    pub param_dim: usize,
    pub horizon: f64,
}

#[derive(Clone, Debug)]
pub struct ReducedModel {
    pub dims: ModelDims,
    pub thetas: Vec<Theta>,
    pub snapshots: Vec<Vec<f64>>,
    pub seed: u64,
    /// `𝒩×N` test coefficients, energy-orthonormal.
    pub eta: DMatrix<f64>,
    /// `Etaᵀ B^N Eta`
    pub b_n: DMatrix<f64>,
    /// `Q_f×N`, entries `f_qᵀ η_j`.
    pub rhs_offline: DMatrix<f64>,
    /// `(Q_f+N)²` Gram of the residual pieces, ordered `[θ; −x_N]`.
    pub estimator_gram: DMatrix<f64>,
    /// `S` with `SᵀS = R⊥ᵀ B^N R⊥`.
    pub residual_factor: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
}

#[derive(Debug)]
pub struct GreedyResult {
    pub offline: OfflineData,
    pub model: ReducedModel,
    pub history: Vec<GreedyStep>,
}

/// Orthogonal-complement data maintained during the greedy loop.
struct Complement {
    r_perp: DMatrix<f64>,
    b_r_perp: DMatrix<f64>,
}

impl Complement {
    fn remove(&mut self, eta: &DVector<f64>, b_eta: &DVector<f64>) {
        let coef = b_eta.transpose() * &self.r_perp;
        self.r_perp -= eta * &coef;
        self.b_r_perp -= b_eta * &coef;
    }

    fn gram(&self) -> DMatrix<f64> {
        let g = self.r_perp.transpose() * &self.b_r_perp;
        (&g + g.transpose()) * 0.5
    }
}

/// `S = Λ^{1/2} Uᵀ` from `G = U Λ Uᵀ`, negative round-off dropped.
fn psd_factor(g: &DMatrix<f64>) -> DMatrix<f64> {
    if g.nrows() == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = g.clone().symmetric_eigen();
    let mut s = eig.eigenvectors.transpose();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        s.row_mut(i).scale_mut(l.max(0.0).sqrt());
    }
    s
}

fn eval_thetas(thetas: &[Theta], mu: &[f64]) -> Result<DVector<f64>> {
    let v = thetas
        .iter()
        .map(|t| t.eval(mu))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(v))
}

impl OfflineData {
    pub fn basis_size(&self) -> usize {
        self.eta.ncols()
    }

    /// Reduced model on the first `n` basis functions.
    pub fn build_model(&self, n: usize) -> Result<ReducedModel> {
        if n == 0 || n > self.basis_size() {
            return Err(Error::InvalidInput(format!(
                "basis size {n} outside 1..={}",
                self.basis_size()
            )));
        }
        let eta = self.eta.columns(0, n).into_owned();
        let b_eta = self.b_eta.columns(0, n);
        let b_n = {
            let m = eta.transpose() * b_eta;
            (&m + m.transpose()) * 0.5
        };
        let rhs_offline = self.f_terms.transpose() * &eta;
        let r_perp = &self.representers - &eta * (b_eta.transpose() * &self.representers);
        let b_r_perp = &self.f_terms - b_eta * (b_eta.transpose() * &self.representers);
        let g_perp = {
            let g = r_perp.transpose() * b_r_perp;
            (&g + g.transpose()) * 0.5
        };
        let residual_factor = psd_factor(&g_perp);

        let q = self.thetas.len();
        let g_ff = {
            let g = self.representers.transpose() * &self.f_terms;
            (&g + g.transpose()) * 0.5
        };
        let mut gram = DMatrix::zeros(q + n, q + n);
        gram.view_mut((0, 0), (q, q)).copy_from(&g_ff);
        gram.view_mut((0, q), (q, n)).copy_from(&rhs_offline);
        gram.view_mut((q, 0), (n, q))
            .copy_from(&rhs_offline.transpose());
        gram.view_mut((q, q), (n, n)).copy_from(&b_n);

        let disc = &self.disc;
        Ok(ReducedModel {
            dims: ModelDims {
                n: disc.system.n(),
                intervals: disc.grid.intervals(),
                d: disc.kernel.d,
                detailed: disc.dim(),
                q_f: q,
                basis: n,
                param_dim: disc.system.param_dim,
                horizon: disc.grid.horizon(),
            },
            thetas: self.thetas.clone(),
            snapshots: self.snapshots[..n].to_vec(),
            seed: self.seed,
            eta,
            b_n,
            rhs_offline,
            estimator_gram: gram,
            residual_factor,
            kernel: disc.kernel.v.clone(),
        })
    }
}

/// Runs the weak greedy loop on a prepared discretization.
pub fn greedy_with(
    disc: &Arc<Discretization>,
    train: &TrainingSet,
    eps: f64,
    n_max: usize,
) -> Result<GreedyResult> {
    let sys = &disc.system;
    if !sys.has_parameter_independent_a() {
        return Err(Error::ParameterDependentOperator);
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidInput("N_max must be at least 1".into()));
    }
    for mu in &train.params {
        sys.check_mu(mu)?;
    }
    let thetas: Vec<Theta> = sys.rhs_terms().into_iter().map(|t| t.theta).collect();
    let f_terms = assemble_rhs_terms(sys, &disc.rhs)?;
    let representers = disc.factor.solve_many(&f_terms);
    let theta_train: Vec<DVector<f64>> = train
        .params
        .iter()
        .map(|mu| eval_thetas(&thetas, mu))
        .collect::<Result<_>>()?;
    log::info!(
        "greedy: dim={} Q_f={} |train|={} eps={eps:e} N_max={n_max}",
        disc.dim(),
        thetas.len(),
        train.len()
    );

    let mut comp = Complement {
        r_perp: representers.clone(),
        b_r_perp: f_terms.clone(),
    };
    let dim = disc.dim();
    let mut eta = DMatrix::zeros(dim, 0);
    let mut b_eta = DMatrix::zeros(dim, 0);
    let mut snapshots = Vec::new();
    let mut history = Vec::new();

    // First parameter: largest ‖f^N(μ)‖.
    let norms: Vec<f64> = theta_train
        .par_iter()
        .map(|th| (&f_terms * th).norm())
        .collect();
    let mut ranking = rank_desc(&norms);

    loop {
        let mut added = false;
        for &idx in &ranking {
            let candidate = &representers * &theta_train[idx];
            if let Some((e, be)) = orthonormalize(&candidate, &eta, &b_eta, disc) {
                comp.remove(&e, &be);
                eta = extend(&eta, &e);
                b_eta = extend(&b_eta, &be);
                snapshots.push(train.params[idx].clone());
                added = true;
                break;
            }
            log::debug!("greedy: candidate {idx} rejected as dependent");
        }
        if !added {
            log::warn!(
                "greedy: no admissible candidate left at N = {}",
                eta.ncols()
            );
            break;
        }
        let n = eta.ncols();
        let b_n = eta.transpose() * &b_eta;
        let b_n = (&b_n + b_n.transpose()) * 0.5;
        let chol = b_n.clone().cholesky().ok_or(Error::SingularReducedSystem)?;
        let a_t = eta.transpose() * &f_terms;
        let s = psd_factor(&comp.gram());
        let errors: Vec<f64> = theta_train
            .par_iter()
            .map(|th| {
                let f_n = &a_t * th;
                let x = chol.solve(&f_n);
                let gap = &f_n - &x;
                let e2 = (&s * th).norm_squared() + gap.dot(&(&b_n * &gap));
                e2.max(0.0).sqrt()
            })
            .collect();
        let order = rank_desc(&errors);
        let argmax = order[0];
        let max_error = errors[argmax];
        log::info!("greedy: N={n} max error {max_error:.3e} at {argmax}");
        history.push(GreedyStep {
            n,
            argmax,
            max_error,
        });
        if n == 1 {
            let scale = norms.iter().fold(0.0f64, |a, &b| a.max(b));
            if max_error <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::DegenerateTraining);
            }
        }
        if max_error <= eps || n >= n_max {
            break;
        }
        ranking = order;
    }

    let offline = OfflineData {
        disc: disc.clone(),
        thetas,
        f_terms,
        representers,
        eta,
        b_eta,
        snapshots,
        seed: train.seed,
    };
    let model = offline.build_model(offline.basis_size())?;
    Ok(GreedyResult {
        offline,
        model,
        history,
    })
}

pub fn greedy(
    sys: &DaeSystem,
    grid: &TimeGrid,
    train: &TrainingSet,
    eps: f64,
    n_max: usize,
) -> Result<GreedyResult> {
    let mu0 = train
        .params
        .first()
        .ok_or_else(|| Error::InvalidInput("training set is empty".into()))?;
    let disc = Discretization::new(Arc::new(sys.clone()), mu0, *grid)?;
    greedy_with(&disc, train, eps, n_max)
}

/// Indices sorted by decreasing value, ties by increasing index.
fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

fn extend(m: &DMatrix<f64>, col: &DVector<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let mut out = m.clone().insert_column(n, 0.0);
    out.set_column(n, col);
    out
}

/// Energy-orthonormalizes `v` against `eta` by modified Gram–Schmidt with
/// one reorthogonalization. Returns `(η, B η)` or `None` if `v` is
/// numerically dependent.
fn orthonormalize(
    v: &DVector<f64>,
    eta: &DMatrix<f64>,
    b_eta: &DMatrix<f64>,
    disc: &Discretization,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let bv = spmv(&disc.matrix, v);
    let norm0 = v.dot(&bv).max(0.0).sqrt();
    if norm0 == 0.0 || !norm0.is_finite() {
        return None;
    }
    let mut w = v.clone();
    let mut bw = bv;
    for _ in 0..2 {
        for j in 0..eta.ncols() {
            let c = b_eta.column(j).dot(&w);
            w.axpy(-c, &eta.column(j), 1.0);
            bw.axpy(-c, &b_eta.column(j), 1.0);
        }
    }
    let norm = w.dot(&bw).max(0.0).sqrt();
    if norm < REJECT_TOL * norm0 {
        return None;
    }
    // Recompute B w from scratch so the stored pair stays consistent.
    let w = w / norm;
    let bw = spmv(&disc.matrix, &w);
    Some((w, bw))
}

impl ReducedModel {
    pub fn basis_size(&self) -> usize {
        self.eta.ncols()
    }

    pub fn theta(&self, mu: &[f64]) -> Result<DVector<f64>> {
        if mu.len() != self.dims.param_dim {
            return Err(Error::ParameterDimensionMismatch {
                expected: self.dims.param_dim,
                got: mu.len(),
            });
        }
        eval_thetas(&self.thetas, mu)
    }

    /// `f_N(μ) = Σ_q θ_q(μ) ⟨f̃_q, η_j⟩`
    pub fn rhs(&self, mu: &[f64]) -> Result<DVector<f64>> {
        Ok(self.rhs_offline.transpose() * self.theta(mu)?)
    }

    /// Online estimator straight from the stored `(Q_f+N)²` Gram; exposed
    /// for comparison, subject to cancellation for small errors.
    pub fn estimator_expanded(&self, mu: &[f64], x_n: &DVector<f64>) -> Result<f64> {
        let th = self.theta(mu)?;
        let q = th.len();
        let mut z = DVector::zeros(q + x_n.len());
        z.rows_mut(0, q).copy_from(&th);
        z.rows_mut(q, x_n.len()).copy_from(&(-x_n));
        Ok(z.dot(&(&self.estimator_gram * &z)).max(0.0).sqrt())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if let Some(q) = self.thetas.iter().position(|t| !t.is_serializable()) {
            return Err(Error::InvalidInput(format!(
                "right-hand side coefficient {q} is a closure and cannot be saved"
            )));
        }
        let header = serde_json::json!({
            "schema": MODEL_SCHEMA,
            "dims": self.dims,
            "S_N": self.snapshots,
            "seed": self.seed,
            "thetas": self.thetas,
        });
        write_json(&dir.join("header.json"), &header)?;
        write_dense(&dir.join("eta.mtx"), &self.eta)?;
        write_dense(&dir.join("b_n.mtx"), &self.b_n)?;
        write_dense(&dir.join("rhs_offline.mtx"), &self.rhs_offline)?;
        write_dense(&dir.join("estimator_gram.mtx"), &self.estimator_gram)?;
        write_dense(&dir.join("residual_factor.mtx"), &self.residual_factor)?;
        write_dense(&dir.join("kernel.mtx"), &self.kernel)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema: String,
            dims: ModelDims,
            #[serde(rename = "S_N")]
            snapshots: Vec<Vec<f64>>,
            seed: u64,
            thetas: Vec<Theta>,
        }
        let hp = dir.join("header.json");
        let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
        let h: Header = serde_json::from_str(&text).map_err(|e| Error::parse(&hp, e))?;
        if h.schema != MODEL_SCHEMA {
            return Err(Error::parse(
                &hp,
                format!("unsupported schema {:?}", h.schema),
            ));
        }
        let model = ReducedModel {
            eta: read_dense(&dir.join("eta.mtx"))?,
            b_n: read_dense(&dir.join("b_n.mtx"))?,
            rhs_offline: read_dense(&dir.join("rhs_offline.mtx"))?,
            estimator_gram: read_dense(&dir.join("estimator_gram.mtx"))?,
            residual_factor: read_dense(&dir.join("residual_factor.mtx"))?,
            kernel: read_dense(&dir.join("kernel.mtx"))?,
            dims: h.dims,
            thetas: h.thetas,
            snapshots: h.snapshots,
            seed: h.seed,
        };
        let (n, q) = (model.dims.basis, model.dims.q_f);
        let checks = [
            ("eta", model.eta.shape(), (model.dims.detailed, n)),
            ("b_n", model.b_n.shape(), (n, n)),
            ("rhs_offline", model.rhs_offline.shape(), (q, n)),
            (
                "estimator_gram",
                model.estimator_gram.shape(),
                (q + n, q + n),
            ),
            ("residual_factor", model.residual_factor.shape(), (q, q)),
            ("kernel", model.kernel.shape(), (model.dims.n, model.dims.d)),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::parse(
                    dir.join(format!("{what}.mtx")),
                    format!("shape {got:?}, expected {want:?}"),
                ));
            }
        }
        if model.thetas.len() != q {
            return Err(Error::parse(&hp, "theta count differs from Q_f"));
        }
        Ok(model)
    }

    /// `ker Eᵀ` basis the model was trained with.
    pub fn kernel_basis(&self) -> KernelBasis {
        KernelBasis {
            d: self.kernel.ncols(),
            v: self.kernel.clone(),
            tol: crate::system::DEFAULT_RANK_TOL,
        }
    }
}

/// Solves `B_N x = f_N(μ)`.
pub fn reduced_solve(model: &ReducedModel, mu: &[f64]) -> Result<DVector<f64>> {
    let f = model.rhs(mu)?;
    let chol = model
        .b_n
        .clone()
        .cholesky()
        .ok_or(Error::SingularReducedSystem)?;
    Ok(chol.solve(&f))
}

/// `Δ_N(μ) = ‖x^N_μ − lift(x_N)‖_{L²}` evaluated online.
pub fn estimator_online(model: &ReducedModel, mu: &[f64], x_n: &DVector<f64>) -> Result<f64> {
    if x_n.len() != model.basis_size() {
        return Err(Error::dims(
            "reduced coefficients",
            model.basis_size(),
            x_n.len(),
        ));
    }
    let th = model.theta(mu)?;
    let gap = model.rhs_offline.transpose() * &th - x_n;
    let e2 = (&model.residual_factor * &th).norm_squared() + gap.dot(&(&model.b_n * &gap));
    Ok(e2.max(0.0).sqrt())
}

/// Detailed coefficients `Eta x_N`.
pub fn lift(model: &ReducedModel, x_n: &DVector<f64>) -> DVector<f64> {
    &model.eta * x_n
}

/// Lifted reduced solution attached to a discretization of the same system.
pub fn lift_solution(
    model: &ReducedModel,
    disc: &Arc<Discretization>,
    mu: &[f64],
    x_n: &DVector<f64>,
) -> Result<DetailedSolution> {
    DetailedSolution::from_coeffs(disc.clone(), mu, lift(model, x_n))
}

/// `Etaᵀ f^N(μ)` computed from the detailed right-hand side.
pub fn reduced_rhs_from_scratch(
    model: &ReducedModel,
    disc: &Discretization,
    mu: &[f64],
) -> Result<DVector<f64>> {
    Ok(model.eta.transpose() * disc.rhs_vector(mu)?)
}

/// Dual residual norm of a lifted solution on the detailed test space.
pub fn detailed_residual_norm(
    disc: &Discretization,
    mu: &[f64],
    coeffs: &DVector<f64>,
) -> Result<f64> {
    let rho = disc.rhs_vector(mu)? - spmv(&disc.matrix, coeffs);
    let z = disc.factor.solve(&rho);
    Ok(rho.dot(&z).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_from_rows;
    use crate::solver::l2_distance;

    fn controlled(ku: usize) -> DaeSystem {
        let e = csc_from_rows(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 0.]);
        let a = csc_from_rows(3, 3, &[-1., 0.5, 0., -0.5, -2., 1., 0., 1., -1.]);
        DaeSystem::new(e, a, 1.0).with_control(DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.5]), ku)
    }

    fn train(sys: &DaeSystem, count: usize, seed: u64) -> TrainingSet {
        let p = sys.param_dim;
        TrainingSet::uniform(&vec![-1.0; p], &vec![1.0; p], count, seed).unwrap()
    }

    #[test]
    fn training_set_is_reproducible() {
        let a = TrainingSet::uniform(&[0.0, -1.0], &[1.0, 1.0], 5, 9).unwrap();
        let b = TrainingSet::uniform(&[0.0, -1.0], &[1.0, 1.0], 5, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.params.iter().all(|p| (0.0..1.0).contains(&p[0])));
    }

    #[test]
    fn greedy_is_exact_at_q_f_and_monotone() {
        let sys = controlled(4);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let tr = train(&sys, 30, 1);
        let res = greedy(&sys, &grid, &tr, 0.0, 5).unwrap();
        let h = &res.history;
        assert_eq!(h.last().unwrap().n, 5);
        assert!(h
            .windows(2)
            .all(|w| w[1].max_error <= w[0].max_error * (1.0 + 1e-12)));
        assert!(h.last().unwrap().max_error <= 1e-8 * h[0].max_error);
        let b = &res.model.b_n;
        assert!((b - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn large_eps_stops_after_one_function() {
        let sys = controlled(3);
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let res = greedy(&sys, &grid, &train(&sys, 10, 2), 1e300, 10).unwrap();
        assert_eq!(res.model.basis_size(), 1);
        assert_eq!(res.history.len(), 1);
    }

    #[test]
    fn online_estimator_equals_true_error() {
        let sys = controlled(5);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let res = greedy(&sys, &grid, &train(&sys, 40, 3), 0.0, 3).unwrap();
        let disc = &res.offline.disc;
        let val = train(&sys, 10, 77);
        for mu in &val.params {
            let x = reduced_solve(&res.model, mu).unwrap();
            let est = estimator_online(&res.model, mu, &x).unwrap();
            let truth = disc.solve(mu).unwrap();
            let rb = lift_solution(&res.model, disc, mu, &x).unwrap();
            let err = l2_distance(&truth, &rb).unwrap();
            assert!(
                (err - est).abs() <= 1e-8 * crate::solver::l2_norm(&truth),
                "{err} {est}"
            );
            let direct = detailed_residual_norm(disc, mu, &rb.coeffs).unwrap();
            assert!((direct - est).abs() <= 1e-8 * est.max(1e-300));
            let expanded = res.model.estimator_expanded(mu, &x).unwrap();
            assert!((expanded - est).abs() <= 1e-6 * crate::solver::l2_norm(&truth));
            let f_scratch = reduced_rhs_from_scratch(&res.model, disc, mu).unwrap();
            assert!((f_scratch - res.model.rhs(mu).unwrap()).amax() < 1e-12);
        }
    }

    #[test]
    fn snapshot_parameters_are_reproduced() {
        let sys = controlled(3);
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let res = greedy(&sys, &grid, &train(&sys, 20, 4), 0.0, 3).unwrap();
        let disc = &res.offline.disc;
        for mu in &res.model.snapshots {
            let x = reduced_solve(&res.model, mu).unwrap();
            let rb = lift_solution(&res.model, disc, mu, &x).unwrap();
            let truth = disc.solve(mu).unwrap();
            assert!(l2_distance(&truth, &rb).unwrap() < 1e-8);
            assert!(estimator_online(&res.model, mu, &x).unwrap() < 1e-8);
        }
        let zero = vec![0.0; sys.param_dim];
        assert_eq!(reduced_solve(&res.model, &zero).unwrap().amax(), 0.0);
    }

    #[test]
    fn save_and_load_round_trip() {
        let sys = controlled(3);
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let res = greedy(&sys, &grid, &train(&sys, 20, 5), 0.0, 3).unwrap();
        let dir = std::env::temp_dir().join(format!("uwdae-rb-{}", std::process::id()));
        res.model.save(&dir).unwrap();
        let back = ReducedModel::load(&dir).unwrap();
        for mu in &train(&sys, 5, 6).params {
            let a = reduced_solve(&res.model, mu).unwrap();
            let b = reduced_solve(&back, mu).unwrap();
            assert_eq!(a, b);
            assert_eq!(
                estimator_online(&res.model, mu, &a).unwrap(),
                estimator_online(&back, mu, &b).unwrap()
            );
        }
    }

    #[test]
    fn parameter_dependent_a_is_rejected() {
        let mut sys = controlled(2);
        sys.a.push(
            Theta::component(0),
            csc_from_rows(3, 3, &[1., 0., 0., 0., 0., 0., 0., 0., 0.]),
        );
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(
            greedy(&sys, &grid, &train(&sys, 5, 1), 0.0, 2),
            Err(Error::ParameterDependentOperator)
        ));
    }

    #[test]
    fn single_term_system_is_degenerate() {
        let e = nalgebra_sparse::CscMatrix::identity(1);
        let sys = DaeSystem::new(e, csc_from_rows(1, 1, &[-1.0]), 1.0)
            .with_param_dim(1)
            .with_rhs(
                Theta::component(0),
                crate::system::TimeFunction::Constant(DVector::from_vec(vec![1.0])),
            );
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let tr = TrainingSet::uniform(&[0.5], &[1.0], 5, 1).unwrap();
        assert!(matches!(
            greedy(&sys, &grid, &tr, 0.0, 3),
            Err(Error::DegenerateTraining)
        ));
    }
}
