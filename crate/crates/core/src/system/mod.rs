//! Parameterized linear constant-coefficient DAEs `E ẋ − A_μ x = f_μ`,
//! `x(0) = x_{0,μ}`, on a finite horizon `(0, T)`.

mod affine;
mod kernel;
mod pencil;
mod source;
mod theta;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;

pub use affine::{AffineOperator, AffineTerm};
pub use kernel::{kernel_basis, KernelBasis, DEFAULT_RANK_TOL};
pub use pencil::{pencil_probe, PencilDiagnostics, DEFAULT_PROBES};
pub use source::{hat_value, SampledSeries, ScalarProfile, TimeFunction};
pub use theta::{CustomTheta, Theta};

use crate::error::{Error, Result};
use crate::linalg::to_dense;

/// Input matrix `B` (n×m) whose control is sampled on a uniform grid of
/// `intervals` cells. The samples `u_j(t_k)` occupy the leading
/// `m·(intervals+1)` parameter components, node-major: index `k·m + j`.
#[derive(Clone, Debug)]
pub struct Control {
    pub matrix: DMatrix<f64>,
    pub intervals: usize,
}

impl Control {
    pub fn inputs(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn param_len(&self) -> usize {
        self.inputs() * (self.intervals + 1)
    }
}

#[derive(Clone, Debug)]
pub struct DaeSystem {
    pub horizon: f64,
    /// Dimension `P` of the parameter vector `μ`.
    pub param_dim: usize,
    pub e: CscMatrix<f64>,
    pub a: AffineOperator<CscMatrix<f64>>,
    pub rhs: AffineOperator<TimeFunction>,
    pub x0: AffineOperator<DVector<f64>>,
    pub control: Option<Control>,
    /// Output matrix `C` (p×n).
    pub output: Option<DMatrix<f64>>,
}

impl DaeSystem {
    /// System with a single parameter-independent `A` and no forcing.
    pub fn new(e: CscMatrix<f64>, a: CscMatrix<f64>, horizon: f64) -> Self {
        DaeSystem {
            horizon,
            param_dim: 0,
            e,
            a: AffineOperator::single(a),
            rhs: AffineOperator::new(),
            x0: AffineOperator::new(),
            control: None,
            output: None,
        }
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn with_rhs(mut self, theta: Theta, f: TimeFunction) -> Self {
        self.rhs.push(theta, f);
        self
    }

    pub fn with_initial_value(mut self, theta: Theta, x0: DVector<f64>) -> Self {
        self.x0.push(theta, x0);
        self
    }

    pub fn with_control(mut self, matrix: DMatrix<f64>, intervals: usize) -> Self {
        let control = Control { matrix, intervals };
        self.param_dim = self.param_dim.max(control.param_len());
        self.control = Some(control);
        self
    }

    pub fn with_output(mut self, c: DMatrix<f64>) -> Self {
        self.output = Some(c);
        self
    }

    pub fn with_param_dim(mut self, p: usize) -> Self {
        self.param_dim = p;
        self
    }

    /// `A_μ` assembled as a sparse matrix.
    pub fn a_at(&self, mu: &[f64]) -> Result<CscMatrix<f64>> {
        self.check_mu(mu)?;
        self.a
            .eval(mu)?
            .ok_or_else(|| Error::InvalidInput("A has no affine terms".into()))
    }

    pub fn x0_at(&self, mu: &[f64]) -> Result<DVector<f64>> {
        self.check_mu(mu)?;
        self.x0.eval(mu, self.n())
    }

    pub fn is_homogeneous(&self) -> bool {
        self.x0
            .terms()
            .iter()
            .all(|t| t.value.iter().all(|&x| x == 0.0))
    }

    /// Fully linear in the sense of the reduced pipeline: `A` does not
    /// depend on the parameter.
    pub fn has_parameter_independent_a(&self) -> bool {
        self.a.is_parameter_independent()
    }

    pub fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.param_dim {
            return Err(Error::ParameterDimensionMismatch {
                expected: self.param_dim,
                got: mu.len(),
            });
        }
        Ok(())
    }

    /// All right-hand side terms, control hats first, as one affine list.
    /// Its length is `Q_f = m(K_u+1) + Q_rhs`.
    pub fn rhs_terms(&self) -> Vec<AffineTerm<TimeFunction>> {
        let mut terms = Vec::new();
        if let Some(ctrl) = &self.control {
            let m = ctrl.inputs();
            for k in 0..=ctrl.intervals {
                for j in 0..m {
                    terms.push(AffineTerm {
                        theta: Theta::component(k * m + j),
                        value: TimeFunction::Hat {
                            direction: ctrl.matrix.column(j).into_owned(),
                            horizon: self.horizon,
                            intervals: ctrl.intervals,
                            node: k,
                        },
                    });
                }
            }
        }
        terms.extend(self.rhs.terms().iter().cloned());
        terms
    }

    /// `f_μ(t)` including the control contribution `B u(t)`.
    pub fn rhs_at(&self, mu: &[f64], t: f64) -> Result<DVector<f64>> {
        self.check_mu(mu)?;
        let mut f = self.rhs.eval(mu, t, self.n())?;
        if let Some(ctrl) = &self.control {
            let m = ctrl.inputs();
            for k in 0..=ctrl.intervals {
                let h = hat_value(self.horizon, ctrl.intervals, k, t);
                if h == 0.0 {
                    continue;
                }
                for j in 0..m {
                    f.axpy(h * mu[k * m + j], &ctrl.matrix.column(j), 1.0);
                }
            }
        }
        Ok(f)
    }
}

/// A defect found by [`validate_system`].
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    DimensionMismatch {
        what: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    EmptyAffine {
        role: &'static str,
    },
    NonFinite {
        what: String,
    },
    Horizon {
        value: f64,
    },
    ParameterIndex {
        what: String,
        required: usize,
        param_dim: usize,
    },
    /// Warning only: no `x̂₀` with `E x̂₀ − A x₀ = f(0⁺)` in the least-squares sense.
    InconsistentInitialValue {
        residual: f64,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(
                f,
                "{what}: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Diagnostic::EmptyAffine { role } => write!(f, "{role} has no affine terms"),
            Diagnostic::NonFinite { what } => write!(f, "{what} contains non-finite entries"),
            Diagnostic::Horizon { value } => write!(f, "horizon T = {value} must be positive"),
            Diagnostic::ParameterIndex {
                what,
                required,
                param_dim,
            } => write!(
                f,
                "{what} needs {required} parameter components, system has {param_dim}"
            ),
            Diagnostic::InconsistentInitialValue { residual } => write!(
                f,
                "initial value looks inconsistent (least-squares residual {residual:.3e})"
            ),
        }
    }
}

/// Collects structural defects; an empty list means the system is usable.
pub fn validate_system(sys: &DaeSystem) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = sys.e.nrows();
    let square = (n, n);
    let shape = |m: &CscMatrix<f64>| (m.nrows(), m.ncols());
    let finite = |m: &CscMatrix<f64>| m.values().iter().all(|x| x.is_finite());

    if !(sys.horizon > 0.0 && sys.horizon.is_finite()) {
        out.push(Diagnostic::Horizon { value: sys.horizon });
    }
    if shape(&sys.e) != square {
        out.push(Diagnostic::DimensionMismatch {
            what: "E".into(),
            expected: square,
            got: shape(&sys.e),
        });
    }
    if !finite(&sys.e) {
        out.push(Diagnostic::NonFinite { what: "E".into() });
    }
    if sys.a.is_empty() {
        out.push(Diagnostic::EmptyAffine { role: "A" });
    }
    for (q, term) in sys.a.terms().iter().enumerate() {
        if shape(&term.value) != square {
            out.push(Diagnostic::DimensionMismatch {
                what: format!("A term {q}"),
                expected: square,
                got: shape(&term.value),
            });
        }
        if !finite(&term.value) {
            out.push(Diagnostic::NonFinite {
                what: format!("A term {q}"),
            });
        }
    }
    for (q, term) in sys.rhs.terms().iter().enumerate() {
        if term.value.dim() != n {
            out.push(Diagnostic::DimensionMismatch {
                what: format!("rhs term {q}"),
                expected: (n, 1),
                got: (term.value.dim(), 1),
            });
        }
        if !term.value.is_finite() {
            out.push(Diagnostic::NonFinite {
                what: format!("rhs term {q}"),
            });
        }
    }
    for (q, term) in sys.x0.terms().iter().enumerate() {
        if term.value.len() != n {
            out.push(Diagnostic::DimensionMismatch {
                what: format!("x0 term {q}"),
                expected: (n, 1),
                got: (term.value.len(), 1),
            });
        }
        if !term.value.iter().all(|x| x.is_finite()) {
            out.push(Diagnostic::NonFinite {
                what: format!("x0 term {q}"),
            });
        }
    }
    if let Some(ctrl) = &sys.control {
        if ctrl.matrix.nrows() != n {
            out.push(Diagnostic::DimensionMismatch {
                what: "control matrix B".into(),
                expected: (n, ctrl.matrix.ncols()),
                got: ctrl.matrix.shape(),
            });
        }
        if ctrl.intervals == 0 {
            out.push(Diagnostic::DimensionMismatch {
                what: "control grid intervals".into(),
                expected: (1, 1),
                got: (0, 1),
            });
        }
        if ctrl.param_len() > sys.param_dim {
            out.push(Diagnostic::ParameterIndex {
                what: "control samples".into(),
                required: ctrl.param_len(),
                param_dim: sys.param_dim,
            });
        }
        if !ctrl.matrix.iter().all(|x| x.is_finite()) {
            out.push(Diagnostic::NonFinite {
                what: "control matrix B".into(),
            });
        }
    }
    if let Some(c) = &sys.output {
        if c.ncols() != n {
            out.push(Diagnostic::DimensionMismatch {
                what: "output matrix C".into(),
                expected: (c.nrows(), n),
                got: c.shape(),
            });
        }
    }
    for (role, need) in [
        ("A", sys.a.required_param_dim()),
        ("rhs", sys.rhs.required_param_dim()),
        ("x0", sys.x0.required_param_dim()),
    ] {
        if need > sys.param_dim {
            out.push(Diagnostic::ParameterIndex {
                what: role.into(),
                required: need,
                param_dim: sys.param_dim,
            });
        }
    }
    out
}

/// Heuristic consistency check of `x₀` against `f(0⁺)`: returns a warning
/// when `E x̂₀ = f(0) + A x₀` has least-squares residual above `tol`
/// (relative to the right-hand side).
pub fn check_initial_consistency(
    sys: &DaeSystem,
    mu: &[f64],
    tol: f64,
) -> Result<Option<Diagnostic>> {
    let x0 = sys.x0_at(mu)?;
    let rhs = sys.rhs_at(mu, 0.0)? + sys.a_at(mu)? * &x0;
    let scale = rhs.amax().max(1.0);
    let e = to_dense(&sys.e);
    let svd = e.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, DEFAULT_RANK_TOL * svd.singular_values.max())
        .map_err(|m| Error::InvalidInput(m.to_string()))?;
    let residual = (&e * sol - &rhs).norm() / scale;
    Ok((residual > tol).then_some(Diagnostic::InconsistentInitialValue { residual }))
}

/// Smooth extension `x̄_q` of one initial-value term.
#[derive(Clone, Default)]
pub enum Extension {
    /// `x̄_q(t) ≡ x̃_{0,q}`.
    #[default]
    Constant,
    Custom {
        dim: usize,
        value: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
        derivative: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extension::Constant => write!(f, "Constant"),
            Extension::Custom { dim, .. } => write!(f, "Custom(dim={dim})"),
        }
    }
}

impl Extension {
    fn value(&self, x0: &DVector<f64>, t: f64) -> DVector<f64> {
        match self {
            Extension::Constant => x0.clone(),
            Extension::Custom { value, .. } => value(t),
        }
    }
}

/// Reduces to homogeneous initial values: the returned system has `x₀ ≡ 0`
/// and right-hand side `f − E ẋ̄ + A x̄`. Each pair of an `A` term and an
/// initial-value term yields one new affine term with coefficient
/// `θ^A_p · θ^x_q`; non-constant extensions add `−E ẋ̄_q` terms with `θ^x_q`.
///
/// `extensions` must be empty (all constant) or have one entry per `x₀` term.
pub fn homogenize(sys: &DaeSystem, extensions: &[Extension]) -> Result<DaeSystem> {
    let n = sys.n();
    if !extensions.is_empty() && extensions.len() != sys.x0.len() {
        return Err(Error::InvalidInput(format!(
            "{} extensions given for {} initial-value terms",
            extensions.len(),
            sys.x0.len()
        )));
    }
    let ext = |q: usize| extensions.get(q).cloned().unwrap_or_default();

    let mut out = sys.clone();
    out.x0 = AffineOperator::new();
    for (q, xterm) in sys.x0.terms().iter().enumerate() {
        if xterm.value.len() != n {
            return Err(Error::InconsistentExtension {
                term: q,
                expected: n,
                got: xterm.value.len(),
            });
        }
        let extension = ext(q);
        if let Extension::Custom { dim, value, .. } = &extension {
            if *dim != n {
                return Err(Error::InconsistentExtension {
                    term: q,
                    expected: n,
                    got: *dim,
                });
            }
            let gap = (value(0.0) - &xterm.value).amax();
            if gap > 1e-12 * xterm.value.amax().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "extension {q} does not match the initial value at t = 0 (gap {gap:.3e})"
                )));
            }
        }
        if xterm.value.iter().all(|&x| x == 0.0) && matches!(extension, Extension::Constant) {
            continue;
        }
        for aterm in sys.a.terms() {
            let theta = aterm.theta.product(&xterm.theta);
            let f = match &extension {
                Extension::Constant => TimeFunction::Constant(&aterm.value * &xterm.value),
                Extension::Custom { value, .. } => {
                    let a = aterm.value.clone();
                    let value = value.clone();
                    TimeFunction::custom(n, move |t| &a * value(t))
                }
            };
            if !f.is_zero() {
                out.rhs.push(theta, f);
            }
        }
        if let Extension::Custom { derivative, .. } = &extension {
            let e = sys.e.clone();
            let derivative = derivative.clone();
            out.rhs.push(
                xterm.theta.clone(),
                TimeFunction::custom(n, move |t| -(&e * derivative(t))),
            );
        }
    }
    Ok(out)
}

/// `x̄_μ(t) = Σ_q θ^x_q(μ) x̄_q(t)`, the shift added back after solving the
/// homogenized problem.
pub fn extension_value(
    sys: &DaeSystem,
    extensions: &[Extension],
    mu: &[f64],
    t: f64,
) -> Result<DVector<f64>> {
    let mut acc = DVector::zeros(sys.n());
    for (q, term) in sys.x0.terms().iter().enumerate() {
        let ext = extensions.get(q).cloned().unwrap_or_default();
        acc.axpy(term.theta.eval(mu)?, &ext.value(&term.value, t), 1.0);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_from_rows;

    fn scalar(e: f64, a: f64) -> DaeSystem {
        DaeSystem::new(csc_from_rows(1, 1, &[e]), csc_from_rows(1, 1, &[a]), 1.0)
    }

    #[test]
    fn mismatched_a_term_is_reported_once() {
        let sys = DaeSystem::new(CscMatrix::identity(3), CscMatrix::identity(4), 1.0);
        let d = validate_system(&sys);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::DimensionMismatch { .. }));
    }

    #[test]
    fn zero_horizon_is_reported() {
        let mut sys = scalar(1.0, -1.0);
        sys.horizon = 0.0;
        assert_eq!(
            validate_system(&sys),
            vec![Diagnostic::Horizon { value: 0.0 }]
        );
    }

    #[test]
    fn non_finite_entries_are_reported() {
        let sys = scalar(1.0, f64::NAN);
        let d = validate_system(&sys);
        assert!(d.iter().any(|x| matches!(x, Diagnostic::NonFinite { .. })));
    }

    #[test]
    fn out_of_range_theta_is_reported() {
        let sys = scalar(1.0, -1.0).with_rhs(
            Theta::component(2),
            TimeFunction::Constant(DVector::from_vec(vec![1.0])),
        );
        let d = validate_system(&sys);
        assert!(d
            .iter()
            .any(|x| matches!(x, Diagnostic::ParameterIndex { required: 3, .. })));
    }

    #[test]
    fn constant_extension_moves_initial_value_into_rhs() {
        let sys = scalar(1.0, -1.0).with_initial_value(Theta::one(), DVector::from_vec(vec![1.0]));
        let h = homogenize(&sys, &[]).unwrap();
        assert!(h.x0.is_empty());
        assert_eq!(h.rhs.len(), 1);
        assert_eq!(h.rhs_at(&[], 0.3).unwrap()[0], -1.0);
        assert_eq!(extension_value(&sys, &[], &[], 0.7).unwrap()[0], 1.0);
    }

    #[test]
    fn zero_initial_value_leaves_system_unchanged() {
        let sys = scalar(1.0, -1.0).with_initial_value(Theta::one(), DVector::zeros(1));
        let h = homogenize(&sys, &[]).unwrap();
        assert!(h.rhs.is_empty());
        assert!(h.is_homogeneous());
    }

    #[test]
    fn parameter_dependent_a_spawns_product_terms() {
        let mut sys = scalar(1.0, -1.0);
        sys.a.push(Theta::component(0), csc_from_rows(1, 1, &[2.0]));
        sys.param_dim = 2;
        sys.x0
            .push(Theta::component(1), DVector::from_vec(vec![3.0]));
        sys.x0.push(Theta::one(), DVector::from_vec(vec![1.0]));
        let h = homogenize(&sys, &[]).unwrap();
        // Q_A · Q_x = 4 new terms
        assert_eq!(h.rhs.len(), 4);
        let mu = [0.5, 2.0];
        // A_μ x0_μ = (−1 + 2·0.5)·(3·2 + 1) = 0
        assert!(h.rhs_at(&mu, 0.0).unwrap()[0].abs() < 1e-15);
        let mu = [2.0, 1.0];
        assert_eq!(h.rhs_at(&mu, 0.0).unwrap()[0], 3.0 * 4.0);
    }

    #[test]
    fn custom_extension_adds_derivative_term() {
        let sys = scalar(1.0, -1.0).with_initial_value(Theta::one(), DVector::from_vec(vec![1.0]));
        let ext = Extension::Custom {
            dim: 1,
            value: Arc::new(|t| DVector::from_vec(vec![1.0 + t])),
            derivative: Arc::new(|_| DVector::from_vec(vec![1.0])),
        };
        let h = homogenize(&sys, &[ext]).unwrap();
        // −E ẋ̄ + A x̄ = −1 − (1 + t)
        assert!((h.rhs_at(&[], 0.5).unwrap()[0] + 2.5).abs() < 1e-15);
    }

    #[test]
    fn extension_dimension_is_checked() {
        let sys = scalar(1.0, -1.0).with_initial_value(Theta::one(), DVector::from_vec(vec![1.0]));
        let ext = Extension::Custom {
            dim: 2,
            value: Arc::new(|_| DVector::from_vec(vec![1.0, 0.0])),
            derivative: Arc::new(|_| DVector::zeros(2)),
        };
        assert!(matches!(
            homogenize(&sys, &[ext]),
            Err(Error::InconsistentExtension { .. })
        ));
    }

    #[test]
    fn control_terms_reproduce_b_times_u() {
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let sys = DaeSystem::new(CscMatrix::identity(2), CscMatrix::identity(2), 1.0)
            .with_control(b.clone(), 2);
        let mu = [0.0, 1.0, 4.0];
        let terms = sys.rhs_terms();
        assert_eq!(terms.len(), 3);
        for &t in &[0.0, 0.25, 0.5, 0.9] {
            let mut via_terms = DVector::zeros(2);
            for term in &terms {
                via_terms += term.value.eval(t) * term.theta.eval(&mu).unwrap();
            }
            let u = if t <= 0.5 {
                2.0 * t
            } else {
                1.0 + (t - 0.5) * 6.0
            };
            let direct = &b * DVector::from_vec(vec![u]);
            assert!((via_terms - &direct).amax() < 1e-14);
            assert!((sys.rhs_at(&mu, t).unwrap() - direct).amax() < 1e-14);
        }
    }

    #[test]
    fn consistency_warning_fires_for_bad_algebraic_start() {
        // x2 = −f2 is forced; start with x2 = 1 while f ≡ 0.
        let e = csc_from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = csc_from_rows(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let sys = DaeSystem::new(e, a, 1.0);
        let ok = sys
            .clone()
            .with_initial_value(Theta::one(), DVector::from_vec(vec![1.0, 0.0]));
        assert!(check_initial_consistency(&ok, &[], 1e-8).unwrap().is_none());
        let bad = sys.with_initial_value(Theta::one(), DVector::from_vec(vec![0.0, 1.0]));
        assert!(check_initial_consistency(&bad, &[], 1e-8)
            .unwrap()
            .is_some());
    }
}
