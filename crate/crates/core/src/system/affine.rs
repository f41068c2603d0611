//! Affine parameter decompositions `μ ↦ Σ_q θ_q(μ) M̃_q`.

use nalgebra::DVector;
use nalgebra_sparse::CscMatrix;

use super::source::TimeFunction;
use super::theta::Theta;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct AffineTerm<M> {
    pub theta: Theta,
    pub value: M,
}

/// Ordered list of affine terms sharing one shape.
#[derive(Clone, Debug)]
pub struct AffineOperator<M> {
    terms: Vec<AffineTerm<M>>,
}

impl<M> Default for AffineOperator<M> {
    fn default() -> Self {
        AffineOperator { terms: Vec::new() }
    }
}

impl<M> AffineOperator<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(value: M) -> Self {
        AffineOperator {
            terms: vec![AffineTerm {
                theta: Theta::one(),
                value,
            }],
        }
    }

    pub fn with_term(mut self, theta: Theta, value: M) -> Self {
        self.push(theta, value);
        self
    }

    pub fn push(&mut self, theta: Theta, value: M) {
        self.terms.push(AffineTerm { theta, value });
    }

    pub fn terms(&self) -> &[AffineTerm<M>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `θ_q(μ)` for every term.
    pub fn coefficients(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.theta.eval(mu)).collect()
    }

    /// True when every coefficient is a constant.
    pub fn is_parameter_independent(&self) -> bool {
        self.terms.iter().all(|t| t.theta.is_constant())
    }

    pub fn required_param_dim(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.theta.required_dim())
            .max()
            .unwrap_or(0)
    }
}

impl AffineOperator<CscMatrix<f64>> {
    /// Assembled sparse matrix at `μ`; `None` for an empty decomposition.
    pub fn eval(&self, mu: &[f64]) -> Result<Option<CscMatrix<f64>>> {
        let mut acc: Option<CscMatrix<f64>> = None;
        for term in &self.terms {
            let c = term.theta.eval(mu)?;
            let scaled = &term.value * c;
            acc = Some(match acc {
                None => scaled,
                Some(a) => &a + &scaled,
            });
        }
        Ok(acc)
    }
}

impl AffineOperator<DVector<f64>> {
    pub fn eval(&self, mu: &[f64], dim: usize) -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(dim);
        for term in &self.terms {
            acc.axpy(term.theta.eval(mu)?, &term.value, 1.0);
        }
        Ok(acc)
    }
}

impl AffineOperator<TimeFunction> {
    pub fn eval(&self, mu: &[f64], t: f64, dim: usize) -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(dim);
        for term in &self.terms {
            acc.axpy(term.theta.eval(mu)?, &term.value.eval(t), 1.0);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_dense;
    use nalgebra::DMatrix;

    fn csc(rows: usize, cols: usize, data: &[f64]) -> CscMatrix<f64> {
        CscMatrix::from(&DMatrix::from_row_slice(rows, cols, data))
    }

    #[test]
    fn single_constant_term_returns_stored_matrix() {
        let m = csc(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let op = AffineOperator::single(m.clone());
        assert_eq!(to_dense(&op.eval(&[]).unwrap().unwrap()), to_dense(&m));
    }

    #[test]
    fn two_terms_combine_linearly() {
        let m1 = csc(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let m2 = csc(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let op = AffineOperator::new()
            .with_term(Theta::component(0), m1)
            .with_term(Theta::one(), m2);
        let got = to_dense(&op.eval(&[2.0]).unwrap().unwrap());
        assert_eq!(got, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn short_parameter_is_rejected() {
        let op = AffineOperator::new().with_term(Theta::component(1), DVector::from_vec(vec![1.0]));
        assert!(op.eval(&[1.0], 1).is_err());
    }
}
