//! Scalar coefficient functions `θ(μ)` of an affine decomposition.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient function of one affine term.
///
/// The serializable grammar is deliberately small: a constant, a single
/// parameter component, or a monomial in the parameter components. `Custom`
/// wraps an arbitrary closure for programmatic use and refuses to serialize.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Theta {
    Constant {
        value: f64,
    },
    Component {
        index: usize,
    },
    Monomial {
        coeff: f64,
        exponents: Vec<u32>,
    },
    #[serde(skip)]
    Custom(CustomTheta),
}

/// Closure-backed coefficient. `min_dim` is the smallest admissible parameter
/// dimension.
#[derive(Clone)]
pub struct CustomTheta {
    pub min_dim: usize,
    pub func: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Constant { value } => write!(f, "Constant({value})"),
            Theta::Component { index } => write!(f, "Component({index})"),
            Theta::Monomial { coeff, exponents } => write!(f, "Monomial({coeff}, {exponents:?})"),
            Theta::Custom(c) => write!(f, "Custom(min_dim={})", c.min_dim),
        }
    }
}

impl PartialEq for Theta {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Theta::Constant { value: a }, Theta::Constant { value: b }) => a == b,
            (Theta::Component { index: a }, Theta::Component { index: b }) => a == b,
            (
                Theta::Monomial {
                    coeff: a,
                    exponents: ea,
                },
                Theta::Monomial {
                    coeff: b,
                    exponents: eb,
                },
            ) => a == b && ea == eb,
            (Theta::Custom(a), Theta::Custom(b)) => Arc::ptr_eq(&a.func, &b.func),
            _ => false,
        }
    }
}

impl Theta {
    pub fn one() -> Self {
        Theta::Constant { value: 1.0 }
    }

    pub fn constant(value: f64) -> Self {
        Theta::Constant { value }
    }

    pub fn component(index: usize) -> Self {
        Theta::Component { index }
    }

    pub fn custom(min_dim: usize, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Theta::Custom(CustomTheta {
            min_dim,
            func: Arc::new(func),
        })
    }

    /// Smallest parameter dimension this expression can be evaluated on.
    pub fn required_dim(&self) -> usize {
        match self {
            Theta::Constant { .. } => 0,
            Theta::Component { index } => index + 1,
            Theta::Monomial { exponents, .. } => {
                exponents.iter().rposition(|&e| e != 0).map_or(0, |p| p + 1)
            }
            Theta::Custom(c) => c.min_dim,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Theta::Constant { .. } => true,
            Theta::Monomial { exponents, .. } => exponents.iter().all(|&e| e == 0),
            _ => false,
        }
    }

    pub fn is_serializable(&self) -> bool {
        !matches!(self, Theta::Custom(_))
    }

    pub fn eval(&self, mu: &[f64]) -> Result<f64> {
        let need = self.required_dim();
        if mu.len() < need {
            return Err(Error::ParameterDimensionMismatch {
                expected: need,
                got: mu.len(),
            });
        }
        Ok(match self {
            Theta::Constant { value } => *value,
            Theta::Component { index } => mu[*index],
            Theta::Monomial { coeff, exponents } => exponents
                .iter()
                .zip(mu)
                .fold(*coeff, |acc, (&e, &m)| acc * m.powi(e as i32)),
            Theta::Custom(c) => (c.func)(mu),
        })
    }

    /// Product of two coefficient functions, kept inside the monomial grammar
    /// whenever both factors are serializable.
    pub fn product(&self, other: &Theta) -> Theta {
        match (self.as_monomial(), other.as_monomial()) {
            (Some((ca, ea)), Some((cb, eb))) => {
                let len = ea.len().max(eb.len());
                let exponents: Vec<u32> = (0..len)
                    .map(|i| ea.get(i).copied().unwrap_or(0) + eb.get(i).copied().unwrap_or(0))
                    .collect();
                if exponents.iter().all(|&e| e == 0) {
                    Theta::Constant { value: ca * cb }
                } else {
                    Theta::Monomial {
                        coeff: ca * cb,
                        exponents,
                    }
                }
            }
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let min_dim = a.required_dim().max(b.required_dim());
                Theta::custom(min_dim, move |mu| {
                    a.eval(mu).unwrap_or(f64::NAN) * b.eval(mu).unwrap_or(f64::NAN)
                })
            }
        }
    }

    fn as_monomial(&self) -> Option<(f64, Vec<u32>)> {
        match self {
            Theta::Constant { value } => Some((*value, Vec::new())),
            Theta::Component { index } => {
                let mut e = vec![0; index + 1];
                e[*index] = 1;
                Some((1.0, e))
            }
            Theta::Monomial { coeff, exponents } => Some((*coeff, exponents.clone())),
            Theta::Custom(_) => None,
        }
    }
}
