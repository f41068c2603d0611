//! Time-dependent right-hand side terms `f̃_q(t)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar waveform used to drive a fixed spatial direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarProfile {
    Constant {
        value: f64,
    },
    /// `slope * t + intercept`
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `amplitude * sin(omega * t)`
    Sine {
        amplitude: f64,
        omega: f64,
    },
    /// `amplitude * sign(cos(omega * t))`, zero where the cosine vanishes.
    SignCos {
        amplitude: f64,
        omega: f64,
    },
}

/// Values with magnitude below this are treated as exact zeros of the cosine.
const SIGN_SNAP: f64 = 1e-12;

impl ScalarProfile {
    /// `sin(4π t / T)`
    pub fn smooth_source(horizon: f64) -> Self {
        ScalarProfile::Sine {
            amplitude: 1.0,
            omega: 4.0 * PI / horizon,
        }
    }

    /// `sign(cos(4π t / T))`
    pub fn square_source(horizon: f64) -> Self {
        ScalarProfile::SignCos {
            amplitude: 1.0,
            omega: 4.0 * PI / horizon,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ScalarProfile::Constant { value } => value,
            ScalarProfile::Linear { slope, intercept } => slope * t + intercept,
            ScalarProfile::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
            ScalarProfile::SignCos { amplitude, omega } => {
                let c = (omega * t).cos();
                if c.abs() <= SIGN_SNAP {
                    0.0
                } else {
                    amplitude * c.signum()
                }
            }
        }
    }
}

/// Tabulated vector-valued series, linearly interpolated between samples and
/// held constant outside the sampled range.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSeries {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl SampledSeries {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "sampled series needs matching non-empty times/values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "sample times must be strictly increasing".into(),
            ));
        }
        let dim = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::dims("sampled series row", dim, bad.len()));
        }
        Ok(SampledSeries { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[last] {
            return self.values[last].clone();
        }
        let hi = self.times.partition_point(|&s| s <= t);
        let lo = hi - 1;
        let s = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        &self.values[lo] * (1.0 - s) + &self.values[hi] * s
    }
}

/// One right-hand side term `f̃_q : [0, T] → R^n`.
#[derive(Clone)]
pub enum TimeFunction {
    Constant(DVector<f64>),
    Profile {
        direction: DVector<f64>,
        profile: ScalarProfile,
    },
    Samples(SampledSeries),
    /// `direction · σ_node(t)` for the hat function of a uniform grid with
    /// `intervals` cells on `[0, horizon]`.
    Hat {
        direction: DVector<f64>,
        horizon: f64,
        intervals: usize,
        node: usize,
    },
    Custom {
        dim: usize,
        func: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFunction::Constant(v) => write!(f, "Constant(dim={})", v.len()),
            TimeFunction::Profile { direction, profile } => {
                write!(f, "Profile(dim={}, {profile:?})", direction.len())
            }
            TimeFunction::Samples(s) => {
                write!(f, "Samples(dim={}, len={})", s.dim(), s.times.len())
            }
            TimeFunction::Hat {
                direction,
                intervals,
                node,
                ..
            } => write!(f, "Hat(dim={}, node {node}/{intervals})", direction.len()),
            TimeFunction::Custom { dim, .. } => write!(f, "Custom(dim={dim})"),
        }
    }
}

/// Value of the `node`-th hat function of a uniform grid at time `t`.
pub fn hat_value(horizon: f64, intervals: usize, node: usize, t: f64) -> f64 {
    let dt = horizon / intervals as f64;
    let tk = node as f64 * dt;
    let r = (t - tk).abs() / dt;
    if r >= 1.0 || t < 0.0 || t > horizon {
        0.0
    } else {
        1.0 - r
    }
}

impl TimeFunction {
    pub fn custom(dim: usize, func: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        TimeFunction::Custom {
            dim,
            func: Arc::new(func),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TimeFunction::Constant(v) => v.len(),
            TimeFunction::Profile { direction, .. } => direction.len(),
            TimeFunction::Samples(s) => s.dim(),
            TimeFunction::Hat { direction, .. } => direction.len(),
            TimeFunction::Custom { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            TimeFunction::Constant(v) => v.clone(),
            TimeFunction::Profile { direction, profile } => direction * profile.eval(t),
            TimeFunction::Samples(s) => s.eval(t),
            TimeFunction::Hat {
                direction,
                horizon,
                intervals,
                node,
            } => direction * hat_value(*horizon, *intervals, *node, t),
            TimeFunction::Custom { func, .. } => func(t),
        }
    }

    /// True when the function is identically zero (used to drop empty terms).
    pub fn is_zero(&self) -> bool {
        match self {
            TimeFunction::Constant(v) => v.iter().all(|&x| x == 0.0),
            TimeFunction::Profile { direction, .. } | TimeFunction::Hat { direction, .. } => {
                direction.iter().all(|&x| x == 0.0)
            }
            TimeFunction::Samples(s) => s.values.iter().all(|v| v.iter().all(|&x| x == 0.0)),
            TimeFunction::Custom { .. } => false,
        }
    }

    pub fn is_finite(&self) -> bool {
        let fin = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        match self {
            TimeFunction::Constant(v) => fin(v),
            TimeFunction::Profile { direction, .. } | TimeFunction::Hat { direction, .. } => {
                fin(direction)
            }
            TimeFunction::Samples(s) => s.values.iter().all(fin),
            TimeFunction::Custom { .. } => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_series_interpolates_linearly() {
        let s = SampledSeries::new(
            vec![0.0, 1.0, 3.0],
            vec![
                DVector::from_vec(vec![0.0]),
                DVector::from_vec(vec![2.0]),
                DVector::from_vec(vec![-2.0]),
            ],
        )
        .unwrap();
        assert_eq!(s.eval(0.5)[0], 1.0);
        assert_eq!(s.eval(2.0)[0], 0.0);
        assert_eq!(s.eval(5.0)[0], -2.0);
    }

    #[test]
    fn sampled_series_rejects_unsorted_times() {
        let v = DVector::from_vec(vec![0.0]);
        assert!(SampledSeries::new(vec![0.0, 0.0], vec![v.clone(), v]).is_err());
    }

    #[test]
    fn hat_is_one_at_its_node_and_vanishes_outside() {
        assert_eq!(hat_value(1.0, 4, 2, 0.5), 1.0);
        assert!((hat_value(1.0, 4, 2, 0.375) - 0.5).abs() < 1e-15);
        assert_eq!(hat_value(1.0, 4, 2, 0.25), 0.0);
        assert_eq!(hat_value(1.0, 4, 0, 0.0), 1.0);
        assert_eq!(hat_value(1.0, 4, 4, 1.0), 1.0);
    }

    #[test]
    fn square_wave_snaps_zero_crossings() {
        let p = ScalarProfile::square_source(1.0);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(0.125), 0.0);
        assert_eq!(p.eval(0.25), -1.0);
    }
}
