//! Regularity probe and index estimate for the pencil `(E, A_μ)`.

use nalgebra::DMatrix;

use super::DaeSystem;
use crate::error::{Error, Result};
use crate::linalg::to_dense;

/// Probe values tried when the caller has no better guess.
pub const DEFAULT_PROBES: [f64; 6] = [1.0, -1.3, 2.7, 0.37, -5.1, 11.0];

/// `λE − A` with a 2-norm condition number above this counts as singular.
const CONDITION_CAP: f64 = 1e12;
/// Relative singular-value cutoff for the ranks of `Ê^k`.
const INDEX_RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PencilDiagnostics {
    pub regular: bool,
    pub probe_lambdas: Vec<f64>,
    /// Best-conditioned probe value.
    pub witness: Option<f64>,
    pub condition: f64,
    /// `None` when the rank sequence did not stabilize within `n` powers.
    pub index_estimate: Option<usize>,
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let smin = s.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s.max() / smin
    }
}

fn numerical_rank(m: &DMatrix<f64>, scale: f64) -> usize {
    m.singular_values()
        .iter()
        .filter(|&&s| s > INDEX_RANK_TOL * scale)
        .count()
}

/// Tries each `λ` in `lambdas`, keeps the best-conditioned `λ₀E − A_μ` and
/// estimates the index as the first `k` with `rank Ê^k = rank Ê^{k+1}` for
/// `Ê = (λ₀E − A_μ)⁻¹E`. This is a dense diagnostic, not a certificate.
pub fn pencil_probe(sys: &DaeSystem, mu: &[f64], lambdas: &[f64]) -> Result<PencilDiagnostics> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput(
            "pencil probe needs at least one lambda".into(),
        ));
    }
    let e = to_dense(&sys.e);
    let a = to_dense(&sys.a_at(mu)?);
    let n = e.nrows();

    let mut best: Option<(f64, f64, DMatrix<f64>)> = None;
    for &lambda in lambdas {
        let m = &e * lambda - &a;
        let c = condition(&m);
        log::debug!("pencil probe lambda={lambda} cond={c:.3e}");
        if c.is_finite() && c < CONDITION_CAP && best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((lambda, c, m));
        }
    }
    let Some((witness, cond, m)) = best else {
        return Err(Error::IrregularPencil {
            lambdas: lambdas.to_vec(),
        });
    };

    let e_hat = m.lu().solve(&e).ok_or_else(|| Error::IrregularPencil {
        lambdas: lambdas.to_vec(),
    })?;
    let scale = e_hat.norm().max(f64::MIN_POSITIVE);
    let mut index = None;
    let mut power = DMatrix::identity(n, n);
    let mut rank = n;
    for k in 0..=n {
        let next = &power * &e_hat;
        // Powers of Ê are measured against ‖Ê‖^{k+1} so the cutoff follows
        // the natural growth or decay of the finite spectrum.
        let next_rank = numerical_rank(&next, scale.powi(k as i32 + 1));
        if next_rank == rank {
            index = Some(k);
            break;
        }
        rank = next_rank;
        power = next;
    }
    Ok(PencilDiagnostics {
        regular: true,
        probe_lambdas: lambdas.to_vec(),
        witness: Some(witness),
        condition: cond,
        index_estimate: index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::csc_from_rows;
    use nalgebra_sparse::CscMatrix;

    #[test]
    fn ode_has_index_zero() {
        let a = csc_from_rows(2, 2, &[0.0, 1.0, -3.0, 0.5]);
        let sys = DaeSystem::new(CscMatrix::identity(2), a, 1.0);
        let d = pencil_probe(&sys, &[], &DEFAULT_PROBES).unwrap();
        assert!(d.regular);
        assert_eq!(d.index_estimate, Some(0));
    }

    #[test]
    fn semi_explicit_block_has_index_one() {
        let e = csc_from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = csc_from_rows(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let sys = DaeSystem::new(e, a, 1.0);
        let d = pencil_probe(&sys, &[], &DEFAULT_PROBES).unwrap();
        assert_eq!(d.index_estimate, Some(1));
    }

    #[test]
    fn nilpotent_chain_has_its_length_as_index() {
        // E = N (3×3 shift), A = I: index 3
        let e = csc_from_rows(3, 3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]);
        let sys = DaeSystem::new(e, CscMatrix::identity(3), 1.0);
        let d = pencil_probe(&sys, &[], &DEFAULT_PROBES).unwrap();
        assert_eq!(d.index_estimate, Some(3));
    }

    #[test]
    fn singular_pencil_is_rejected() {
        // E and A share a zero row
        let e = csc_from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = csc_from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let sys = DaeSystem::new(e, a, 1.0);
        assert!(matches!(
            pencil_probe(&sys, &[], &DEFAULT_PROBES),
            Err(Error::IrregularPencil { .. })
        ));
    }

    #[test]
    fn witness_is_the_best_conditioned_probe() {
        let e = CscMatrix::identity(1);
        let a = csc_from_rows(1, 1, &[2.0]);
        let sys = DaeSystem::new(e, a, 1.0);
        // λ = 2 is singular, the remaining 1×1 probes all have condition 1
        let d = pencil_probe(&sys, &[], &[2.0, 5.0]).unwrap();
        assert_eq!(d.witness, Some(5.0));
    }
}
