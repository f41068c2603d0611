//! Space-time ultraweak Petrov–Galerkin discretization of parameterized
//! linear DAEs `E ẋ − A_μ x = f_μ`, with a certified reduced basis on top.
//!
//! The detailed solution is obtained from a single symmetric positive
//! definite linear system whose energy norm coincides with the `L²(0,T;Rⁿ)`
//! norm of the trial function, so the residual norm in the dual test norm is
//! an exact error measure.

pub mod assembly;
pub mod bench;
pub mod error;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod rbm;
pub mod solver;
pub mod system;
pub mod temporal;

pub use error::{Error, Result};
