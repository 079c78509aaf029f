//! Numerical laboratory for the radial N-Laplacian problem `-Δ_N u = f(u)`.
//!
//! The crate is organised around the objects of an a-priori bound analysis:
//!
//! * [`nonlinearity`]: a closed registry of growth laws with exact derivatives,
//!   asymptotic slope estimation and criticality classification.
//! * [`radial`]: the radial initial-value problem in flux form, integrated by
//!   shooting from the center height `M`, in physical or blow-up variables.
//! * [`branch`]: sweeps over `M`, unit-ball solutions and mass quantization.
//! * [`blowup`]: closed-form Liouville objects and profile comparisons.
//! * [`counterexample`]: the explicit unbounded entropy solution with bounded
//!   weight for `f(t) = e^{t^α}`.
//!
//! Everything is deterministic; no randomness is used outside of tests.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod branch;
pub mod counterexample;
mod error;
pub mod geometry;
pub mod nonlinearity;
pub mod ode;
pub mod quadrature;
pub mod radial;

pub use error::{LabError, Result};
pub use nonlinearity::{Criticality, Family, Nonlinearity};
pub use radial::{RadialProblem, RadialShot, ShotStatus, Weight};
