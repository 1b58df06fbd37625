//! Positive and negative eigenvalue sequences of the one-dimensional Navier
//! p-biharmonic problem `(|u''|^{p-2} u'')'' = lambda m(x) |u|^{p-2} u` on
//! `(0, 1)` with `u = u'' = 0` at both ends, for a continuous weight `m`
//! that changes sign.
//!
//! Two engines are provided: two-sided shooting with continuation in `p`
//! ([`shoot`]) and a finite-difference variational engine with a dense
//! `p = 2` oracle ([`discrete`]). [`spectrum`] drives both, and [`nodal`]
//! checks the nodal structure of the results.

pub mod discrete;
pub mod error;
pub mod nodal;
pub mod pcore;
pub mod shoot;
pub mod spectrum;
pub mod weight;

pub use error::{Error, Result};
pub use pcore::{Exponent, GridFunction};
pub use shoot::{ContinuationConfig, ShootConfig, ShootState, ShootTrace};
pub use spectrum::{Eigenpair, Engine, ProblemSpec, Sign, SpectrumTable, VerifyReport};
pub use weight::{Weight, WeightSpec};
