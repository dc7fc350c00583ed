//! Entropy dynamics of quantum impurities coupled to bosonic baths.
//!
//! Two impurities are covered, both coupled linearly to an Ohmic bath with a
//! Lorentz-Drude cutoff (see [`spectral`]):
//!
//! - a harmonic oscillator, solved exactly in the Gaussian formalism
//!   ([`gaussian_qbm`]), and
//! - a two-level system (spin-boson model), solved with the hierarchical
//!   equations of motion ([`heom`]).
//!
//! [`observables`] turns either trajectory into entropy curves and locates the
//! entropy maximum ("Page time").
//!
//! Units: ħ = k_B = 1 and the oscillator mass is 1.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gaussian_qbm;
pub mod heom;
pub mod observables;
pub mod ode;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Logarithm base used for entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// Natural logarithm (nats).
    #[default]
    #[serde(alias = "e", alias = "nats")]
    Natural,
    /// Base-2 logarithm (bits).
    #[serde(alias = "2", alias = "bits")]
    Two,
}

impl LogBase {
    /// `ln(x)` rescaled to this base.
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}
