//! Analytics and simulation for the dual risk model with state-dependent
//! cost rate `η(u)` and jump intensity `λ(u)`:
//!
//! ```text
//! dU_t = -η(U_t) dt + dJ_t,   jumps ~ Exp(γ) at rate λ(U_{t-})
//! ```
//!
//! Ruin probabilities, barrier dividends, wealth moments, the ruin-time
//! Laplace transform and the expected ruin time are computed from closed
//! forms where they exist and by quadrature or ODE shooting otherwise. The
//! [`sim`] module is an exact event-driven Monte Carlo used to check all of
//! them.
//!
//! ```
//! use dualrisk::{model::DualRiskModel, ruin::ruin_probability};
//!
//! let m = DualRiskModel::classic(1.0, 2.0, 1.0).unwrap();
//! let psi = ruin_probability(&m, 1.0).unwrap().psi;
//! assert!((psi - (-1.0f64).exp()).abs() < 1e-9);
//! ```

// NaN-rejecting guards read `!(x > 0.0)` throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dividend;
pub mod error;
pub mod model;
pub mod moments;
pub mod quad;
pub mod ruin;
pub mod ruin_time;
pub mod sim;
pub mod specfun;
pub mod tables;

pub use error::{Error, Result};
pub use model::{parse_model_spec, DualRiskModel, StateFunction};
