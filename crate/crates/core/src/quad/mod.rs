//! Numerical kernels: adaptive Gauss–Kronrod quadrature on finite and
//! semi-infinite intervals, the exponentially weighted double integral used by
//! the barrier and ruin-time formulas, and an embedded Runge–Kutta solver with
//! dense output and event location.

mod double;
mod gauss_kronrod;
mod ode;
mod semi_infinite;

pub(crate) use double::exp_weighted_with;
pub use double::{integrate_exp_weighted_double, AccumulatingAntiderivative, InnerLimit};
pub use gauss_kronrod::{integrate_finite, integrate_finite_with, Endpoints};
pub use ode::{solve_ivp, Direction, EventHit, EventSpec, OdeOptions, OdeSolution};
pub use semi_infinite::{integrate_semi_infinite, integrate_semi_infinite_with, TailBound};

/// Default relative tolerance for integrals that feed analytic formulas.
pub const ANALYTIC_RTOL: f64 = 1e-10;

/// Outcome of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub(crate) fn zero() -> Self {
        QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        }
    }

    pub(crate) fn add(mut self, other: QuadResult) -> Self {
        self.value += other.value;
        self.abs_error_estimate += other.abs_error_estimate;
        self.evaluations += other.evaluations;
        self
    }
}

/// Mixed absolute/relative accuracy target: converged once
/// `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn rel(rel: f64) -> Self {
        Tolerance { abs: 1e-300, rel }
    }

    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    /// The absolute error allowed for an integral of magnitude `value`.
    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Tolerance {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: ANALYTIC_RTOL,
        }
    }
}

impl From<f64> for Tolerance {
    fn from(abs: f64) -> Self {
        Tolerance::abs(abs)
    }
}
