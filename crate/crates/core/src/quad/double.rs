use std::cell::RefCell;

use super::gauss_kronrod::{integrate_finite, integrate_finite_with, Endpoints};
use super::semi_infinite::{integrate_semi_infinite, TailBound};
use super::{QuadResult, Tolerance};
use crate::error::{Error, Result};

/// Upper limit of the inner integral as a function of the outer variable `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerLimit {
    /// `∫₀^c g`
    Identity,
    /// `∫₀^{b+c} g`
    Shifted(f64),
}

impl InnerLimit {
    fn at(&self, c: f64) -> f64 {
        match *self {
            InnerLimit::Identity => c,
            InnerLimit::Shifted(b) => b + c,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Knot {
    x: f64,
    value: f64,
    error: f64,
}

/// `G(x) = ∫₀^x g` evaluated lazily on a uniform knot grid: each query on
/// `[x_k, x_{k+1})` integrates only from the knot below it, and knots are
/// extended (never recomputed) as queries move right.
pub struct AccumulatingAntiderivative<F> {
    g: F,
    spacing: f64,
    left_power: f64,
    tol: Tolerance,
    knots: RefCell<Vec<Knot>>,
}

impl<F: Fn(f64) -> f64> AccumulatingAntiderivative<F> {
    pub fn new(g: F, spacing: f64, tol: impl Into<Tolerance>) -> Self {
        Self::with_left_power(g, spacing, tol, 0.0)
    }

    /// `left_power` declares a `v^p` singularity of `g` at the origin.
    pub fn with_left_power(g: F, spacing: f64, tol: impl Into<Tolerance>, left_power: f64) -> Self {
        AccumulatingAntiderivative {
            g,
            spacing: if spacing > 0.0 { spacing } else { 1.0 },
            left_power,
            tol: tol.into(),
            knots: RefCell::new(vec![Knot {
                x: 0.0,
                value: 0.0,
                error: 0.0,
            }]),
        }
    }

    fn piece(&self, a: f64, b: f64) -> Result<QuadResult> {
        if a == 0.0 && self.left_power != 0.0 {
            integrate_finite_with(&self.g, a, b, self.tol, Endpoints::left(self.left_power))
        } else {
            integrate_finite(&self.g, a, b, self.tol)
        }
    }

    /// Value of the antiderivative at `x >= 0` and its accumulated error estimate.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::domain(format!("antiderivative queried at {x}")));
        }
        let k = (x / self.spacing).floor() as usize;
        {
            let mut knots = self.knots.borrow_mut();
            while knots.len() <= k {
                let last = *knots.last().expect("origin knot");
                let next = last.x + self.spacing;
                let r = self.piece(last.x, next)?;
                knots.push(Knot {
                    x: next,
                    value: last.value + r.value,
                    error: last.error + r.abs_error_estimate,
                });
            }
        }
        let base = self.knots.borrow()[k];
        if x == base.x {
            return Ok((base.value, base.error));
        }
        let r = self.piece(base.x, x)?;
        Ok((base.value + r.value, base.error + r.abs_error_estimate))
    }

    pub fn knot_count(&self) -> usize {
        self.knots.borrow().len()
    }
}

/// `∫₀^∞ γ e^{-γc} (∫₀^{L(c)} g(v) dv) dc` with `L` given by `inner`.
///
/// `growth` bounds the exponential growth rate of the inner antiderivative
/// (0 when `∫₀^∞ g` is finite); it must be below `gamma`. The inner integral
/// is shared across outer nodes through an [`AccumulatingAntiderivative`].
pub fn integrate_exp_weighted_double<F: Fn(f64) -> f64>(
    g: F,
    gamma: f64,
    inner: InnerLimit,
    tol: impl Into<Tolerance>,
    growth: f64,
) -> Result<QuadResult> {
    let anti = AccumulatingAntiderivative::new(g, 0.25, Tolerance::default().scaled(0.01));
    exp_weighted_with(&anti, gamma, inner, tol.into(), growth)
}

pub(crate) fn exp_weighted_with<F: Fn(f64) -> f64>(
    anti: &AccumulatingAntiderivative<F>,
    gamma: f64,
    inner: InnerLimit,
    tol: Tolerance,
    growth: f64,
) -> Result<QuadResult> {
    if !(gamma > 0.0) {
        return Err(Error::domain("gamma must be positive"));
    }
    if let InnerLimit::Shifted(b) = inner {
        if !(b >= 0.0) {
            return Err(Error::domain("inner shift must be nonnegative"));
        }
    }
    let rate = gamma - growth.max(0.0);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let worst_inner = RefCell::new(0.0f64);
    let outer = |c: f64| match anti.eval(inner.at(c)) {
        Ok((v, e)) => {
            let mut w = worst_inner.borrow_mut();
            *w = w.max(e);
            gamma * (-gamma * c).exp() * v
        }
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    // the bound is applied from the first cut onward, where the weight dominates
    let tail = TailBound::Exponential {
        rate,
        start: 2.0 / rate,
    };
    let result = integrate_semi_infinite(outer, 0.0, tol, tail);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut r = result?;
    r.abs_error_estimate += worst_inner.into_inner();
    Ok(r)
}
