//! Barrier dividends: probability of reaching `b` before ruin, the expected
//! overshoot, the law of the number of dividends and the Laplace transform
//! of their total.

use std::cell::RefCell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{integrability_of, DualRiskModel, StateFunction};
use crate::quad::{
    exp_weighted_with, integrate_semi_infinite, AccumulatingAntiderivative, InnerLimit, TailBound, Tolerance,
};
use crate::ruin::{ruin_probability_closed, CumulativeEval};

/// A dividend problem: start at `u`, pay out every overshoot above `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DividendQuery {
    pub model: DualRiskModel,
    pub u: f64,
    pub b: f64,
}

impl DividendQuery {
    pub fn new(model: DualRiskModel, u: f64, b: f64) -> Result<Self> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Validation(format!("u must be nonnegative, got {u}")));
        }
        if !(b > u) || !b.is_finite() {
            return Err(Error::Validation(format!("barrier b = {b} must exceed u = {u}")));
        }
        Ok(DividendQuery { model, u, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DividendStats {
    pub phi_ub: f64,
    pub phi_bb: f64,
    pub expected_single: f64,
    pub expected_count: f64,
    pub expected_total: f64,
}

/// `φ(x, b)` for one barrier, sharing the denominator across starting points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub b: f64,
    f_u: f64,
    f_b: f64,
    denom: f64,
    pub error_estimate: f64,
}

impl Barrier {
    pub fn phi_ub(&self) -> f64 {
        (self.f_u / self.denom).clamp(0.0, 1.0)
    }

    pub fn phi_bb(&self) -> f64 {
        (self.f_b / self.denom).clamp(0.0, 1.0)
    }
}

/// Solves the barrier problem for starting wealth `u <= b` by quadrature.
pub fn solve_barrier(m: &DualRiskModel, u: f64, b: f64) -> Result<Barrier> {
    if !(u >= 0.0 && u <= b) {
        return Err(Error::domain(format!("need 0 <= u <= b, got u = {u}, b = {b}")));
    }
    let hz = m.hazard();
    let tail = integrability_of(&hz, m.gamma).require()?;
    let gamma = m.gamma;
    let cum = CumulativeEval::new(&hz);
    let start = match tail {
        TailBound::Exponential { start, .. } | TailBound::Algebraic { start, .. } => start,
    };
    let mut offset: f64 = 0.0;
    let probe_end = (b + start).max(1.0);
    for i in 1..=64 {
        let v = probe_end * i as f64 / 64.0;
        if let Ok(x) = cum.exponent(gamma, v) {
            offset = offset.max(x);
        }
    }
    let failure = RefCell::new(None);
    let origin = hz.origin_power();
    let h = |v: f64| {
        if v == 0.0 && origin != 0.0 {
            return 0.0;
        }
        match cum.exponent(gamma, v) {
            Ok(x) => {
                let y = hz.ratio(v) * (x - offset).exp();
                if y.is_finite() {
                    y
                } else {
                    0.0
                }
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let anti = AccumulatingAntiderivative::with_left_power(h, 0.25, Tolerance::new(1e-300, 1e-13), origin);
    let computed = (|| -> Result<Barrier> {
        let (f_u, e_u) = anti.eval(u)?;
        let (f_b, e_b) = anti.eval(b)?;
        let d = exp_weighted_with(&anti, gamma, InnerLimit::Shifted(b), Tolerance::new(1e-300, 1e-12), 0.0)?;
        Ok(Barrier {
            b,
            f_u,
            f_b,
            denom: d.value,
            error_estimate: (e_u + e_b + d.abs_error_estimate) / d.value,
        })
    })();
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    computed
}

/// `φ(u, b) = P(τ_b < τ)`.
pub fn hitting_probability(q: &DividendQuery) -> Result<f64> {
    Ok(solve_barrier(&q.model, q.u, q.b)?.phi_ub())
}

/// `φ(u, b)` through the closed-form ruin probability, using
/// `f(x) ∝ 1 - ψ(x)`: `φ = (1 - ψ(u)) / (1 - E[ψ(b + C)])`, `C ~ Exp(γ)`.
/// Fully explicit when λ = μη.
pub fn hitting_probability_closed(q: &DividendQuery) -> Result<f64> {
    let m = &q.model;
    let g = m.gamma;
    if let Some(StateFunction::Constant { c: mu }) = m.hazard().ratio_family() {
        if *mu > g {
            let k = mu - g;
            let num = -(-k * q.u).exp_m1();
            let den = 1.0 - g / mu * (-k * q.b).exp();
            return Ok((num / den).clamp(0.0, 1.0));
        }
    }
    let psi_u = ruin_probability_closed(m, q.u)?.psi;
    let failure = RefCell::new(None);
    let f = |c: f64| match ruin_probability_closed(m, q.b + c) {
        Ok(r) => g * (-g * c).exp() * r.psi,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let r = integrate_semi_infinite(f, 0.0, Tolerance::new(1e-300, 1e-13), TailBound::exponential(g));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let expected_psi = r?.value;
    Ok(((1.0 - psi_u) / (1.0 - expected_psi)).clamp(0.0, 1.0))
}

/// `E[D 1{τ_b < τ}] = φ(u, b)/γ`.
pub fn expected_single_dividend(q: &DividendQuery) -> Result<f64> {
    Ok(hitting_probability(q)? / q.model.gamma)
}

/// All barrier statistics at once.
pub fn dividend_stats(q: &DividendQuery) -> Result<DividendStats> {
    let s = solve_barrier(&q.model, q.u, q.b)?;
    Ok(stats_from(&s, q.model.gamma))
}

pub(crate) fn stats_from(s: &Barrier, gamma: f64) -> DividendStats {
    let phi_ub = s.phi_ub();
    let phi_bb = s.phi_bb();
    let expected_count = if phi_bb < 1.0 {
        phi_ub / (1.0 - phi_bb)
    } else {
        f64::INFINITY
    };
    DividendStats {
        phi_ub,
        phi_bb,
        expected_single: phi_ub / gamma,
        expected_count,
        expected_total: expected_count / gamma,
    }
}

/// `P(N = n)`: geometric after the first barrier hit.
pub fn dividend_count_pmf(q: &DividendQuery, n: u64) -> Result<f64> {
    let s = solve_barrier(&q.model, q.u, q.b)?;
    Ok(count_pmf(s.phi_ub(), s.phi_bb(), n))
}

pub fn count_pmf(phi_ub: f64, phi_bb: f64, n: u64) -> f64 {
    if n == 0 {
        1.0 - phi_ub
    } else {
        phi_ub * phi_bb.powi((n - 1).min(i32::MAX as u64) as i32) * (1.0 - phi_bb)
    }
}

/// `E[exp(-θ ΣD_i)]`.
pub fn total_dividends_laplace(q: &DividendQuery, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::domain(format!("theta must be nonnegative, got {theta}")));
    }
    let s = solve_barrier(&q.model, q.u, q.b)?;
    Ok(laplace_from(s.phi_ub(), s.phi_bb(), q.model.gamma, theta))
}

pub fn laplace_from(phi_ub: f64, phi_bb: f64, gamma: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    let r = gamma / (gamma + theta);
    1.0 - phi_ub + phi_ub * (1.0 - phi_bb) * r / (1.0 - r * phi_bb)
}
