//! Laplace transform `ψ(u, δ) = E[e^{-δτ} 1{τ < ∞}]` of the ruin time and the
//! expected ruin time in the ruin-certain regime.

use std::cell::RefCell;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{integrability_of, DualRiskModel, StateFunction, Verdict};
use crate::quad::{
    integrate_finite, integrate_semi_infinite, solve_ivp, AccumulatingAntiderivative, OdeOptions, TailBound,
    Tolerance,
};
use crate::ruin::CumulativeEval;
use crate::specfun::tricomi_u;

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceQuery {
    pub model: DualRiskModel,
    pub u: f64,
    pub delta: f64,
}

impl LaplaceQuery {
    pub fn new(model: DualRiskModel, u: f64, delta: f64) -> Result<Self> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Validation(format!("u must be nonnegative, got {u}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Validation(format!("delta must be positive, got {delta}")));
        }
        if model.uses_tabulated() {
            return Err(Error::domain("the Laplace transform needs differentiable eta and lambda, not tabulated input"));
        }
        Ok(LaplaceQuery { model, u, delta })
    }
}

/// Families of the closed-form catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceFamily {
    /// Constant λ, affine η.
    ConstantLambdaAffineEta,
    /// `λ(u) = μe^{-γu}`.
    ExpDecayLambda,
    /// `λ = γη`, `η = 1/(α + βu)`.
    ReciprocalEta,
    /// Constant η, `λ(u) = μe^{κu}`.
    ExpGrowthLambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceMethod {
    Shooting,
    ClosedForm(LaplaceFamily),
}

impl fmt::Display for LaplaceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LaplaceMethod::Shooting => write!(f, "shooting"),
            LaplaceMethod::ClosedForm(fam) => write!(f, "closed_form({fam:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceResult {
    pub psi: f64,
    pub method: LaplaceMethod,
    pub error_estimate: f64,
    /// Set when a catalog family matched but its closed form was not usable.
    pub notice: Option<String>,
}

struct Coefficients<'a> {
    eta: &'a StateFunction,
    lam: &'a StateFunction,
    gamma: f64,
    delta: f64,
}

impl Coefficients<'_> {
    /// `(p, q)` of `f'' + p f' + q f = 0`.
    fn at(&self, u: f64) -> (f64, f64) {
        let eta = self.eta.at(u);
        let lam = self.lam.at(u);
        // exact for the exponential family, whose value underflows far out
        let dl = match self.lam {
            StateFunction::ExpScale { k, .. } => *k,
            _ => self.lam.derivative(u) / lam,
        };
        let p = self.eta.derivative(u) / eta + lam / eta - self.gamma - dl + self.delta / eta;
        let q = -(self.gamma + dl) * self.delta / eta;
        (p, q)
    }

    /// The decaying characteristic rate at `u`.
    fn decaying_root(&self, u: f64) -> f64 {
        let (p, q) = self.at(u);
        (-p - (p * p - 4.0 * q).max(0.0).sqrt()) / 2.0
    }


    /// Separation of the two characteristic rates; the backward flow of `y`
    /// contracts toward the decaying branch at this rate.
    fn gap(&self, u: f64) -> f64 {
        let (p, q) = self.at(u);
        (p * p - 4.0 * q).max(0.0).sqrt()
    }
}

const MAX_SHOOT_DISTANCE: f64 = 1e12;

/// Far boundary past which a wrong starting slope is damped by `e^{-target}`,
/// and whether the distance cap stopped the search first.
fn far_boundary(c: &Coefficients, u: f64, target: f64) -> (f64, bool) {
    let (mut v, mut acc) = (u, 0.0);
    while acc < target {
        if v - u >= MAX_SHOOT_DISTANCE {
            return (v, true);
        }
        let dv = 0.5 / c.gap(v).max(1e-6);
        v += dv;
        acc += 0.5;
    }
    (v, false)
}

fn shoot(c: &Coefficients, u: f64, u_max: f64) -> Result<f64> {
    // y = f'/f obeys y' = -y² - p y - q; L' = y gives log f.
    let field = |x: f64, s: &[f64], ds: &mut [f64]| {
        let (p, q) = c.at(x);
        ds[0] = -s[0] * s[0] - p * s[0] - q;
        ds[1] = s[0];
    };
    let opts = OdeOptions { rtol: 1e-11, atol: 1e-13, ..OdeOptions::default() };
    let sol = solve_ivp(field, u_max, &[c.decaying_root(u_max), 0.0], 0.0, &opts, &[])?;
    let at_u = sol.eval(u)?;
    let log_ratio = at_u[1] - sol.y_end[1];
    if !log_ratio.is_finite() {
        return Err(Error::NonConvergence {
            message: format!("Riccati shooting produced a non-finite log ratio from U_max = {u_max}"),
            best_estimate: f64::NAN,
            abs_error: f64::INFINITY,
        });
    }
    Ok(log_ratio.exp())
}

fn clamp_unit(v: f64) -> Result<f64> {
    if (-1e-9..=1.0 + 1e-9).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::NonConvergence {
            message: format!("no sign-definite decaying solution found, value {v} outside [0, 1]"),
            best_estimate: v,
            abs_error: f64::INFINITY,
        })
    }
}

/// `ψ(u, δ)` by shooting the bounded solution backward from a far boundary.
pub fn ruin_time_laplace(q: &LaplaceQuery) -> Result<LaplaceResult> {
    if q.u == 0.0 {
        return Ok(LaplaceResult { psi: 1.0, method: LaplaceMethod::Shooting, error_estimate: 0.0, notice: None });
    }
    let m = &q.model;
    let c = Coefficients { eta: &m.eta, lam: &m.lam, gamma: m.gamma, delta: q.delta };
    for i in 0..=64 {
        let v = q.u * i as f64 / 64.0;
        if !(m.lam.at(v) > 0.0) && v > 0.0 {
            return Err(Error::domain(format!("lambda must be positive on (0, u], vanishes at {v}")));
        }
    }
    let mut target = 25.0;
    let (mut u_max, _) = far_boundary(&c, q.u, target);
    let mut prev = shoot(&c, q.u, u_max)?;
    for _ in 0..12 {
        target *= 2.0;
        let (next_max, capped) = far_boundary(&c, q.u, target);
        u_max = next_max;
        let next = shoot(&c, q.u, u_max)?;
        if capped {
            // slowly varying coefficients (algebraic tails): the frozen root is only
            // approximately the decaying branch; measure the boundary sensitivity instead
            let near = shoot(&c, q.u, q.u + (u_max - q.u) * 1e-3)?;
            return Ok(LaplaceResult {
                psi: clamp_unit(next)?,
                method: LaplaceMethod::Shooting,
                error_estimate: (next - near).abs().max(1e-10 * next),
                notice: None,
            });
        }
        let change = (next - prev).abs();
        if change < 1e-10 {
            return Ok(LaplaceResult {
                psi: clamp_unit(next)?,
                method: LaplaceMethod::Shooting,
                error_estimate: change.max(1e-10 * next),
                notice: None,
            });
        }
        if target >= 25.0 * 4096.0 && change < 1e-6 {
            // still creeping after the last doubling: accept with the drift as error
            return Ok(LaplaceResult {
                psi: clamp_unit(next)?,
                method: LaplaceMethod::Shooting,
                error_estimate: 4.0 * change,
                notice: None,
            });
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        message: format!("far boundary did not stabilize up to U_max = {u_max}"),
        best_estimate: prev,
        abs_error: f64::INFINITY,
    })
}

/// Which catalog family the model belongs to, if any.
pub fn laplace_family(m: &DualRiskModel) -> Option<LaplaceFamily> {
    let eta = m.eta.canonical();
    let lam = m.lam.canonical();
    match (&eta, &lam) {
        (StateFunction::Affine { b, .. }, StateFunction::Constant { .. }) if *b > 0.0 => {
            Some(LaplaceFamily::ConstantLambdaAffineEta)
        }
        (_, StateFunction::ExpScale { k, .. }) if (k + m.gamma).abs() <= 1e-12 * m.gamma => {
            Some(LaplaceFamily::ExpDecayLambda)
        }
        (StateFunction::Constant { .. }, StateFunction::ExpScale { k, .. }) if *k > 0.0 => {
            Some(LaplaceFamily::ExpGrowthLambda)
        }
        (StateFunction::ReciprocalAffine { .. }, _) => {
            let ratio_is_gamma = [0.0, 0.5, 1.0, 3.0, 10.0]
                .iter()
                .all(|&v| (lam.at(v) - m.gamma * eta.at(v)).abs() <= 1e-12 * lam.at(v).abs());
            ratio_is_gamma.then_some(LaplaceFamily::ReciprocalEta)
        }
        _ => None,
    }
}

/// `ψ(u, δ)` from the closed-form catalog, falling back to shooting with a
/// notice where the family's special-function parameters are out of range.
pub fn ruin_time_laplace_closed(q: &LaplaceQuery) -> Result<LaplaceResult> {
    let fam = laplace_family(&q.model)
        .ok_or_else(|| Error::NoPattern("model matches none of the Laplace catalog families".into()))?;
    let method = LaplaceMethod::ClosedForm(fam);
    if q.u == 0.0 {
        return Ok(LaplaceResult { psi: 1.0, method, error_estimate: 0.0, notice: None });
    }
    let closed = match fam {
        LaplaceFamily::ConstantLambdaAffineEta => constant_lambda_affine_eta(q),
        LaplaceFamily::ExpDecayLambda => exp_decay_lambda(q),
        LaplaceFamily::ExpGrowthLambda => exp_growth_lambda(q),
        LaplaceFamily::ReciprocalEta => Err(Error::domain("the quadratic-argument form has no bounded Kummer companion")),
    };
    match closed {
        Ok((psi, err)) => Ok(LaplaceResult { psi: clamp_unit(psi)?, method, error_estimate: err, notice: None }),
        Err(e) if matches!(e, Error::Domain(_)) => {
            let mut r = ruin_time_laplace(q)?;
            r.notice = Some(format!("closed form unavailable ({e}); used shooting"));
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

fn constant_lambda_affine_eta(q: &LaplaceQuery) -> Result<(f64, f64)> {
    let (StateFunction::Affine { a: rho, b: mu }, StateFunction::Constant { c: lam }) =
        (q.model.eta.canonical(), q.model.lam.canonical())
    else {
        unreachable!("family already matched")
    };
    let g = q.model.gamma;
    let a = (mu + lam) / mu;
    let b = (mu + lam + q.delta) / mu;
    if !(b > a && a > 0.0 && rho > 0.0) {
        return Err(Error::domain(format!("Kummer parameters need b > a > 0 and rho > 0, got a = {a}, b = {b}")));
    }
    let z = |u: f64| g * (rho + mu * u) / mu;
    let num = tricomi_u(b - a, b, z(q.u))?;
    let den = tricomi_u(b - a, b, z(0.0))?;
    let psi = num.value / den.value;
    Ok((psi, psi * (num.abs_error_bound / num.value + den.abs_error_bound / den.value)))
}

fn exp_decay_lambda(q: &LaplaceQuery) -> Result<(f64, f64)> {
    // γ + λ'/λ vanishes, so f' = C/η exp(-∫(λ+δ)/η) and ψ = ∫_u^∞ f' / ∫_0^∞ f'.
    let m = &q.model;
    let delta = q.delta;
    let eta_inf = m.eta.limit_at_infinity();
    if !m.eta.positive_on_open_half_line() || !(m.eta.at(0.0) > 0.0) {
        return Err(Error::domain("the decaying-lambda form needs eta positive on [0, ∞)"));
    }
    let (tail_bound, linear_cost) = match m.eta.canonical() {
        _ if eta_inf.is_finite() && eta_inf > 0.0 => (TailBound::exponential(0.5 * delta / eta_inf), None),
        // f' ~ v^{-(1 + δ/b)} under linear cost growth
        StateFunction::Affine { a, b } if b > 0.0 => {
            (TailBound::Algebraic { power: 1.0 + delta / b, start: 0.0 }, Some((a, b)))
        }
        _ => return Err(Error::domain("the decaying-lambda form needs bounded or affine eta")),
    };
    let exponent = AccumulatingAntiderivative::new(
        |w: f64| (m.lam.at(w) + if linear_cost.is_some() { 0.0 } else { delta }) / m.eta.at(w),
        0.5,
        Tolerance::new(1e-300, 1e-13),
    );
    // with linear cost the δ part is explicit and ∫λ/η is frozen once its tail,
    // at most μe^{-γv}/(γη(0)), is negligible
    let freeze = match (linear_cost, m.lam.canonical()) {
        (Some((a, _)), StateFunction::ExpScale { mu, .. }) => {
            let g = m.gamma;
            ((mu / (g * a * 1e-17)).ln() / g).max(q.u)
        }
        _ => f64::INFINITY,
    };
    let big_e = |v: f64| -> Result<f64> {
        match linear_cost {
            Some((a, b)) => Ok(delta / b * (b * v / a).ln_1p() + exponent.eval(v.min(freeze))?.0),
            None => Ok(exponent.eval(v)?.0),
        }
    };
    let failure = RefCell::new(None);
    let fp = |v: f64| match big_e(v) {
        Ok(e) => (-e).exp() / m.eta.at(v),
        Err(err) => {
            failure.borrow_mut().get_or_insert(err);
            f64::NAN
        }
    };
    let tol = Tolerance::new(1e-300, 1e-12);
    let head = integrate_finite(fp, 0.0, q.u, tol);
    let tail = integrate_semi_infinite(fp, q.u, tol, tail_bound);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (head, tail) = (head?, tail?);
    let total = head.value + tail.value;
    Ok((tail.value / total, (head.abs_error_estimate + tail.abs_error_estimate) / total))
}

fn exp_growth_lambda(q: &LaplaceQuery) -> Result<(f64, f64)> {
    // x = -(μ/(ηκ)) e^{κu} turns the equation into Kummer's with parameters (k, B);
    // f = (-x)^k e^x U(B - k, B, -x) is the solution decaying as u grows.
    let (StateFunction::Constant { c: eta }, StateFunction::ExpScale { mu, k: kappa }) =
        (q.model.eta.canonical(), q.model.lam.canonical())
    else {
        unreachable!("family already matched")
    };
    let g = q.model.gamma;
    let a_ = mu / eta;
    let b_ = -g - kappa + q.delta / eta;
    let c_ = -(g + kappa) * q.delta / eta;
    let k = (-b_ + (b_ * b_ - 4.0 * c_).sqrt()) / (2.0 * kappa);
    let big_b = 2.0 * k + 1.0 + b_ / kappa;
    if !(big_b > k) {
        return Err(Error::domain(format!("Kummer parameters need B > k, got k = {k}, B = {big_b}")));
    }
    let z = |u: f64| (a_ / kappa) * (kappa * u).exp();
    let (z0, zu) = (z(0.0), z(q.u));
    let num = tricomi_u(big_b - k, big_b, zu)?;
    let den = tricomi_u(big_b - k, big_b, z0)?;
    let log_psi = k * kappa * q.u - (zu - z0) + (num.value / den.value).ln();
    let psi = log_psi.exp();
    Ok((psi, psi * (num.abs_error_bound / num.value + den.abs_error_bound / den.value)))
}

/// Verdict on whether ruin happens almost surely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinCertainty {
    /// `λ/η <= γ - margin` everywhere.
    NegativeDrift { margin: f64 },
    /// The ruin integral diverges but the drift margin is not uniform.
    DivergentIntegral,
    NotCertain,
    Indeterminate,
}

const CERTAINTY_PROBES: usize = 400;

pub fn ruin_certainty(m: &DualRiskModel) -> RuinCertainty {
    let hz = m.hazard();
    let limit = hz.ratio_limit();
    let mut sup = if limit.is_finite() { limit } else { f64::INFINITY };
    for i in 1..=CERTAINTY_PROBES {
        let v = 1e-6 * (1e9f64).powf(i as f64 / CERTAINTY_PROBES as f64);
        let r = hz.ratio(v);
        if r.is_finite() {
            sup = sup.max(r);
        }
    }
    let margin = m.gamma - sup;
    if margin > 1e-9 * m.gamma {
        return RuinCertainty::NegativeDrift { margin };
    }
    match integrability_of(&hz, m.gamma).verdict {
        Verdict::Divergent => RuinCertainty::DivergentIntegral,
        Verdict::Integrable => RuinCertainty::NotCertain,
        Verdict::Inconclusive => RuinCertainty::Indeterminate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedRuinQuery {
    pub model: DualRiskModel,
    pub u: f64,
    margin: f64,
}

impl ExpectedRuinQuery {
    pub fn new(model: DualRiskModel, u: f64) -> Result<Self> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Validation(format!("u must be nonnegative, got {u}")));
        }
        match ruin_certainty(&model) {
            RuinCertainty::NegativeDrift { margin } => Ok(ExpectedRuinQuery { model, u, margin }),
            RuinCertainty::NotCertain => {
                Err(Error::Divergence("ruin is not certain, so the expected ruin time is infinite".into()))
            }
            RuinCertainty::DivergentIntegral => Err(Error::Inconclusive(
                "ruin is certain but lambda/eta approaches gamma; the expected ruin time may be infinite".into(),
            )),
            RuinCertainty::Indeterminate => {
                Err(Error::Inconclusive("cannot decide whether ruin is certain for this model".into()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedRuinTime {
    pub value: f64,
    /// Slope of `E[τ]` in `u` at the origin.
    pub g0: f64,
    pub error_estimate: f64,
}

/// `E[τ] = ∫₀^u g`, with
/// `g(v) = 1/η(v) + (λ/η)(v) ∫_v^∞ e^{-γ(w-v) + Λ(w) - Λ(v)} / η(w) dw`,
/// the solution of `𝒜f = -1`, `f(0) = 0`, without exponential growth.
pub fn expected_ruin_time(q: &ExpectedRuinQuery) -> Result<ExpectedRuinTime> {
    let m = &q.model;
    let hz = m.hazard();
    let cum = CumulativeEval::new(&hz);
    let gamma = m.gamma;
    let failure = RefCell::new(None);
    let stash = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
        f64::NAN
    };
    let slope = |v: f64| -> Result<(f64, f64)> {
        let lv = cum.eval(v)?;
        let inner = |w: f64| match cum.eval(w) {
            Ok(lw) => (-gamma * (w - v) + lw - lv).exp() / m.eta.at(w),
            Err(e) => stash(e),
        };
        let r = integrate_semi_infinite(inner, v, Tolerance::new(1e-300, 1e-12), TailBound::exponential(0.5 * q.margin))?;
        Ok((1.0 / m.eta.at(v) + hz.ratio(v) * r.value, hz.ratio(v) * r.abs_error_estimate))
    };
    let (g0, _) = slope(0.0)?;
    if q.u == 0.0 {
        return Ok(ExpectedRuinTime { value: 0.0, g0, error_estimate: 0.0 });
    }
    let inner_err = RefCell::new(0.0f64);
    let g = |v: f64| match slope(v) {
        Ok((x, e)) => {
            let mut w = inner_err.borrow_mut();
            *w = w.max(e);
            x
        }
        Err(e) => stash(e),
    };
    let outer = integrate_finite(g, 0.0, q.u, Tolerance::new(1e-300, 1e-11));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    Ok(ExpectedRuinTime {
        value: outer.value,
        g0,
        error_estimate: outer.abs_error_estimate + q.u * inner_err.into_inner(),
    })
}
