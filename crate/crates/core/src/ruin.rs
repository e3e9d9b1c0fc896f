//! Ruin probability `ψ(u) = ∫_u^∞ h / ∫₀^∞ h` with
//! `h(v) = (λ/η)(v) e^{γv - Λ(v)}`, by quadrature and by closed forms for the
//! ratio families that admit one.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{integrability_of, DualRiskModel, HazardProfile, RatioForm, Sign, StateFunction};
use crate::quad::{
    integrate_finite_with, integrate_semi_infinite_with, AccumulatingAntiderivative, Endpoints, TailBound, Tolerance,
};
use crate::specfun::{erfc, erfcx, gamma as gamma_fn, upper_gamma_scaled};

/// Which closed form applies, keyed on the shape of λ/η.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogCase {
    /// λ/η = a + b u
    AffineRatio,
    /// λ/η = μ > γ
    ConstantRatio,
    /// λ/η = α + β/√u
    SqrtShift,
    /// λ/η = α u^β + γ
    PowerShift,
    /// λ/η = α - β/(1+u)
    HyperbolicMinus,
    /// λ/η = γ + β/(1+u)
    HyperbolicPlus,
}

impl CatalogCase {
    pub fn id(self) -> u8 {
        match self {
            CatalogCase::AffineRatio => 1,
            CatalogCase::ConstantRatio => 2,
            CatalogCase::SqrtShift => 3,
            CatalogCase::PowerShift => 4,
            CatalogCase::HyperbolicMinus => 5,
            CatalogCase::HyperbolicPlus => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "case")]
pub enum RuinMethod {
    ClosedForm(CatalogCase),
    Quadrature,
}

impl std::fmt::Display for RuinMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuinMethod::ClosedForm(c) => write!(f, "closed_form({})", c.id()),
            RuinMethod::Quadrature => write!(f, "quadrature"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinResult {
    pub psi: f64,
    pub method: RuinMethod,
    pub error_estimate: f64,
}

fn check_u(u: f64) -> Result<()> {
    if u >= 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("initial wealth must be finite and nonnegative, got {u}")))
    }
}

/// With `η(0) = 0` wealth only approaches zero asymptotically and ruin by
/// decay never happens; the ruin formula is not meant for that regime.
fn check_decay(m: &DualRiskModel) -> Result<()> {
    if m.eta.at(0.0) == 0.0 {
        Err(Error::Singularity(
            "eta(0) = 0, so wealth never decays to zero; the ruin formula does not apply".into(),
        ))
    } else {
        Ok(())
    }
}

type BoxedFn<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

/// `Λ` with a cache when it has no closed form.
pub(crate) struct CumulativeEval<'a> {
    hz: &'a HazardProfile,
    cache: Option<AccumulatingAntiderivative<BoxedFn<'a>>>,
}

impl<'a> CumulativeEval<'a> {
    pub(crate) fn new(hz: &'a HazardProfile) -> Self {
        let cache = if hz.analytic() {
            None
        } else {
            let g: Box<dyn Fn(f64) -> f64 + 'a> = Box::new(move |v| hz.ratio(v));
            Some(AccumulatingAntiderivative::with_left_power(
                g,
                0.5,
                Tolerance::new(1e-15, 1e-13),
                hz.origin_power(),
            ))
        };
        CumulativeEval { hz, cache }
    }

    pub(crate) fn eval(&self, v: f64) -> Result<f64> {
        match &self.cache {
            None => self.hz.cumulative(v),
            Some(c) => Ok(c.eval(v)?.0),
        }
    }

    /// `γv - Λ(v)`.
    pub(crate) fn exponent(&self, gamma: f64, v: f64) -> Result<f64> {
        match &self.cache {
            None => self.hz.exponent(gamma, v),
            Some(c) => Ok(gamma * v - c.eval(v)?.0),
        }
    }
}

// Integrals of the ruin integrand h, shared by the quadrature routes.
pub(crate) struct RuinIntegrals {
    pub head: f64,
    pub tail: f64,
    pub err: f64,
}

/// Evaluates `∫₀^u h` and `∫_u^∞ h` at a common scale.
pub(crate) fn ruin_integrals(hz: &HazardProfile, gamma: f64, u: f64, tail: TailBound) -> Result<RuinIntegrals> {
    let cum = CumulativeEval::new(hz);
    let failure = std::cell::RefCell::new(None);
    // the exponent γv - Λ(v) peaks somewhere on [0, ∞); factoring out a coarse
    // maximum keeps h representable when the ratio sits below γ for a while
    let mut offset: f64 = 0.0;
    let probe_end = match tail {
        TailBound::Exponential { start, .. } | TailBound::Algebraic { start, .. } => start.max(u).max(1.0),
    };
    for i in 1..=64 {
        let v = probe_end * i as f64 / 64.0;
        if let Ok(x) = cum.exponent(gamma, v) {
            offset = offset.max(x);
        }
    }
    let h = |v: f64| {
        if v == 0.0 && hz.origin_power() != 0.0 {
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
    let tol = Tolerance::new(1e-300, 1e-12);
    let head = if u > 0.0 {
        integrate_finite_with(h, 0.0, u, tol, Endpoints::left(hz.origin_power()))
    } else {
        Ok(crate::quad::QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        })
    };
    let tail_r = integrate_semi_infinite_with(h, u, tol, tail, if u == 0.0 { hz.origin_power() } else { 0.0 });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let head = head?;
    let tail_r = tail_r?;
    Ok(RuinIntegrals {
        head: head.value,
        tail: tail_r.value,
        err: head.abs_error_estimate + tail_r.abs_error_estimate,
    })
}

fn not_integrable(m: &DualRiskModel, e: Error) -> Error {
    match e {
        Error::Divergence(msg) => {
            let hint = match m.hazard().ratio_family() {
                Some(StateFunction::Constant { c }) if *c <= m.gamma => {
                    " (lambda = mu eta with mu <= gamma: ruin is certain for this proportional case)"
                }
                _ => "",
            };
            Error::Divergence(format!("{msg}{hint}; the ruin formula does not apply"))
        }
        other => other,
    }
}

/// `ψ(u)` by quadrature of the general formula.
pub fn ruin_probability(m: &DualRiskModel, u: f64) -> Result<RuinResult> {
    check_u(u)?;
    check_decay(m)?;
    let hz = m.hazard();
    let tail = integrability_of(&hz, m.gamma).require().map_err(|e| not_integrable(m, e))?;
    if u == 0.0 {
        return Ok(RuinResult {
            psi: 1.0,
            method: RuinMethod::Quadrature,
            error_estimate: 0.0,
        });
    }
    let r = ruin_integrals(&hz, m.gamma, u, tail)?;
    let total = r.head + r.tail;
    if !(total > 0.0) {
        return Err(Error::NonConvergence {
            message: "ruin integrand vanished numerically".into(),
            best_estimate: f64::NAN,
            abs_error: r.err,
        });
    }
    let psi = (r.tail / total).clamp(0.0, 1.0);
    Ok(RuinResult {
        psi,
        method: RuinMethod::Quadrature,
        error_estimate: r.err / total * (1.0 + psi),
    })
}

/// `(E[e^{γV} 1{V ≥ u}], E[e^{γV}])` where `V` has density `(λ/η)(v) e^{-Λ(v)}`;
/// their ratio is `ψ(u)`.
pub fn survival_weight_view(m: &DualRiskModel, u: f64) -> Result<(f64, f64)> {
    check_u(u)?;
    check_decay(m)?;
    let hz = m.hazard();
    let tail = integrability_of(&hz, m.gamma).require().map_err(|e| not_integrable(m, e))?;
    // unscaled integrals: recompute without the offset used for ψ
    let cum = CumulativeEval::new(&hz);
    let failure = std::cell::RefCell::new(None);
    let h = |v: f64| {
        if v == 0.0 && hz.origin_power() != 0.0 {
            return 0.0;
        }
        match cum.exponent(m.gamma, v) {
            Ok(x) => hz.ratio(v) * x.exp(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let tol = Tolerance::new(1e-300, 1e-12);
    let head = if u > 0.0 {
        integrate_finite_with(h, 0.0, u, tol, Endpoints::left(hz.origin_power()))?.value
    } else {
        0.0
    };
    let tail_v = integrate_semi_infinite_with(h, u, tol, tail, if u == 0.0 { hz.origin_power() } else { 0.0 });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let tail_v = tail_v?.value;
    Ok((tail_v, head + tail_v))
}

/// Identifies the closed-form case for a model, if any.
pub fn catalog_case(m: &DualRiskModel) -> Option<CatalogCase> {
    let hz = m.hazard();
    match_case(&hz, m.gamma).map(|(c, _)| c)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-13 * a.abs().max(b.abs()).max(1.0)
}

fn match_case(hz: &HazardProfile, gamma: f64) -> Option<(CatalogCase, StateFunction)> {
    let f = match hz.form() {
        RatioForm::Family(f) => f.clone(),
        _ => return None,
    };
    let case = match &f {
        StateFunction::Affine { b, .. } if *b > 0.0 => CatalogCase::AffineRatio,
        StateFunction::Constant { c } if *c > gamma => CatalogCase::ConstantRatio,
        StateFunction::SqrtShift { alpha, beta } if *alpha > gamma && *beta > 0.0 => CatalogCase::SqrtShift,
        StateFunction::PowerShift { alpha, beta, shift } if *alpha > 0.0 && *beta > 0.0 && close(*shift, gamma) => {
            CatalogCase::PowerShift
        }
        StateFunction::HyperbolicShift {
            alpha,
            beta,
            sign: Sign::Minus,
        } if *alpha > gamma && alpha > beta && *beta > 1.0 => CatalogCase::HyperbolicMinus,
        StateFunction::HyperbolicShift {
            alpha,
            beta,
            sign: Sign::Plus,
        } if close(*alpha, gamma) && *beta > 1.0 => CatalogCase::HyperbolicPlus,
        _ => return None,
    };
    Some((case, f))
}

/// `ψ(u)` from the closed-form catalog.
pub fn ruin_probability_closed(m: &DualRiskModel, u: f64) -> Result<RuinResult> {
    check_u(u)?;
    check_decay(m)?;
    let hz = m.hazard();
    let (case, f) = match_case(&hz, m.gamma).ok_or_else(|| {
        Error::NoPattern(format!(
            "lambda/eta = {} with gamma = {} matches no closed form; use the general quadrature routine",
            describe(&hz),
            m.gamma
        ))
    })?;
    let g = m.gamma;
    let psi = match (case, f) {
        (CatalogCase::AffineRatio, StateFunction::Affine { a, b }) => psi_affine_ratio(a, b, g, u),
        (CatalogCase::ConstantRatio, StateFunction::Constant { c }) => psi_constant_ratio(c, g, u),
        (CatalogCase::SqrtShift, StateFunction::SqrtShift { alpha, beta }) => psi_sqrt_shift(alpha, beta, g, u),
        (CatalogCase::PowerShift, StateFunction::PowerShift { alpha, beta, .. }) => psi_power_shift(alpha, beta, g, u),
        (CatalogCase::HyperbolicMinus, StateFunction::HyperbolicShift { alpha, beta, .. }) => {
            psi_hyperbolic_minus(alpha, beta, g, u)
        }
        (CatalogCase::HyperbolicPlus, StateFunction::HyperbolicShift { beta, .. }) => psi_hyperbolic_plus(beta, g, u),
        _ => unreachable!("case and family agree by construction"),
    }?;
    Ok(RuinResult {
        psi,
        method: RuinMethod::ClosedForm(case),
        error_estimate: 1e-13 * psi.max(f64::MIN_POSITIVE),
    })
}

fn describe(hz: &HazardProfile) -> String {
    match hz.form() {
        RatioForm::Family(f) => format!("{f:?}"),
        RatioForm::AffineOverAffine { a, b, c, d } => format!("({a} + {b}u)/({c} + {d}u)"),
        RatioForm::Quadrature => "a non-closed-form ratio".into(),
    }
}

fn from_logs(ln_num: f64, ln_den: f64) -> f64 {
    (ln_num - ln_den).exp().clamp(0.0, 1.0)
}

/// Closed form for λ/η = a + b u, `b > 0`.
pub fn psi_affine_ratio(a: f64, b: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(b > 0.0) || !(a >= 0.0) {
        return Err(Error::domain("affine ratio needs a >= 0 and b > 0"));
    }
    let m = (gamma - a) / b;
    let k = (0.5 * b).sqrt();
    let c = gamma * (PI / (2.0 * b)).sqrt();
    // ln[e^{-z²} + c erfc(z)]
    let ln_n = |x: f64| {
        let z = k * (x - m);
        if z >= 0.0 {
            -z * z + (c * erfcx(z)).ln_1p()
        } else {
            ((-z * z).exp() + c * erfc(z)).ln()
        }
    };
    Ok(from_logs(ln_n(u), ln_n(0.0)))
}

/// Closed form for λ = μη, `μ > γ`.
pub fn psi_constant_ratio(mu: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(mu > gamma) {
        return Err(Error::domain("proportional case needs mu > gamma"));
    }
    Ok((-(mu - gamma) * u).exp())
}

/// Closed form for λ/η = α + β/√u, `α > γ`, `β > 0`.
pub fn psi_sqrt_shift(alpha: f64, beta: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(alpha > gamma && beta > 0.0) {
        return Err(Error::domain("sqrt-shift case needs alpha > gamma and beta > 0"));
    }
    let kappa = alpha - gamma;
    let sk = kappa.sqrt();
    let coef = beta * gamma * PI.sqrt() / (kappa * sk);
    let ln_n = |x: f64| {
        let y = sk * x.sqrt() + beta / sk;
        -kappa * x - 2.0 * beta * x.sqrt() + (alpha / kappa - coef * erfcx(y)).ln()
    };
    Ok(from_logs(ln_n(u), ln_n(0.0)))
}

/// Closed form for λ/η = α u^β + γ, `α, β > 0`.
pub fn psi_power_shift(alpha: f64, beta: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::domain("power-shift case needs alpha, beta > 0"));
    }
    let p = beta + 1.0;
    let a = alpha / p;
    let s = 1.0 / p;
    let c = gamma / p * a.powf(-s);
    let ln_den = (c * gamma_fn(s)).ln_1p();
    if u == 0.0 {
        return Ok(1.0);
    }
    let y = a * u.powf(p);
    let ln_num = -y + (c * y.powf(s) * upper_gamma_scaled(s, y)?).ln_1p();
    Ok(from_logs(ln_num, ln_den))
}

/// Closed form for λ/η = α - β/(1+u), `α > γ`, `α > β > 1`.
pub fn psi_hyperbolic_minus(alpha: f64, beta: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(alpha > gamma && alpha > beta && beta > 1.0) {
        return Err(Error::domain("hyperbolic-minus case needs alpha > gamma and alpha > beta > 1"));
    }
    let kappa = alpha - gamma;
    // N(x) = βγ Γ(β, x) + α x^β e^{-x} = e^{-x} x^β [βγ e^{x} x^{-β} Γ(β, x) + α]
    let ln_n = |w: f64| -> Result<f64> {
        let x = kappa * (1.0 + w);
        Ok(-x + beta * x.ln() + (beta * gamma * upper_gamma_scaled(beta, x)? + alpha).ln())
    };
    Ok(from_logs(ln_n(u)?, ln_n(0.0)?))
}

/// Closed form for λ/η = γ + β/(1+u), `β > 1`.
pub fn psi_hyperbolic_plus(beta: f64, gamma: f64, u: f64) -> Result<f64> {
    if !(beta > 1.0) {
        return Err(Error::domain("hyperbolic-plus case needs beta > 1"));
    }
    let d = gamma + beta - 1.0;
    let w = 1.0 + u;
    Ok(gamma / d * w.powf(1.0 - beta) + (beta - 1.0) / d * w.powf(-beta))
}

/// The unique negative root of `F(θ) = -θ + μ(E[e^{θc}] - 1)`, so that
/// `ψ(u) = e^{θ* u}` when λ = μη with general jump law.
pub fn solve_theta_star<M: Fn(f64) -> f64>(mu: f64, jump_mgf: M, jump_mean: f64) -> Result<f64> {
    if !(mu > 0.0) || !(jump_mean > 0.0) {
        return Err(Error::domain("mu and the jump mean must be positive"));
    }
    if !(mu * jump_mean > 1.0) {
        return Err(Error::domain(format!(
            "mu * E[c] = {} <= 1: no negative root is guaranteed",
            mu * jump_mean
        )));
    }
    let f = |t: f64| -t + mu * (jump_mgf(t) - 1.0);
    // F < 0 just left of 0 because F'(0) = mu E[c] - 1 > 0
    let mut hi = -1e-3;
    let mut tries = 0;
    while f(hi) >= 0.0 {
        hi *= 0.5;
        tries += 1;
        if tries > 1000 || hi == 0.0 {
            return Err(Error::NonConvergence {
                message: "could not bracket the root near 0".into(),
                best_estimate: 0.0,
                abs_error: f64::INFINITY,
            });
        }
    }
    let mut lo = -1.0f64;
    while f(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -1e300 {
            return Err(Error::NonConvergence {
                message: "could not bracket the root from below".into(),
                best_estimate: hi,
                abs_error: f64::INFINITY,
            });
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-14 {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
