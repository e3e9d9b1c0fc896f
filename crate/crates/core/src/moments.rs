//! First and second moments of the wealth before the jump-free hit time,
//! for `η(u) = ρ + μu`, `λ(u) = α + βu` and a general jump law given by its
//! first two moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DualRiskModel, StateFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineModelSpec {
    pub rho: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub jump_mean: f64,
    pub jump_second: f64,
}

impl AffineModelSpec {
    pub fn new(rho: f64, mu: f64, alpha: f64, beta: f64, jump_mean: f64, jump_second: f64) -> Result<Self> {
        let s = AffineModelSpec { rho, mu, alpha, beta, jump_mean, jump_second };
        s.validate()?;
        Ok(s)
    }

    /// Exponential jumps with rate `gamma`.
    pub fn exponential(rho: f64, mu: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Validation(format!("gamma must be positive, got {gamma}")));
        }
        Self::new(rho, mu, alpha, beta, 1.0 / gamma, 2.0 / (gamma * gamma))
    }

    /// Reads the affine parameters off a model with exponential jumps.
    pub fn from_model(m: &DualRiskModel) -> Result<Self> {
        let affine = |f: &StateFunction| match f.canonical() {
            StateFunction::Constant { c } => Some((c, 0.0)),
            StateFunction::Affine { a, b } => Some((a, b)),
            _ => None,
        };
        match (affine(&m.eta), affine(&m.lam)) {
            (Some((rho, mu)), Some((alpha, beta))) => Self::exponential(rho, mu, alpha, beta, m.gamma),
            _ => Err(Error::domain("moment formulas need affine eta and lambda")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("mu", self.mu), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.jump_mean >= 0.0) || !self.jump_mean.is_finite() {
            return Err(Error::Validation(format!("jump_mean must be nonnegative, got {}", self.jump_mean)));
        }
        if !(self.jump_second >= self.jump_mean * self.jump_mean) || !self.jump_second.is_finite() {
            return Err(Error::Validation(format!(
                "jump_second = {} is below jump_mean^2 = {}",
                self.jump_second,
                self.jump_mean * self.jump_mean
            )));
        }
        Ok(())
    }

    /// Net decay rate of the mean, `μ - βE[c]`.
    fn k(&self) -> f64 {
        self.mu - self.beta * self.jump_mean
    }

    /// Drift of the mean at zero wealth, `αE[c] - ρ`.
    fn d(&self) -> f64 {
        self.alpha * self.jump_mean - self.rho
    }
}

/// Time for `u' = -(ρ + μu)` to reach zero from `u`.
pub fn deterministic_hit_time(rho: f64, mu: f64, u: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    if !(mu >= 0.0) || !(u >= 0.0) {
        return Err(Error::domain(format!("need mu >= 0 and u >= 0, got mu = {mu}, u = {u}")));
    }
    if mu == 0.0 {
        return Ok(u / rho);
    }
    Ok((mu * u / rho).ln_1p() / mu)
}

/// `(1 - e^{-x}) / x`, continuous at zero.
fn e1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0
    } else {
        -(-x).exp_m1() / x
    }
}

fn check_time(s: &AffineModelSpec, u: f64, t: f64) -> Result<()> {
    s.validate()?;
    if !(u >= 0.0) || !(t >= 0.0) {
        return Err(Error::domain(format!("need u >= 0 and t >= 0, got u = {u}, t = {t}")));
    }
    let t0 = deterministic_hit_time(s.rho, s.mu, u)?;
    if t >= t0 {
        return Err(Error::domain(format!(
            "moment formula valid only before deterministic hit time T0 = {t0}, got t = {t}"
        )));
    }
    Ok(())
}

fn mean_unchecked(s: &AffineModelSpec, u: f64, t: f64) -> f64 {
    let x = s.k() * t;
    u * (-x).exp() + s.d() * t * e1(x)
}

/// `E[U_t]` for `t < T0`.
pub fn mean_wealth(s: &AffineModelSpec, u: f64, t: f64) -> Result<f64> {
    check_time(s, u, t)?;
    Ok(mean_unchecked(s, u, t))
}

/// `E[U_t^2]` for `t < T0`, solving
/// `s' = αE[c²] + (2(αE[c]-ρ) + βE[c²]) m(t) - 2(μ - βE[c]) s`, `s(0) = u²`.
pub fn second_moment_wealth(s: &AffineModelSpec, u: f64, t: f64) -> Result<f64> {
    check_time(s, u, t)?;
    let x = s.k() * t;
    let a = 2.0 * s.d() + s.beta * s.jump_second;
    let ex = (-x).exp();
    let e1x = e1(x);
    let v = u * u * ex * ex
        + s.alpha * s.jump_second * t * e1(2.0 * x)
        + a * (u * t * ex * e1x + s.d() * t * t / 2.0 * e1x * e1x);
    Ok(v)
}

/// `Var(U_t)`, clipped at zero against rounding.
pub fn variance_wealth(s: &AffineModelSpec, u: f64, t: f64) -> Result<f64> {
    let m = mean_wealth(s, u, t)?;
    Ok((second_moment_wealth(s, u, t)? - m * m).max(0.0))
}

/// The displayed closed form for `E[U_t^2]` with exponents `2β(E[c] - μ)t`
/// and initial value `u`. It does not solve the moment equation; kept only
/// so the discrepancy can be measured.
pub fn second_moment_printed(s: &AffineModelSpec, u: f64, t: f64) -> f64 {
    let ec = s.jump_mean;
    let r = 2.0 * s.beta * (ec - s.mu);
    let q = (s.rho - s.alpha * ec) / (s.mu - s.beta * ec);
    let a = 2.0 * (s.alpha * ec - s.rho) + s.beta * s.jump_second;
    let g = (1.0 - (-r * t).exp()) / r;
    u * (-r * t).exp() + s.alpha * s.jump_second * g - a * q * g
        + a * (q + u) * ((-r / 2.0 * t).exp() - (-r * t).exp()) / (r / 2.0)
}
