//! Model objects: cost rate η, jump intensity λ, jump-size rate γ, the ratio
//! λ/η with its cumulative integral Λ, and the model-spec document format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_finite, TailBound, Tolerance, ANALYTIC_RTOL};

/// Sign of the hyperbolic term in `α ± β/(1+u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A nonnegative function of wealth, used for both η and λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFunction {
    /// `c`
    Constant { c: f64 },
    /// `a + b u`
    Affine { a: f64, b: f64 },
    /// `alpha u^beta + shift`
    PowerShift { alpha: f64, beta: f64, shift: f64 },
    /// `alpha + beta / sqrt(u)`
    SqrtShift { alpha: f64, beta: f64 },
    /// `alpha ± beta / (1 + u)`
    HyperbolicShift { alpha: f64, beta: f64, sign: Sign },
    /// `mu e^{k u}`; `k` may be negative.
    ExpScale { mu: f64, k: f64 },
    /// `1 / (a + b u)`
    ReciprocalAffine { a: f64, b: f64 },
    /// Piecewise-linear through `[u, value]` pairs, constant beyond the grid.
    Tabulated { points: Vec<[f64; 2]> },
    /// Pointwise product of the factors.
    Product { factors: Vec<StateFunction> },
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be finite, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be nonnegative, got {v}")))
    }
}

impl StateFunction {
    pub fn constant(c: f64) -> Self {
        StateFunction::Constant { c }
    }

    pub fn affine(a: f64, b: f64) -> Self {
        StateFunction::Affine { a, b }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            StateFunction::Constant { .. } => "constant",
            StateFunction::Affine { .. } => "affine",
            StateFunction::PowerShift { .. } => "power_shift",
            StateFunction::SqrtShift { .. } => "sqrt_shift",
            StateFunction::HyperbolicShift { .. } => "hyperbolic_shift",
            StateFunction::ExpScale { .. } => "exp_scale",
            StateFunction::ReciprocalAffine { .. } => "reciprocal_affine",
            StateFunction::Tabulated { .. } => "tabulated",
            StateFunction::Product { .. } => "product",
        }
    }

    /// Checks parameter ranges. `name` prefixes messages (e.g. `eta`).
    pub fn validate(&self, name: &str) -> Result<()> {
        use StateFunction::*;
        match self {
            Constant { c } => nonneg(&format!("{name}.c"), *c),
            Affine { a, b } => {
                nonneg(&format!("{name}.a"), *a)?;
                nonneg(&format!("{name}.b"), *b)
            }
            PowerShift { alpha, beta, shift } => {
                nonneg(&format!("{name}.alpha"), *alpha)?;
                nonneg(&format!("{name}.beta"), *beta)?;
                nonneg(&format!("{name}.shift"), *shift)
            }
            SqrtShift { alpha, beta } => {
                nonneg(&format!("{name}.alpha"), *alpha)?;
                nonneg(&format!("{name}.beta"), *beta)
            }
            HyperbolicShift { alpha, beta, sign } => {
                nonneg(&format!("{name}.alpha"), *alpha)?;
                nonneg(&format!("{name}.beta"), *beta)?;
                if *sign == Sign::Minus && beta > alpha {
                    return Err(Error::Validation(format!(
                        "{name}: alpha - beta/(1+u) is negative near 0 (beta {beta} > alpha {alpha})"
                    )));
                }
                Ok(())
            }
            ExpScale { mu, k } => {
                nonneg(&format!("{name}.mu"), *mu)?;
                finite(&format!("{name}.k"), *k)
            }
            ReciprocalAffine { a, b } => {
                finite(&format!("{name}.a"), *a)?;
                if *a <= 0.0 {
                    return Err(Error::Validation(format!("{name}.a must be positive, got {a}")));
                }
                nonneg(&format!("{name}.b"), *b)
            }
            Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::Validation(format!("{name}: tabulated grid needs at least 2 points")));
                }
                for (i, p) in points.iter().enumerate() {
                    nonneg(&format!("{name}.points[{i}].u"), p[0])?;
                    nonneg(&format!("{name}.points[{i}].value"), p[1])?;
                }
                for (i, w) in points.windows(2).enumerate() {
                    if !(w[1][0] > w[0][0]) {
                        return Err(Error::Validation(format!(
                            "{name}: tabulated grid must be strictly increasing in u (points {i} and {})",
                            i + 1
                        )));
                    }
                }
                Ok(())
            }
            Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::Validation(format!("{name}: product needs at least one factor")));
                }
                for (i, f) in factors.iter().enumerate() {
                    f.validate(&format!("{name}.factors[{i}]"))?;
                }
                Ok(())
            }
        }
    }

    /// True when the function is strictly positive for every `u > 0`.
    pub fn positive_on_open_half_line(&self) -> bool {
        use StateFunction::*;
        match self {
            Constant { c } => *c > 0.0,
            Affine { a, b } => *a > 0.0 || *b > 0.0,
            PowerShift { alpha, shift, .. } => *alpha > 0.0 || *shift > 0.0,
            SqrtShift { alpha, beta } => *alpha > 0.0 || *beta > 0.0,
            HyperbolicShift { alpha, beta, sign } => match sign {
                Sign::Plus => *alpha > 0.0 || *beta > 0.0,
                Sign::Minus => *alpha > 0.0 && alpha >= beta,
            },
            ExpScale { mu, .. } => *mu > 0.0,
            ReciprocalAffine { .. } => true,
            Tabulated { points } => {
                let first_ok = points[0][1] > 0.0 || points[0][0] == 0.0 && points[1][1] > 0.0;
                first_ok && points.iter().skip(1).all(|p| p[1] > 0.0)
            }
            Product { factors } => factors.iter().all(|f| f.positive_on_open_half_line()),
        }
    }

    /// `f(u)` without domain checks; `u` must be nonnegative.
    pub(crate) fn at(&self, u: f64) -> f64 {
        use StateFunction::*;
        match self {
            Constant { c } => *c,
            Affine { a, b } => a + b * u,
            PowerShift { alpha, beta, shift } => {
                if *beta == 0.0 {
                    alpha + shift
                } else {
                    alpha * u.powf(*beta) + shift
                }
            }
            SqrtShift { alpha, beta } => {
                if *beta == 0.0 {
                    *alpha
                } else {
                    alpha + beta / u.sqrt()
                }
            }
            HyperbolicShift { alpha, beta, sign } => alpha + sign.factor() * beta / (1.0 + u),
            ExpScale { mu, k } => mu * (k * u).exp(),
            ReciprocalAffine { a, b } => 1.0 / (a + b * u),
            Tabulated { points } => interpolate(points, u),
            Product { factors } => factors.iter().map(|f| f.at(u)).product(),
        }
    }

    /// `f(u)` for `u >= 0`.
    pub fn evaluate(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::domain(format!("state function evaluated at negative wealth {u}")));
        }
        if u == 0.0 && self.singular_at_zero() {
            return Err(Error::Singularity(format!("{} is singular at u = 0", self.family_name())));
        }
        Ok(self.at(u))
    }

    fn singular_at_zero(&self) -> bool {
        match self {
            StateFunction::SqrtShift { beta, .. } => *beta > 0.0,
            StateFunction::Product { factors } => factors.iter().any(|f| f.singular_at_zero()),
            _ => false,
        }
    }

    /// `f'(u)`; one-sided slope for tabulated curves.
    pub fn derivative(&self, u: f64) -> f64 {
        use StateFunction::*;
        match self {
            Constant { .. } => 0.0,
            Affine { b, .. } => *b,
            PowerShift { alpha, beta, .. } => {
                if *beta == 0.0 || *alpha == 0.0 {
                    0.0
                } else if *beta == 1.0 {
                    *alpha
                } else {
                    alpha * beta * u.powf(beta - 1.0)
                }
            }
            SqrtShift { beta, .. } => -0.5 * beta * u.powf(-1.5),
            HyperbolicShift { beta, sign, .. } => -sign.factor() * beta / ((1.0 + u) * (1.0 + u)),
            ExpScale { mu, k } => mu * k * (k * u).exp(),
            ReciprocalAffine { a, b } => -b / ((a + b * u) * (a + b * u)),
            Tabulated { points } => slope(points, u),
            Product { factors } => {
                let mut total = 0.0;
                for i in 0..factors.len() {
                    let mut term = factors[i].derivative(u);
                    for (j, f) in factors.iter().enumerate() {
                        if j != i {
                            term *= f.at(u);
                        }
                    }
                    total += term;
                }
                total
            }
        }
    }

    /// Closed-form `∫₀^v f`, when the family has one.
    pub fn antiderivative(&self, v: f64) -> Option<f64> {
        use StateFunction::*;
        Some(match self {
            Constant { c } => c * v,
            Affine { a, b } => a * v + 0.5 * b * v * v,
            PowerShift { alpha, beta, shift } => alpha * v.powf(beta + 1.0) / (beta + 1.0) + shift * v,
            SqrtShift { alpha, beta } => alpha * v + 2.0 * beta * v.sqrt(),
            HyperbolicShift { alpha, beta, sign } => alpha * v + sign.factor() * beta * v.ln_1p(),
            ExpScale { mu, k } => {
                if *k == 0.0 {
                    mu * v
                } else {
                    mu * (k * v).exp_m1() / k
                }
            }
            ReciprocalAffine { a, b } => {
                if *b == 0.0 {
                    v / a
                } else {
                    (b * v / a).ln_1p() / b
                }
            }
            Tabulated { points } => tabulated_integral(points, v),
            Product { .. } => return None,
        })
    }

    /// `k f` for `k > 0`, staying in the same family.
    pub fn scaled(&self, k: f64) -> StateFunction {
        use StateFunction::*;
        match self {
            Constant { c } => Constant { c: k * c },
            Affine { a, b } => Affine { a: k * a, b: k * b },
            PowerShift { alpha, beta, shift } => PowerShift {
                alpha: k * alpha,
                beta: *beta,
                shift: k * shift,
            },
            SqrtShift { alpha, beta } => SqrtShift {
                alpha: k * alpha,
                beta: k * beta,
            },
            HyperbolicShift { alpha, beta, sign } => HyperbolicShift {
                alpha: k * alpha,
                beta: k * beta,
                sign: *sign,
            },
            ExpScale { mu, k: kk } => ExpScale { mu: k * mu, k: *kk },
            ReciprocalAffine { a, b } => ReciprocalAffine { a: a / k, b: b / k },
            Tabulated { points } => Tabulated {
                points: points.iter().map(|p| [p[0], k * p[1]]).collect(),
            },
            Product { factors } => {
                let mut f = factors.clone();
                f[0] = f[0].scaled(k);
                Product { factors: f }
            }
        }
    }

    /// Equivalent representation with degenerate coefficients removed
    /// (for example `Affine(a, 0)` becomes `Constant(a)`).
    pub fn canonical(&self) -> StateFunction {
        use StateFunction::*;
        match self {
            Affine { a, b } if *b == 0.0 => Constant { c: *a },
            PowerShift { alpha, beta, shift } if *beta == 0.0 => Constant { c: alpha + shift },
            PowerShift { alpha, shift, .. } if *alpha == 0.0 => Constant { c: *shift },
            PowerShift { alpha, beta, shift } if *beta == 1.0 => Affine { a: *shift, b: *alpha },
            SqrtShift { alpha, beta } if *beta == 0.0 => Constant { c: *alpha },
            HyperbolicShift { alpha, beta, .. } if *beta == 0.0 => Constant { c: *alpha },
            ExpScale { mu, k } if *k == 0.0 || *mu == 0.0 => Constant { c: *mu },
            ReciprocalAffine { a, b } if *b == 0.0 => Constant { c: 1.0 / a },
            Product { factors } => {
                let parts: Vec<StateFunction> = factors.iter().map(|f| f.canonical()).collect();
                let mut scale = 1.0;
                let mut rest = Vec::new();
                for p in parts {
                    match p {
                        Constant { c } => scale *= c,
                        other => rest.push(other),
                    }
                }
                match rest.len() {
                    0 => Constant { c: scale },
                    1 => rest.pop().expect("one factor").scaled_or_zero(scale),
                    _ => {
                        rest[0] = rest[0].scaled_or_zero(scale);
                        Product { factors: rest }
                    }
                }
            }
            other => other.clone(),
        }
    }

    fn scaled_or_zero(&self, k: f64) -> StateFunction {
        if k == 0.0 {
            StateFunction::Constant { c: 0.0 }
        } else if k == 1.0 {
            self.clone()
        } else {
            self.scaled(k)
        }
    }

    /// `lim_{u→∞} f(u)`, possibly `+∞`.
    pub fn limit_at_infinity(&self) -> f64 {
        use StateFunction::*;
        match self.canonical() {
            Constant { c } => c,
            Affine { b, .. } if b > 0.0 => f64::INFINITY,
            Affine { a, .. } => a,
            PowerShift { .. } => f64::INFINITY,
            SqrtShift { alpha, .. } => alpha,
            HyperbolicShift { alpha, .. } => alpha,
            ExpScale { k, .. } if k > 0.0 => f64::INFINITY,
            ExpScale { .. } => 0.0,
            ReciprocalAffine { .. } => 0.0,
            Tabulated { points } => points[points.len() - 1][1],
            Product { factors } => {
                let lims: Vec<f64> = factors.iter().map(|f| f.limit_at_infinity()).collect();
                let has_inf = lims.iter().any(|l| l.is_infinite());
                let has_zero = lims.contains(&0.0);
                if has_inf && has_zero {
                    // indeterminate form: fall back to a far-field evaluation
                    self.at(1e12)
                } else {
                    lims.iter().product()
                }
            }
        }
    }

    pub fn is_tabulated(&self) -> bool {
        match self {
            StateFunction::Tabulated { .. } => true,
            StateFunction::Product { factors } => factors.iter().any(|f| f.is_tabulated()),
            _ => false,
        }
    }
}

fn interpolate(points: &[[f64; 2]], u: f64) -> f64 {
    let n = points.len();
    if u <= points[0][0] {
        return points[0][1];
    }
    if u >= points[n - 1][0] {
        return points[n - 1][1];
    }
    let i = points.partition_point(|p| p[0] <= u) - 1;
    let [u0, v0] = points[i];
    let [u1, v1] = points[i + 1];
    v0 + (v1 - v0) * (u - u0) / (u1 - u0)
}

fn slope(points: &[[f64; 2]], u: f64) -> f64 {
    let n = points.len();
    if u < points[0][0] || u >= points[n - 1][0] {
        return 0.0;
    }
    let i = points.partition_point(|p| p[0] <= u) - 1;
    (points[i + 1][1] - points[i][1]) / (points[i + 1][0] - points[i][0])
}

fn tabulated_integral(points: &[[f64; 2]], v: f64) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    let first = points[0][0];
    total += points[0][1] * v.min(first);
    if v <= first {
        return total;
    }
    for i in 0..n - 1 {
        let [u0, y0] = points[i];
        let [u1, _] = points[i + 1];
        if v <= u0 {
            break;
        }
        let hi = v.min(u1);
        let yh = interpolate(points, hi);
        total += 0.5 * (y0 + yh) * (hi - u0);
    }
    let last = points[n - 1][0];
    if v > last {
        total += points[n - 1][1] * (v - last);
    }
    total
}

/// The state-dependent dual risk model `dU = -η(U) dt + dJ` with
/// `Exp(γ)` jumps arriving at rate `λ(U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualRiskModel {
    pub eta: StateFunction,
    #[serde(rename = "lambda")]
    pub lam: StateFunction,
    pub gamma: f64,
}

impl DualRiskModel {
    /// Builds and validates a model.
    pub fn new(eta: StateFunction, lam: StateFunction, gamma: f64) -> Result<Self> {
        let m = DualRiskModel { eta, lam, gamma };
        m.validate()?;
        Ok(m)
    }

    /// The classic dual model with constant cost and intensity.
    pub fn classic(eta: f64, lam: f64, gamma: f64) -> Result<Self> {
        Self::new(StateFunction::constant(eta), StateFunction::constant(lam), gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Validation(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.eta.validate("eta")?;
        self.lam.validate("lambda")?;
        if !self.eta.positive_on_open_half_line() {
            return Err(Error::Validation("eta must be positive for every u > 0".into()));
        }
        Ok(())
    }

    /// True when either rate is a tabulated curve, i.e. the model is outside
    /// the continuously-differentiable setting of the analytic results.
    pub fn uses_tabulated(&self) -> bool {
        self.eta.is_tabulated() || self.lam.is_tabulated()
    }

    pub fn hazard(&self) -> HazardProfile {
        HazardProfile::new(self)
    }

    /// `Λ(v) = ∫₀^v λ/η`.
    pub fn cumulative_hazard(&self, v: f64) -> Result<f64> {
        self.hazard().cumulative(v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// How λ/η is represented for integration.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioForm {
    /// λ/η is itself a family with a closed-form antiderivative.
    Family(StateFunction),
    /// `(a + b v) / (c + d v)` with `d > 0`.
    AffineOverAffine { a: f64, b: f64, c: f64, d: f64 },
    /// no closed form; Λ by adaptive quadrature
    Quadrature,
}

/// Behaviour of λ/η at the origin: `ratio ~ C v^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OriginBehaviour {
    Regular,
    /// integrable power singularity, `-1 < power < 0`
    Singular(f64),
    NonIntegrable(f64),
}

/// The ratio λ/η and its cumulative integral Λ.
#[derive(Debug, Clone)]
pub struct HazardProfile {
    eta: StateFunction,
    lam: StateFunction,
    form: RatioForm,
    origin: OriginBehaviour,
}

// sample points used to detect proportional intensity and cost
const PROBE: [f64; 7] = [0.3, 0.9, 1.7, 3.1, 7.3, 19.0, 55.0];

fn proportional(lam: &StateFunction, eta: &StateFunction) -> Option<f64> {
    let k = lam.at(PROBE[0]) / eta.at(PROBE[0]);
    if !k.is_finite() {
        return None;
    }
    let ok = PROBE.iter().all(|&u| {
        let r = lam.at(u) / eta.at(u);
        (r - k).abs() <= 1e-13 * k.abs().max(1e-300)
    });
    ok.then_some(k)
}

fn affine_parts(f: &StateFunction) -> Option<(f64, f64)> {
    match f.canonical() {
        StateFunction::Constant { c } => Some((c, 0.0)),
        StateFunction::Affine { a, b } => Some((a, b)),
        _ => None,
    }
}

impl HazardProfile {
    pub fn new(m: &DualRiskModel) -> Self {
        let eta = m.eta.canonical();
        let lam = m.lam.canonical();
        let form = Self::classify(&eta, &lam);
        let mut p = HazardProfile {
            eta,
            lam,
            form,
            origin: OriginBehaviour::Regular,
        };
        p.origin = p.probe_origin();
        p
    }

    fn classify(eta: &StateFunction, lam: &StateFunction) -> RatioForm {
        use StateFunction::*;
        if let Constant { c } = eta {
            return RatioForm::Family(lam.scaled(1.0 / c).canonical());
        }
        if let ReciprocalAffine { a, b } = eta {
            if let Constant { c } = lam {
                return RatioForm::Family(Affine { a: c * a, b: c * b }.canonical());
            }
        }
        if let Product { factors } = lam {
            for (i, f) in factors.iter().enumerate() {
                if let Some(k) = proportional(f, eta) {
                    let mut rest: Vec<StateFunction> =
                        factors.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.clone()).collect();
                    if rest.is_empty() {
                        return RatioForm::Family(Constant { c: k });
                    }
                    rest[0] = rest[0].scaled(k);
                    let r = Product { factors: rest }.canonical();
                    if r.antiderivative(1.0).is_some() {
                        return RatioForm::Family(r);
                    }
                }
            }
        }
        if !eta.is_tabulated() && !lam.is_tabulated() {
            if let Some(k) = proportional(lam, eta) {
                return RatioForm::Family(Constant { c: k });
            }
        }
        if let (Some((a, b)), Some((c, d))) = (affine_parts(lam), affine_parts(eta)) {
            if d > 0.0 && c > 0.0 {
                return RatioForm::AffineOverAffine { a, b, c, d };
            }
        }
        RatioForm::Quadrature
    }

    fn probe_origin(&self) -> OriginBehaviour {
        let r1 = self.ratio(1e-8);
        let r2 = self.ratio(1e-6);
        if !(r1.is_finite() && r2.is_finite()) || r1 <= 0.0 || r2 <= 0.0 {
            return OriginBehaviour::Regular;
        }
        let p = (r2 / r1).ln() / 100f64.ln();
        if p <= -1.0 + 1e-3 {
            OriginBehaviour::NonIntegrable(p)
        } else if p < -1e-3 {
            // snap to the nearest quarter power for the quadrature substitution
            OriginBehaviour::Singular(((p * 4.0).round() / 4.0).max(-0.75))
        } else {
            OriginBehaviour::Regular
        }
    }

    pub fn form(&self) -> &RatioForm {
        &self.form
    }

    pub fn origin(&self) -> OriginBehaviour {
        self.origin
    }

    /// λ/η as a family when one is available.
    pub fn ratio_family(&self) -> Option<&StateFunction> {
        match &self.form {
            RatioForm::Family(f) => Some(f),
            _ => None,
        }
    }

    /// True when Λ has a closed form.
    pub fn analytic(&self) -> bool {
        !matches!(self.form, RatioForm::Quadrature)
    }

    pub fn eta(&self) -> &StateFunction {
        &self.eta
    }

    pub fn lam(&self) -> &StateFunction {
        &self.lam
    }

    /// `λ(v)/η(v)`.
    pub fn ratio(&self, v: f64) -> f64 {
        match &self.form {
            RatioForm::Family(f) => f.at(v),
            RatioForm::AffineOverAffine { a, b, c, d } => (a + b * v) / (c + d * v),
            RatioForm::Quadrature => self.lam.at(v) / self.eta.at(v),
        }
    }

    /// `d/dv (λ/η)`.
    pub fn ratio_derivative(&self, v: f64) -> f64 {
        match &self.form {
            RatioForm::Family(f) => f.derivative(v),
            RatioForm::AffineOverAffine { a, b, c, d } => (b * c - a * d) / ((c + d * v) * (c + d * v)),
            RatioForm::Quadrature => {
                let e = self.eta.at(v);
                (self.lam.derivative(v) * e - self.lam.at(v) * self.eta.derivative(v)) / (e * e)
            }
        }
    }

    /// `Λ(v) = ∫₀^v λ/η`.
    pub fn cumulative(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::domain(format!("cumulative hazard at negative wealth {v}")));
        }
        if let OriginBehaviour::NonIntegrable(p) = self.origin {
            return Err(Error::Divergence(format!(
                "lambda/eta behaves like v^{p:.3} at 0 and is not integrable"
            )));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        match &self.form {
            RatioForm::Family(f) => Ok(f.antiderivative(v).expect("family forms carry antiderivatives")),
            RatioForm::AffineOverAffine { a, b, c, d } => {
                let k = b / d;
                Ok(k * v + (a - k * c) / d * (d * v / c).ln_1p())
            }
            RatioForm::Quadrature => self.cumulative_quadrature(0.0, v),
        }
    }

    /// `γv - Λ(v)`, grouped so that the linear parts cancel exactly when
    /// λ/η tends to γ (otherwise both terms grow and the difference is lost).
    pub fn exponent(&self, gamma: f64, v: f64) -> Result<f64> {
        use StateFunction::*;
        if !(v > 0.0) || matches!(self.origin, OriginBehaviour::NonIntegrable(_)) {
            return Ok(gamma * v - self.cumulative(v)?);
        }
        // a drift gap at rounding level is treated as zero, as the integrability check does
        let gap = |x: f64| if near(gamma, x) { 0.0 } else { gamma - x };
        Ok(match &self.form {
            RatioForm::Family(Constant { c }) => gap(*c) * v,
            RatioForm::Family(Affine { a, b }) => gap(*a) * v - 0.5 * b * v * v,
            RatioForm::Family(SqrtShift { alpha, beta }) => gap(*alpha) * v - 2.0 * beta * v.sqrt(),
            RatioForm::Family(PowerShift { alpha, beta, shift }) => {
                gap(*shift) * v - alpha * v.powf(beta + 1.0) / (beta + 1.0)
            }
            RatioForm::Family(HyperbolicShift { alpha, beta, sign }) => {
                gap(*alpha) * v - sign.factor() * beta * v.ln_1p()
            }
            RatioForm::AffineOverAffine { a, b, c, d } => {
                let k = b / d;
                gap(k) * v - (a - k * c) / d * (d * v / c).ln_1p()
            }
            _ => gamma * v - self.cumulative(v)?,
        })
    }

    /// `∫_x^y λ/η` by quadrature, using `w = s²` near the origin so that
    /// `1/√w` singularities become smooth.
    pub(crate) fn cumulative_quadrature(&self, x: f64, y: f64) -> Result<f64> {
        let tol = Tolerance::new(1e-15, ANALYTIC_RTOL * 0.01);
        if x == 0.0 {
            let g = |s: f64| 2.0 * s * self.ratio(s * s);
            Ok(integrate_finite(g, 0.0, y.sqrt(), tol)?.value)
        } else {
            let r = |w: f64| self.ratio(w);
            Ok(integrate_finite(r, x, y, tol)?.value)
        }
    }

    /// `lim_{v→∞} λ(v)/η(v)`, possibly infinite.
    pub fn ratio_limit(&self) -> f64 {
        match &self.form {
            RatioForm::Family(f) => f.limit_at_infinity(),
            RatioForm::AffineOverAffine { b, d, .. } => b / d,
            RatioForm::Quadrature => {
                let l = self.lam.limit_at_infinity();
                let e = self.eta.limit_at_infinity();
                if l.is_finite() && e.is_finite() && e > 0.0 {
                    l / e
                } else if l.is_finite() && e.is_infinite() {
                    0.0
                } else if l.is_infinite() && e.is_finite() {
                    f64::INFINITY
                } else {
                    // ∞/∞ or 0/0: far-field evaluation
                    self.ratio(1e12)
                }
            }
        }
    }

    /// Left-endpoint exponent for quadrature of integrands proportional to λ/η.
    pub(crate) fn origin_power(&self) -> f64 {
        match self.origin {
            OriginBehaviour::Singular(p) => p,
            _ => 0.0,
        }
    }
}

/// Outcome of [`integrability_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Integrability {
    pub verdict: Verdict,
    /// Envelope for the ruin integrand `h(v) = (λ/η)(v) e^{γv - Λ(v)}` when integrable.
    pub tail: Option<TailBound>,
    pub diagnostic: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Integrable,
    Divergent,
    Inconclusive,
}

impl Integrability {
    pub fn is_integrable(&self) -> bool {
        self.verdict == Verdict::Integrable
    }

    /// The tail bound, or an error explaining why there is none.
    pub fn require(&self) -> Result<TailBound> {
        match (self.verdict, self.tail) {
            (Verdict::Integrable, Some(t)) => Ok(t),
            (Verdict::Inconclusive, _) => Err(Error::Inconclusive(self.diagnostic.clone())),
            _ => Err(Error::Divergence(self.diagnostic.clone())),
        }
    }
}

/// Decides whether `∫₀^∞ (λ/η) e^{γv - Λ(v)} dv` is finite from the limit of
/// `γ - λ/η` at infinity, with a sub-leading analysis for families whose
/// ratio tends to exactly γ.
pub fn integrability_check(m: &DualRiskModel) -> Integrability {
    let hz = m.hazard();
    integrability_of(&hz, m.gamma)
}

pub(crate) fn integrability_of(hz: &HazardProfile, gamma: f64) -> Integrability {
    if let OriginBehaviour::NonIntegrable(p) = hz.origin() {
        return Integrability {
            verdict: Verdict::Divergent,
            tail: None,
            diagnostic: format!("lambda/eta ~ v^{p:.3} at 0: the cumulative hazard diverges"),
        };
    }
    let limit = hz.ratio_limit();
    let gap = limit - gamma;
    let scale = gamma.max(limit.abs()).max(1.0);
    if gap.is_infinite() || gap > 1e-12 * scale {
        let (rate, need) = if gap.is_infinite() { (1.0, 1.0) } else { (0.5 * gap, 0.5 * gap) };
        let start = exponential_start(hz, gamma, need);
        return Integrability {
            verdict: Verdict::Integrable,
            tail: Some(TailBound::Exponential { rate, start }),
            diagnostic: if gap.is_infinite() {
                "lambda/eta grows without bound: super-exponential tail".into()
            } else {
                format!("gamma - lim lambda/eta = {:.6} < 0: exponential tail", -gap)
            },
        };
    }
    if gap < -1e-12 * scale {
        return Integrability {
            verdict: Verdict::Divergent,
            tail: None,
            diagnostic: format!(
                "gamma - lim lambda/eta = {:.6} > 0: the integrand grows without bound",
                -gap
            ),
        };
    }
    // limit equals gamma: decided by the next term
    if let Some(power) = algebraic_power(hz, gamma) {
        if power > 1.0 {
            return Integrability {
                verdict: Verdict::Integrable,
                tail: Some(TailBound::Algebraic { power, start: 0.0 }),
                diagnostic: format!("lambda/eta -> gamma with integrand ~ (1+v)^-{power:.4}: algebraic tail"),
            };
        }
        return Integrability {
            verdict: Verdict::Divergent,
            tail: None,
            diagnostic: format!("lambda/eta -> gamma with integrand ~ (1+v)^-{power:.4}: not integrable"),
        };
    }
    if let Some(RatioForm::Family(StateFunction::SqrtShift { beta, .. })) = Some(hz.form()) {
        if *beta > 0.0 {
            return Integrability {
                verdict: Verdict::Integrable,
                tail: Some(TailBound::Algebraic { power: 3.0, start: 0.0 }),
                diagnostic: "lambda/eta -> gamma with integrand ~ e^{-2 beta sqrt v}: stretched-exponential tail"
                    .into(),
            };
        }
    }
    if near(gamma, limit) && matches!(hz.ratio_family(), Some(StateFunction::Constant { .. })) {
        return Integrability {
            verdict: Verdict::Divergent,
            tail: None,
            diagnostic: "lambda = gamma eta: the integrand is constant and the integral diverges".into(),
        };
    }
    Integrability {
        verdict: Verdict::Inconclusive,
        tail: None,
        diagnostic: "lim lambda/eta equals gamma and the sub-leading behaviour is not covered".into(),
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

// integrand ~ (1+v)^{-p} when λ/η = γ + p/(1+v) + o(1/v)
fn algebraic_power(hz: &HazardProfile, gamma: f64) -> Option<f64> {
    match hz.form() {
        RatioForm::Family(StateFunction::HyperbolicShift { alpha, beta, sign }) if near(*alpha, gamma) => {
            Some(sign.factor() * beta)
        }
        RatioForm::AffineOverAffine { a, b, c, d } if near(b / d, gamma) => Some((a - gamma * c) / d),
        _ => None,
    }
}

// first point beyond which d/dv ln h = r'/r + γ - r stays below -need
fn exponential_start(hz: &HazardProfile, gamma: f64, need: f64) -> f64 {
    let ok = |v: f64| {
        let r = hz.ratio(v);
        let dr = hz.ratio_derivative(v);
        let dl = if r > 0.0 { dr / r } else { 0.0 };
        dl + gamma - r <= -need
    };
    let mut v = 0.0;
    for k in 0..60 {
        let all = [1.0, 1.3, 1.7, 2.2, 3.0, 4.5, 8.0, 16.0]
            .iter()
            .all(|m| ok(if v == 0.0 { 0.05 * m } else { v * m }));
        if all && (v > 0.0 || ok(1e-6)) {
            return v;
        }
        v = 0.5 * 2f64.powi(k);
    }
    v
}

/// Parses and validates a model-spec JSON document.
pub fn parse_model_spec(text: &str) -> Result<DualRiskModel> {
    let m: DualRiskModel = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    m.validate()?;
    Ok(m)
}
