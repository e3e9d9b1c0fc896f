use super::gauss_kronrod::{integrate_finite, integrate_finite_with, Endpoints};
use super::{QuadResult, Tolerance};
use crate::error::{Error, Result};

const MAX_EXTENSIONS: usize = 400;

/// Caller-supplied envelope for the integrand beyond `start`.
///
/// * `Exponential`: `|f(w)| <= |f(v)| e^{-rate (w - v)}` for all `w >= v >= start`.
/// * `Algebraic`: `|f(v)|` decays like `(1 + v)^{-power}` with `power > 1`
///   for `v >= start`; the tail is mapped onto a bounded interval instead of
///   being truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    Exponential { rate: f64, start: f64 },
    Algebraic { power: f64, start: f64 },
}

impl TailBound {
    pub fn exponential(rate: f64) -> Self {
        TailBound::Exponential { rate, start: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TailBound::Exponential { rate, start } if rate > 0.0 && rate.is_finite() && start.is_finite() => {
                Ok(())
            }
            TailBound::Algebraic { power, start } if power > 1.0 && start.is_finite() => Ok(()),
            other => Err(Error::Divergence(format!(
                "no valid tail bound ({other:?}); run the integrability check first"
            ))),
        }
    }
}

/// `∫_a^∞ f(v) dv` with the truncation point chosen from the tail envelope so
/// that the neglected mass is below half the target.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tol: impl Into<Tolerance>,
    tail: TailBound,
) -> Result<QuadResult> {
    integrate_semi_infinite_with(f, a, tol, tail, 0.0)
}

/// As [`integrate_semi_infinite`] with a power-law singularity `(v - a)^left_power`
/// at the lower limit.
pub fn integrate_semi_infinite_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tol: impl Into<Tolerance>,
    tail: TailBound,
    left_power: f64,
) -> Result<QuadResult> {
    let tol = tol.into();
    tail.validate()?;
    if !a.is_finite() {
        return Err(Error::domain("lower limit must be finite"));
    }
    let piece_tol = tol.scaled(0.25);
    match tail {
        TailBound::Exponential { rate, start } => {
            let step = 4.0 / rate;
            let mut cut = if start > a { start } else { a + step };
            let mut acc = integrate_finite_with(&f, a, cut, piece_tol, Endpoints::left(left_power))?;
            for _ in 0..MAX_EXTENSIONS {
                let bound = f(cut).abs() / rate;
                if !bound.is_finite() {
                    return Err(Error::Divergence(format!("integrand is not finite at {cut}")));
                }
                if bound <= 0.5 * tol.target(acc.value) {
                    acc.abs_error_estimate += bound;
                    acc.evaluations += 1;
                    return Ok(acc);
                }
                let next = cut + step.max(0.5 * (cut - a));
                // a tail piece is done once accurate relative to itself or to the running total
                let tail_tol = Tolerance::new(piece_tol.target(acc.value), piece_tol.rel);
                acc = acc.add(integrate_finite(&f, cut, next, tail_tol)?);
                cut = next;
            }
            Err(Error::NonConvergence {
                message: "tail bound never dropped below tolerance".into(),
                best_estimate: acc.value,
                abs_error: acc.abs_error_estimate,
            })
        }
        TailBound::Algebraic { power, start } => {
            let cut = start.max(a);
            let head = if cut > a {
                integrate_finite_with(&f, a, cut, piece_tol, Endpoints::left(left_power))?
            } else {
                QuadResult::zero()
            };
            // 1 + v = (1 + cut) t^{-1/(power-1)} maps [cut, ∞) onto (0, 1]
            let base = 1.0 + cut;
            let q = 1.0 / (power - 1.0);
            let mapped = |t: f64| {
                let v = base * t.powf(-q) - 1.0;
                if !v.is_finite() {
                    return 0.0;
                }
                let jac = base * q * t.powf(-q - 1.0);
                let y = f(v) * jac;
                if y.is_finite() {
                    y
                } else {
                    0.0
                }
            };
            let tail_part = integrate_finite(mapped, 0.0, 1.0, piece_tol)?;
            Ok(head.add(tail_part))
        }
    }
}
