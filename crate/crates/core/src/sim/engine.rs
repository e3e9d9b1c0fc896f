use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HazardProfile, OriginBehaviour, StateFunction};
use crate::quad::{solve_ivp, Direction, EventSpec, OdeOptions};

use super::SimConfig;

/// How inter-jump segments are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Inversion when closed forms exist, otherwise the ODE engine.
    #[default]
    Auto,
    /// Solve `Λ(w0) - Λ(w*) = E` in the wealth domain, with
    /// `Λ = ∫λ/η` and travel time `∫_{w*}^{w0} 1/η`.
    Inversion,
    /// Integrate `(u, ∫λ)` in time with event detection.
    Ode,
}

pub(crate) enum SegmentEnd {
    Jump { time: f64, wealth: f64 },
    Ruin { time: f64 },
    Horizon { wealth: f64 },
}

pub(crate) struct Dynamics<'a> {
    cfg: &'a SimConfig,
    hz: HazardProfile,
    eta: StateFunction,
    inversion: bool,
    h_level: f64,
    g_level: f64,
}

/// An antiderivative of `1/η`, possibly `-∞` at 0.
fn travel_potential(eta: &StateFunction, w: f64) -> Option<f64> {
    use StateFunction::*;
    Some(match *eta {
        Constant { c } => w / c,
        Affine { a, b: 0.0 } => w / a,
        Affine { a, b } => (a + b * w).ln() / b,
        ReciprocalAffine { a, b } => a * w + 0.5 * b * w * w,
        ExpScale { mu, k: 0.0 } => w / mu,
        ExpScale { mu, k } => -(-k * w).exp() / (mu * k),
        _ => return None,
    })
}

/// Solves `f(x) = target` for increasing `f` on `[lo, hi]`, Newton steps
/// safeguarded by bisection.
fn solve_increasing(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = hi;
    for _ in 0..200 {
        let fx = f(x) - target;
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let step = x - fx / df(x);
        x = if step.is_finite() && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    0.5 * (lo + hi)
}

impl<'a> Dynamics<'a> {
    pub(crate) fn new(cfg: &'a SimConfig) -> Result<Self> {
        let m = &cfg.model;
        let hz = m.hazard();
        let eta = m.eta.canonical();
        let available = hz.analytic()
            && !matches!(hz.origin(), OriginBehaviour::NonIntegrable(_))
            && travel_potential(&eta, 1.0).is_some();
        let inversion = match cfg.engine {
            Engine::Auto => available,
            Engine::Inversion if available => true,
            Engine::Inversion => {
                return Err(Error::domain("inversion engine needs closed-form hazard and travel time"));
            }
            Engine::Ode => false,
        };
        let (h_level, g_level) = if inversion {
            (hz.cumulative(cfg.ruin_level)?, travel_potential(&eta, cfg.ruin_level).unwrap_or(f64::NAN))
        } else {
            (0.0, 0.0)
        };
        Ok(Dynamics { cfg, hz, eta, inversion, h_level, g_level })
    }

    /// Decays from `(t0, w0)` until a jump (compensator reaches `e`), ruin or
    /// the horizon; pushes observed wealth for pending observation times.
    pub(crate) fn segment(&self, t0: f64, w0: f64, e: f64, obs: &[f64], out: &mut Vec<f64>) -> Result<SegmentEnd> {
        if self.inversion {
            self.segment_inversion(t0, w0, e, obs, out)
        } else {
            self.segment_ode(t0, w0, e, obs, out)
        }
    }

    fn hazard(&self, w: f64) -> f64 {
        self.hz.cumulative(w.max(0.0)).unwrap_or(f64::NAN)
    }

    fn potential(&self, w: f64) -> f64 {
        travel_potential(&self.eta, w).unwrap_or(f64::NAN)
    }

    fn wealth_after(&self, w0: f64, g0: f64, elapsed: f64) -> f64 {
        if elapsed <= 0.0 {
            return w0;
        }
        let lo = self.cfg.ruin_level;
        solve_increasing(|w| self.potential(w), |w| 1.0 / self.eta.at(w), g0 - elapsed, lo, w0)
    }

    fn segment_inversion(&self, t0: f64, w0: f64, e: f64, obs: &[f64], out: &mut Vec<f64>) -> Result<SegmentEnd> {
        let horizon = self.cfg.horizon;
        let target = self.hazard(w0) - e;
        let g0 = self.potential(w0);
        let (t_event, jump_wealth) = if target > self.h_level {
            let ws = solve_increasing(|w| self.hazard(w), |w| self.hz.ratio(w), target, self.cfg.ruin_level, w0);
            (t0 + (g0 - self.potential(ws)).max(0.0), Some(ws))
        } else {
            (t0 + (g0 - self.g_level), None)
        };
        if t_event.is_nan() {
            return Err(Error::domain(format!("hazard inversion failed from wealth {w0}")));
        }
        // +∞ when the decay never reaches the ruin level
        if t_event > horizon {
            while out.len() < obs.len() && obs[out.len()] <= horizon {
                let t = obs[out.len()];
                out.push(self.wealth_after(w0, g0, t - t0));
            }
            return Ok(SegmentEnd::Horizon { wealth: self.wealth_after(w0, g0, horizon - t0) });
        }
        while out.len() < obs.len() && obs[out.len()] < t_event {
            let t = obs[out.len()];
            out.push(self.wealth_after(w0, g0, t - t0));
        }
        Ok(match jump_wealth {
            Some(wealth) => SegmentEnd::Jump { time: t_event, wealth },
            None => SegmentEnd::Ruin { time: t_event },
        })
    }

    fn segment_ode(&self, t0: f64, w0: f64, e: f64, obs: &[f64], out: &mut Vec<f64>) -> Result<SegmentEnd> {
        let horizon = self.cfg.horizon;
        if t0 >= horizon {
            while out.len() < obs.len() {
                out.push(w0);
            }
            return Ok(SegmentEnd::Horizon { wealth: w0 });
        }
        let m = &self.cfg.model;
        let level = self.cfg.ruin_level;
        let field = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let u = y[0].max(0.0);
            dy[0] = -m.eta.at(u);
            dy[1] = m.lam.at(u);
        };
        let arrival = move |_t: f64, y: &[f64]| y[1] - e;
        let ruin = move |_t: f64, y: &[f64]| y[0] - level;
        let events = [
            EventSpec { function: &arrival, direction: Direction::Rising, terminal: true },
            EventSpec { function: &ruin, direction: Direction::Falling, terminal: true },
        ];
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, ..OdeOptions::default() };
        let sol = solve_ivp(field, t0, &[w0, 0.0], horizon, &opts, &events)?;
        let t_end = sol.t_end;
        let inclusive = sol.terminated_by.is_none();
        while out.len() < obs.len() {
            let t = obs[out.len()];
            if t > t_end || (!inclusive && t == t_end) {
                break;
            }
            out.push(sol.eval(t)?[0]);
        }
        Ok(match sol.terminated_by {
            Some(0) => SegmentEnd::Jump { time: t_end, wealth: sol.y_end[0].max(level) },
            Some(_) => SegmentEnd::Ruin { time: t_end },
            None => SegmentEnd::Horizon { wealth: sol.y_end[0] },
        })
    }
}
