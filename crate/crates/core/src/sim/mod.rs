//! Event-driven Monte Carlo for the state-dependent dual risk process.
//!
//! Between jumps the wealth follows `u' = -η(u)`; the next jump arrives when
//! the compensator `∫λ(U_s)ds` accumulates an independent unit exponential.
//! Each path draws from its own ChaCha stream keyed by `(master_seed, path_index)`.

mod engine;
mod estimate;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DualRiskModel;

pub use engine::Engine;
use engine::{Dynamics, SegmentEnd};
pub use estimate::{
    estimate, estimate_auto_horizon, estimate_custom, estimate_many, estimate_many_with, EstimateWithCI, Functional,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: DualRiskModel,
    pub u0: f64,
    pub horizon: f64,
    pub n_paths: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub ruin_level: f64,
    #[serde(default)]
    pub barrier: Option<f64>,
    /// Stop at the first barrier hit instead of paying repeatedly.
    #[serde(default)]
    pub single_dividend: bool,
    /// Paths reaching this wealth stop as escaped.
    #[serde(default)]
    pub wealth_cap: Option<f64>,
    /// Times at which `U_{t∧τ}` is recorded.
    #[serde(default)]
    pub observation_times: Vec<f64>,
    #[serde(default = "yes")]
    pub record_events: bool,
    #[serde(default)]
    pub engine: Engine,
}

fn yes() -> bool {
    true
}

impl SimConfig {
    pub fn new(model: DualRiskModel, u0: f64, horizon: f64, n_paths: u64, master_seed: u64) -> Self {
        SimConfig {
            model,
            u0,
            horizon,
            n_paths,
            master_seed,
            ruin_level: 0.0,
            barrier: None,
            single_dividend: false,
            wealth_cap: None,
            observation_times: Vec::new(),
            record_events: true,
            engine: Engine::Auto,
        }
    }

    pub fn with_barrier(mut self, b: f64) -> Self {
        self.barrier = Some(b);
        self
    }

    pub fn with_wealth_cap(mut self, cap: f64) -> Self {
        self.wealth_cap = Some(cap);
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_observations(mut self, times: Vec<f64>) -> Self {
        self.observation_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if !(self.ruin_level >= 0.0) || !self.ruin_level.is_finite() {
            return bad(format!("ruin_level must be nonnegative, got {}", self.ruin_level));
        }
        if !(self.u0 >= 0.0) || !self.u0.is_finite() {
            return bad(format!("u0 must be nonnegative, got {}", self.u0));
        }
        if let Some(b) = self.barrier {
            if !(b > self.u0) || !b.is_finite() {
                return bad(format!("barrier {b} must exceed u0 = {}", self.u0));
            }
        }
        if let Some(c) = self.wealth_cap {
            if !(c > self.u0) || self.barrier.is_some_and(|b| c <= b) {
                return bad(format!("wealth_cap {c} must exceed u0 and the barrier"));
            }
        }
        if self.observation_times.windows(2).any(|w| !(w[0] <= w[1]))
            || self.observation_times.iter().any(|&t| !(0.0..=self.horizon).contains(&t))
        {
            return bad("observation_times must be sorted and inside [0, horizon]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Jump { size: f64 },
    /// A jump across the barrier; the overshoot is paid out and wealth resets to `b`.
    BarrierHit { overshoot: f64 },
    Ruin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub wealth_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Terminal {
    Ruined { tau: f64 },
    Survived { horizon: f64 },
    /// Reached the wealth cap.
    Escaped { time: f64 },
    /// First barrier hit in single-dividend mode.
    Stopped { time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPath {
    pub events: Vec<Event>,
    pub terminal: Terminal,
    pub wealth_end: f64,
    pub jump_count: u64,
    pub dividend_count: u64,
    pub dividend_total: f64,
    /// `U_{t∧τ}` at the configured observation times; NaN past an escape or stop.
    pub observations: Vec<f64>,
}

impl SimPath {
    pub fn ruin_time(&self) -> Option<f64> {
        match self.terminal {
            Terminal::Ruined { tau } => Some(tau),
            _ => None,
        }
    }

    /// Alive at the end of the simulation window, including escaped paths.
    pub fn unresolved(&self) -> bool {
        matches!(self.terminal, Terminal::Survived { .. } | Terminal::Escaped { .. })
    }
}

pub(crate) fn rng_for(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

/// Simulates path `path_index` of `cfg`.
pub fn simulate_path(cfg: &SimConfig, path_index: u64) -> Result<SimPath> {
    cfg.validate()?;
    let dynamics = Dynamics::new(cfg)?;
    run_path(cfg, &dynamics, path_index)
}

pub(crate) fn run_path(cfg: &SimConfig, dyn_: &Dynamics, path_index: u64) -> Result<SimPath> {
    let wrap = |e: Error| Error::Path { path_index, source: Box::new(e) };
    let mut rng = rng_for(cfg.master_seed, path_index);
    let jumps = Exp::new(cfg.model.gamma).map_err(|e| Error::Validation(format!("gamma: {e}")))?;
    let obs = &cfg.observation_times;
    let mut path = SimPath {
        events: Vec::new(),
        terminal: Terminal::Survived { horizon: cfg.horizon },
        wealth_end: cfg.u0,
        jump_count: 0,
        dividend_count: 0,
        dividend_total: 0.0,
        observations: Vec::with_capacity(obs.len()),
    };
    let (mut t, mut w) = (0.0, cfg.u0);
    if w <= cfg.ruin_level {
        path.terminal = Terminal::Ruined { tau: 0.0 };
        path.observations.resize(obs.len(), w);
        if cfg.record_events {
            path.events.push(Event { time: 0.0, kind: EventKind::Ruin, wealth_after: w });
        }
        return Ok(path);
    }
    loop {
        let e: f64 = Exp1.sample(&mut rng);
        let seg = dyn_.segment(t, w, e, obs, &mut path.observations).map_err(wrap)?;
        match seg {
            SegmentEnd::Horizon { wealth } => {
                path.wealth_end = wealth;
                path.terminal = Terminal::Survived { horizon: cfg.horizon };
                return Ok(path);
            }
            SegmentEnd::Ruin { time } => {
                path.wealth_end = cfg.ruin_level;
                path.terminal = Terminal::Ruined { tau: time };
                path.observations.resize(obs.len(), cfg.ruin_level);
                if cfg.record_events {
                    path.events.push(Event { time, kind: EventKind::Ruin, wealth_after: cfg.ruin_level });
                }
                return Ok(path);
            }
            SegmentEnd::Jump { time, wealth } => {
                let c: f64 = jumps.sample(&mut rng);
                path.jump_count += 1;
                t = time;
                w = wealth + c;
                let mut kind = EventKind::Jump { size: c };
                if let Some(b) = cfg.barrier.filter(|&b| w >= b) {
                    let overshoot = w - b;
                    path.dividend_count += 1;
                    path.dividend_total += overshoot;
                    kind = EventKind::BarrierHit { overshoot };
                    w = b;
                }
                if cfg.record_events {
                    path.events.push(Event { time: t, kind, wealth_after: w });
                }
                let stop = if cfg.single_dividend && matches!(kind, EventKind::BarrierHit { .. }) {
                    Some(Terminal::Stopped { time: t })
                } else if cfg.wealth_cap.is_some_and(|cap| w >= cap) {
                    Some(Terminal::Escaped { time: t })
                } else {
                    None
                };
                if let Some(term) = stop {
                    path.wealth_end = w;
                    path.terminal = term;
                    path.observations.resize(obs.len(), f64::NAN);
                    return Ok(path);
                }
            }
        }
    }
}

/// One row of the path log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathLogRecord {
    pub path_index: u64,
    pub time: f64,
    pub kind: &'static str,
    pub size_or_overshoot: f64,
    pub wealth_after: f64,
}

pub fn path_log_records(path_index: u64, path: &SimPath) -> Vec<PathLogRecord> {
    path.events
        .iter()
        .map(|e| {
            let (kind, size) = match e.kind {
                EventKind::Jump { size } => ("jump", size),
                EventKind::BarrierHit { overshoot } => ("barrier_hit", overshoot),
                EventKind::Ruin => ("ruin", 0.0),
            };
            PathLogRecord { path_index, time: e.time, kind, size_or_overshoot: size, wealth_after: e.wealth_after }
        })
        .collect()
}
