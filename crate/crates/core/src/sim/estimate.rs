use serde::Serialize;

use crate::error::Result;
use crate::model::{integrability_check, DualRiskModel};
use crate::ruin::{catalog_case, ruin_probability, ruin_probability_closed};

use super::engine::Dynamics;
use super::{run_path, SimConfig, SimPath};

/// Paths per reduction block. Fixed so that results do not depend on the
/// number of workers.
const BLOCK: u64 = 4096;

/// Built-in path functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum Functional {
    RuinIndicator,
    /// `e^{-δτ} 1{τ <= horizon}`.
    DiscountedRuin { delta: f64 },
    /// `τ 1{τ <= horizon}`.
    RuinTime,
    /// `1{N >= 1}`.
    AnyDividend,
    DividendCount,
    TotalDividends,
    /// `e^{-θ ΣD}`.
    DividendLaplace { theta: f64 },
    /// `U_{t∧τ}`.
    Wealth { t: f64 },
    WealthSquared { t: f64 },
}

impl Functional {
    fn observation(&self) -> Option<f64> {
        match *self {
            Functional::Wealth { t } | Functional::WealthSquared { t } => Some(t),
            _ => None,
        }
    }

    fn is_ruin_type(&self) -> bool {
        matches!(self, Functional::RuinIndicator | Functional::DiscountedRuin { .. })
    }

    fn value(&self, p: &SimPath, obs_index: Option<usize>) -> f64 {
        match *self {
            Functional::RuinIndicator => p.ruin_time().map_or(0.0, |_| 1.0),
            Functional::DiscountedRuin { delta } => p.ruin_time().map_or(0.0, |tau| (-delta * tau).exp()),
            Functional::RuinTime => p.ruin_time().unwrap_or(0.0),
            Functional::AnyDividend => (p.dividend_count > 0) as u8 as f64,
            Functional::DividendCount => p.dividend_count as f64,
            Functional::TotalDividends => p.dividend_total,
            Functional::DividendLaplace { theta } => (-theta * p.dividend_total).exp(),
            Functional::Wealth { .. } => p.observations[obs_index.expect("observation registered")],
            Functional::WealthSquared { .. } => {
                let w = p.observations[obs_index.expect("observation registered")];
                w * w
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub n_paths: u64,
    pub seed: u64,
    /// Upper bound on the mean contribution of ruin after the horizon.
    pub bias_bound: Option<f64>,
    /// `bias_bound` exceeds a tenth of the standard error.
    pub biased: bool,
    /// Fraction of paths still alive when the simulation stopped.
    pub unresolved_fraction: f64,
}

impl EstimateWithCI {
    fn from_acc(acc: &Acc, seed: u64) -> Self {
        let se = if acc.n > 1 { (acc.m2 / (acc.n - 1) as f64 / acc.n as f64).sqrt() } else { 0.0 };
        EstimateWithCI {
            point: acc.mean,
            std_error: se,
            ci95: (acc.mean - 1.96 * se, acc.mean + 1.96 * se),
            n_paths: acc.n,
            seed,
            bias_bound: None,
            biased: false,
            unresolved_fraction: 0.0,
        }
    }

    /// `|point - truth| <= k·SE`, with the standard error floored by the
    /// binomial value at `truth` for indicator functionals, so that rare
    /// events with no hits in the sample are not judged by a zero SE.
    pub fn agrees_with(&self, truth: f64, k: f64, indicator: bool) -> bool {
        let mut se = self.std_error;
        if indicator && (0.0..=1.0).contains(&truth) {
            se = se.max((truth * (1.0 - truth) / self.n_paths as f64).sqrt());
        }
        (self.point - truth).abs() <= k * se
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Acc, b: Acc) -> Acc {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        let (na, nb, nf) = (a.n as f64, b.n as f64, n as f64);
        Acc { n, mean: a.mean + d * nb / nf, m2: a.m2 + b.m2 + d * d * na * nb / nf }
    }
}

#[cfg(feature = "parallel")]
fn map_ordered<T: Send>(n: usize, workers: Option<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    if workers == Some(1) {
        return (0..n).map(f).collect();
    }
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers.map(|w| rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build()) {
        Some(Ok(pool)) => pool.install(run),
        _ => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_ordered<T: Send>(n: usize, _workers: Option<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Simulates every path and reduces `k` values per path, block by block in
/// path order, then pairwise across blocks.
fn reduce<F>(cfg: &SimConfig, k: usize, workers: Option<usize>, values: F) -> Result<Vec<Acc>>
where
    F: Fn(&SimPath, &mut [f64]) + Sync + Send,
{
    cfg.validate()?;
    let dynamics = Dynamics::new(cfg)?;
    let n_blocks = cfg.n_paths.div_ceil(BLOCK) as usize;
    let blocks = map_ordered(n_blocks, workers, |b| -> Result<Vec<Acc>> {
        let mut acc = vec![Acc::default(); k];
        let mut buf = vec![0.0; k];
        let start = b as u64 * BLOCK;
        for i in start..(start + BLOCK).min(cfg.n_paths) {
            let path = run_path(cfg, &dynamics, i)?;
            values(&path, &mut buf);
            for (a, &x) in acc.iter_mut().zip(&buf) {
                a.push(x);
            }
        }
        Ok(acc)
    });
    let mut level = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| Acc::merge(*x, *y)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    Ok(level.pop().unwrap_or_else(|| vec![Acc::default(); k]))
}

/// Piecewise-constant upper envelope of the ruin probability.
struct PsiBound {
    step: f64,
    values: Vec<f64>,
}

impl PsiBound {
    const POINTS: usize = 512;

    fn certain() -> Self {
        PsiBound { step: f64::INFINITY, values: vec![1.0] }
    }

    fn new(m: &DualRiskModel, u0: f64, workers: Option<usize>) -> Result<Self> {
        if m.eta.evaluate(0.0).is_ok_and(|e| e == 0.0) {
            // no decay at zero wealth: ruin cannot happen
            return Ok(PsiBound { step: f64::INFINITY, values: vec![0.0] });
        }
        if !integrability_check(m).is_integrable() {
            return Ok(Self::certain());
        }
        let closed = catalog_case(m).is_some();
        let psi = |x: f64| -> Result<f64> {
            if closed {
                Ok(ruin_probability_closed(m, x)?.psi)
            } else {
                Ok(ruin_probability(m, x)?.psi)
            }
        };
        let mut top = (2.0 * u0).max(8.0);
        while top < 1e4 && psi(top)? > 1e-17 {
            top *= 2.0;
        }
        let step = top / Self::POINTS as f64;
        let values = map_ordered(Self::POINTS + 1, workers, |i| psi(i as f64 * step))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(PsiBound { step, values })
    }

    fn at(&self, x: f64) -> f64 {
        let i = ((x / self.step).floor() as usize).min(self.values.len() - 1);
        self.values[i]
    }
}

/// Estimates several functionals from one set of paths.
pub fn estimate_many(cfg: &SimConfig, fs: &[Functional]) -> Result<Vec<EstimateWithCI>> {
    estimate_many_with(cfg, fs, None)
}

/// As [`estimate_many`] on `workers` threads (default: all logical cores).
pub fn estimate_many_with(cfg: &SimConfig, fs: &[Functional], workers: Option<usize>) -> Result<Vec<EstimateWithCI>> {
    let mut run_cfg = cfg.clone();
    for t in fs.iter().filter_map(Functional::observation) {
        run_cfg.observation_times.push(t);
    }
    run_cfg.observation_times.sort_by(f64::total_cmp);
    run_cfg.observation_times.dedup();
    let obs_index: Vec<Option<usize>> = fs
        .iter()
        .map(|f| f.observation().map(|t| run_cfg.observation_times.iter().position(|&s| s == t).unwrap()))
        .collect();
    let bias = if !fs.iter().any(Functional::is_ruin_type) || cfg.ruin_level != 0.0 {
        None
    } else if cfg.barrier.is_some() && !cfg.single_dividend {
        // paying out every overshoot keeps wealth below b, so ruin is certain
        Some(PsiBound::certain())
    } else {
        Some(PsiBound::new(&cfg.model, cfg.u0, workers)?)
    };
    let k = fs.len();
    let accs = reduce(&run_cfg, k + 2, workers, |p, out| {
        for (j, f) in fs.iter().enumerate() {
            out[j] = f.value(p, obs_index[j]);
        }
        let alive = p.unresolved();
        out[k] = alive as u8 as f64;
        out[k + 1] = match &bias {
            Some(b) if alive => b.at(p.wealth_end),
            _ => 0.0,
        };
    })?;
    let n = cfg.n_paths as f64;
    Ok(fs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mut e = EstimateWithCI::from_acc(&accs[j], cfg.master_seed);
            e.unresolved_fraction = accs[k].mean;
            if f.is_ruin_type() {
                let scale = match *f {
                    Functional::DiscountedRuin { delta } => (-delta * cfg.horizon).exp(),
                    _ => 1.0,
                };
                e.bias_bound = bias.as_ref().map(|_| accs[k + 1].mean * scale);
                let floor = e.std_error.max(1.0 / n);
                e.biased = e.bias_bound.is_none_or(|b| b > 0.1 * floor);
            }
            e
        })
        .collect())
}

pub fn estimate(cfg: &SimConfig, f: &Functional) -> Result<EstimateWithCI> {
    Ok(estimate_many(cfg, std::slice::from_ref(f))?.remove(0))
}

/// Mean of an arbitrary path functional, bounded over the horizon.
pub fn estimate_custom<F>(cfg: &SimConfig, f: F, workers: Option<usize>) -> Result<EstimateWithCI>
where
    F: Fn(&SimPath) -> f64 + Sync + Send,
{
    let accs = reduce(cfg, 2, workers, |p, out| {
        out[0] = f(p);
        out[1] = p.unresolved() as u8 as f64;
    })?;
    let mut e = EstimateWithCI::from_acc(&accs[0], cfg.master_seed);
    e.unresolved_fraction = accs[1].mean;
    Ok(e)
}

/// Doubles the horizon until no ruin-type estimate is flagged biased, using
/// a pilot run to skip hopeless horizons. Returns the estimates and the
/// horizon used.
pub fn estimate_auto_horizon(
    cfg: &SimConfig,
    fs: &[Functional],
    max_horizon: f64,
    workers: Option<usize>,
) -> Result<(Vec<EstimateWithCI>, f64)> {
    let mut run = cfg.clone();
    let n = cfg.n_paths;
    let pilot_n = n.min(20_000);
    let ratio = (pilot_n as f64 / n as f64).sqrt();
    loop {
        let mut pilot = run.clone();
        pilot.n_paths = pilot_n;
        let est = estimate_many_with(&pilot, fs, workers)?;
        let too_short = est.iter().zip(fs).any(|(e, f)| {
            f.is_ruin_type()
                && e.bias_bound.is_none_or(|b| b > 0.05 * e.std_error.max(1.0 / pilot_n as f64) * ratio)
        });
        if !too_short || run.horizon * 2.0 > max_horizon {
            break;
        }
        run.horizon *= 2.0;
    }
    loop {
        let est = estimate_many_with(&run, fs, workers)?;
        if !est.iter().any(|e| e.biased) || run.horizon * 2.0 > max_horizon {
            return Ok((est, run.horizon));
        }
        run.horizon *= 2.0;
    }
}
