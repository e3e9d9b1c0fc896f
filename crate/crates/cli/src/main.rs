//! `dualrisk`: command-line front end for the dual risk model library.

mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dualrisk::dividend::{dividend_stats, laplace_from, DividendQuery};
use dualrisk::moments::{deterministic_hit_time, mean_wealth, second_moment_wealth, AffineModelSpec};
use dualrisk::ruin::{catalog_case, ruin_probability, ruin_probability_closed};
use dualrisk::ruin_time::{
    expected_ruin_time, laplace_family, ruin_time_laplace, ruin_time_laplace_closed, ExpectedRuinQuery, LaplaceQuery,
};
use dualrisk::sim::{
    estimate_auto_horizon, estimate_many_with, path_log_records, simulate_path, Functional, SimConfig,
};
use dualrisk::{parse_model_spec, tables, DualRiskModel, Error};

use output::{Format, Records, Value};

#[derive(Debug, Parser)]
#[command(name = "dualrisk", version, about = "Ruin, dividend and ruin-time analytics for the state-dependent dual risk model")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format for the data stream.
    #[arg(long, global = true, value_enum, default_value = "human")]
    format: Format,

    /// Worker threads for simulation (default: all logical cores).
    #[arg(long, global = true, env = "DUALRISK_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model spec file (JSON with `eta`, `lambda` and `gamma`).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Closed form when the model matches one, otherwise numerical.
    Auto,
    Closed,
    Numerical,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ruin probability ψ(u).
    Ruin {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        u: f64,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
    /// Barrier dividend statistics.
    Dividend {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        b: f64,
        /// Laplace argument for the total dividends.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Mean and second moment of the wealth (affine η and λ).
    Moments {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        t: f64,
    },
    /// Laplace transform of the ruin time.
    Laplace {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
    /// Expected ruin time (ruin-certain models only).
    RuinTime {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        u: f64,
    },
    /// Monte Carlo estimates.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Dividend barrier.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Time at which to estimate E[U_t] and E[U_t^2].
        #[arg(long)]
        t: Option<f64>,
        /// Paths reaching this wealth stop as escaped.
        #[arg(long)]
        wealth_cap: Option<f64>,
        /// Double the horizon until the ruin estimates are unbiased at this sample size.
        #[arg(long)]
        auto_horizon: bool,
        #[arg(long, default_value_t = 1e5)]
        max_horizon: f64,
        /// Write the events of the first paths to this CSV file.
        #[arg(long)]
        path_log: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        log_paths: u64,
    },
    /// Recompute a reference grid of ruin probabilities.
    Table {
        #[arg(long)]
        id: u8,
    },
}

/// Exit statuses.
const USAGE: u8 = 2;
const MODEL: u8 = 3;
const NUMERICAL: u8 = 4;

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) | Error::NoPattern(_) => USAGE,
            Error::Validation(_) | Error::Parse { .. } | Error::Divergence(_) | Error::Singularity(_) => MODEL,
            Error::NonConvergence { .. } | Error::StepUnderflow { .. } | Error::Inconclusive(_) | Error::Path { .. } => {
                NUMERICAL
            }
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: USAGE, message: message.into() }
}

fn load_model(path: &Path) -> Result<DualRiskModel, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_model_spec(&text).map_err(|e| Failure { code: MODEL, message: format!("{}: {e}", path.display()) })
}

fn check(cond: bool, message: impl FnOnce() -> String) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(usage(message()))
    }
}

fn nonneg(name: &str, x: f64) -> Result<(), Failure> {
    check(x >= 0.0 && x.is_finite(), || format!("--{name} must be a nonnegative number, got {x}"))
}

fn positive(name: &str, x: f64) -> Result<(), Failure> {
    check(x > 0.0 && x.is_finite(), || format!("--{name} must be positive, got {x}"))
}

fn note(msg: &str) {
    eprintln!("dualrisk: {msg}");
}

fn run(cli: Cli) -> Result<Records, Failure> {
    match cli.command {
        Command::Ruin { model, u, method } => {
            nonneg("u", u)?;
            let m = load_model(&model.model)?;
            let r = match method {
                Method::Closed => ruin_probability_closed(&m, u)?,
                Method::Numerical => ruin_probability(&m, u)?,
                Method::Auto if catalog_case(&m).is_some() => ruin_probability_closed(&m, u)?,
                Method::Auto => ruin_probability(&m, u)?,
            };
            let mut out = Records::new(&["u", "psi", "method", "error_estimate"]);
            out.push(vec![u.into(), r.psi.into(), r.method.to_string().into(), r.error_estimate.into()]);
            Ok(out)
        }
        Command::Dividend { model, u, b, theta } => {
            nonneg("u", u)?;
            check(b > u && b.is_finite(), || format!("--b must exceed --u, got b = {b}, u = {u}"))?;
            if let Some(th) = theta {
                nonneg("theta", th)?;
            }
            let m = load_model(&model.model)?;
            let gamma = m.gamma;
            let s = dividend_stats(&DividendQuery::new(m, u, b)?)?;
            let mut out = Records::new(&[
                "u",
                "b",
                "phi_ub",
                "phi_bb",
                "expected_single",
                "expected_count",
                "expected_total",
                "theta",
                "laplace_total",
            ]);
            out.push(vec![
                u.into(),
                b.into(),
                s.phi_ub.into(),
                s.phi_bb.into(),
                s.expected_single.into(),
                s.expected_count.into(),
                s.expected_total.into(),
                theta.into(),
                theta.map(|th| laplace_from(s.phi_ub, s.phi_bb, gamma, th)).into(),
            ]);
            Ok(out)
        }
        Command::Moments { model, u, t } => {
            nonneg("u", u)?;
            nonneg("t", t)?;
            let m = load_model(&model.model)?;
            let spec = AffineModelSpec::from_model(&m)?;
            let t0 = deterministic_hit_time(spec.rho, spec.mu, u)?;
            let mean = mean_wealth(&spec, u, t)?;
            let second = second_moment_wealth(&spec, u, t)?;
            let mut out = Records::new(&["u", "t", "t0", "mean", "second_moment", "variance"]);
            out.push(vec![u.into(), t.into(), t0.into(), mean.into(), second.into(), (second - mean * mean).into()]);
            Ok(out)
        }
        Command::Laplace { model, u, delta, method } => {
            nonneg("u", u)?;
            positive("delta", delta)?;
            let m = load_model(&model.model)?;
            let has_family = laplace_family(&m).is_some();
            let q = LaplaceQuery::new(m, u, delta)?;
            let r = match method {
                Method::Closed => ruin_time_laplace_closed(&q)?,
                Method::Auto if has_family => ruin_time_laplace_closed(&q)?,
                _ => ruin_time_laplace(&q)?,
            };
            if let Some(n) = &r.notice {
                note(n);
            }
            let mut out = Records::new(&["u", "delta", "psi", "method", "error_estimate"]);
            out.push(vec![u.into(), delta.into(), r.psi.into(), r.method.to_string().into(), r.error_estimate.into()]);
            Ok(out)
        }
        Command::RuinTime { model, u } => {
            nonneg("u", u)?;
            let m = load_model(&model.model)?;
            let r = expected_ruin_time(&ExpectedRuinQuery::new(m, u)?)?;
            let mut out = Records::new(&["u", "expected_ruin_time", "g0", "error_estimate"]);
            out.push(vec![u.into(), r.value.into(), r.g0.into(), r.error_estimate.into()]);
            Ok(out)
        }
        Command::Simulate {
            model,
            u,
            horizon,
            paths,
            seed,
            b,
            delta,
            theta,
            t,
            wealth_cap,
            auto_horizon,
            max_horizon,
            path_log,
            log_paths,
        } => {
            nonneg("u", u)?;
            positive("horizon", horizon)?;
            check(paths >= 1, || "--paths must be at least 1".into())?;
            if let Some(b) = b {
                check(b > u, || format!("--b must exceed --u, got b = {b}, u = {u}"))?;
            }
            check(theta.is_none() || b.is_some(), || "--theta needs a barrier --b".into())?;
            if let Some(t) = t {
                check((0.0..=horizon).contains(&t), || format!("--t must lie in [0, horizon], got {t}"))?;
            }
            if let Some(d) = delta {
                positive("delta", d)?;
            }
            if let Some(cap) = wealth_cap {
                check(cap > u && b.is_none_or(|b| cap > b), || format!("--wealth-cap must exceed --u and --b, got {cap}"))?;
            }
            let m = load_model(&model.model)?;
            let mut cfg = SimConfig::new(m, u, horizon, paths, seed);
            cfg.barrier = b;
            cfg.wealth_cap = wealth_cap;
            cfg.record_events = false;
            cfg.validate()?;
            let mut fs = vec![Functional::RuinIndicator, Functional::RuinTime];
            if let Some(delta) = delta {
                fs.push(Functional::DiscountedRuin { delta });
            }
            if b.is_some() {
                fs.extend([Functional::AnyDividend, Functional::DividendCount, Functional::TotalDividends]);
                if let Some(theta) = theta {
                    fs.push(Functional::DividendLaplace { theta });
                }
            }
            if let Some(t) = t {
                fs.extend([Functional::Wealth { t }, Functional::WealthSquared { t }]);
            }
            let (est, used_horizon) = if auto_horizon {
                estimate_auto_horizon(&cfg, &fs, max_horizon, cli.workers)?
            } else {
                (estimate_many_with(&cfg, &fs, cli.workers)?, horizon)
            };
            if let Some(path) = path_log {
                let mut log_cfg = cfg.clone();
                log_cfg.horizon = used_horizon;
                log_cfg.record_events = true;
                let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
                w.write_record(["path_index", "time", "kind", "size_or_overshoot", "wealth_after"])?;
                for i in 0..log_paths.min(paths) {
                    for r in path_log_records(i, &simulate_path(&log_cfg, i)?) {
                        w.serialize(r)?;
                    }
                }
                w.flush()?;
            }
            let mut out = Records::new(&[
                "functional",
                "point",
                "std_error",
                "ci_low",
                "ci_high",
                "n_paths",
                "seed",
                "horizon",
                "bias_bound",
                "biased",
                "unresolved_fraction",
            ]);
            for (f, e) in fs.iter().zip(&est) {
                if e.biased {
                    note(&format!("{}: horizon {used_horizon} may bias the estimate", functional_name(f)));
                }
                out.push(vec![
                    functional_name(f).into(),
                    e.point.into(),
                    e.std_error.into(),
                    e.ci95.0.into(),
                    e.ci95.1.into(),
                    e.n_paths.into(),
                    e.seed.into(),
                    used_horizon.into(),
                    e.bias_bound.into(),
                    e.biased.into(),
                    e.unresolved_fraction.into(),
                ]);
            }
            Ok(out)
        }
        Command::Table { id } => {
            let table = tables::table(id)?;
            let mut out = Records::new(&["beta", "u", "printed", "closed_form", "quadrature"]);
            for c in &table.cells {
                out.push(vec![c.beta.into(), c.u.into(), c.printed.into(), c.closed_form.into(), c.quadrature.into()]);
            }
            Ok(out)
        }
    }
}

fn functional_name(f: &Functional) -> String {
    match f {
        Functional::RuinIndicator => "ruin_probability".into(),
        Functional::DiscountedRuin { delta } => format!("laplace_ruin_time(delta={delta})"),
        Functional::RuinTime => "ruin_time_truncated".into(),
        Functional::AnyDividend => "phi_ub".into(),
        Functional::DividendCount => "expected_count".into(),
        Functional::TotalDividends => "expected_total".into(),
        Functional::DividendLaplace { theta } => format!("laplace_total(theta={theta})"),
        Functional::Wealth { t } => format!("mean_wealth(t={t})"),
        Functional::WealthSquared { t } => format!("second_moment(t={t})"),
    }
}

/// Wide grid for the human view of a table: one row per β, one column per u.
fn write_table_grid(records: &Records, out: &mut dyn Write, with_printed: bool) -> io::Result<()> {
    let mut betas: Vec<f64> = Vec::new();
    for r in &records.rows {
        if let Value::Num(b) = r[0] {
            if !betas.contains(&b) {
                betas.push(b);
            }
        }
    }
    let header: Vec<String> = tables::WEALTH_GRID.iter().map(|u| format!("u={u}")).collect();
    let width = if with_printed { 22 } else { 8 };
    writeln!(out, "{:>8}  {}", "beta", header.iter().map(|h| format!("{h:>width$}")).collect::<Vec<_>>().join("  "))?;
    for b in betas {
        let cells: Vec<String> = records
            .rows
            .iter()
            .filter(|r| r[0] == Value::Num(b))
            .map(|r| match (&r[2], &r[3], &r[4]) {
                (Value::Num(p), Value::Num(c), Value::Num(q)) if with_printed => {
                    format!("{:>width$}", format!("{p:.4}/{c:.4}/{q:.4}"))
                }
                (_, Value::Num(c), _) => format!("{c:>width$.4}"),
                _ => String::new(),
            })
            .collect();
        writeln!(out, "{b:>8.1}  {}", cells.join("  "))?;
    }
    if with_printed {
        writeln!(out, "cells: printed/closed form/quadrature")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let format = cli.format;
    let table_id = match &cli.command {
        Command::Table { id } => Some(*id),
        _ => None,
    };
    match run(cli) {
        Ok(records) => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            let res = match (format, table_id) {
                (Format::Human, Some(id)) => write_table_grid(&records, &mut lock, id == 3),
                _ => output::write(&records, format, &mut lock),
            };
            match res.and_then(|_| lock.flush()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    note(&e.to_string());
                    ExitCode::from(1)
                }
            }
        }
        Err(f) => {
            note(&f.message);
            ExitCode::from(f.code)
        }
    }
}
