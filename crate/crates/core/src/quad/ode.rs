use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-size control for [`solve_ivp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Keep the dense interpolant for every step (otherwise only endpoints).
    pub dense: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 1_000_000,
            dense: true,
        }
    }
}

/// Which zero crossings of an event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

/// Scalar event function `g(t, y)`; a root is reported when `g` changes sign
/// across a step in the requested direction.
pub struct EventSpec<'a> {
    pub function: &'a dyn Fn(f64, &[f64]) -> f64,
    pub direction: Direction,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    pub index: usize,
    pub t: f64,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Step {
    t0: f64,
    h: f64,
    // rows of the Hairer dense-output polynomial, each of length n
    rcont: [Vec<f64>; 5],
}

impl Step {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        for i in 0..out.len() {
            out[i] = r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
    }
}

/// Dense solution of an initial value problem.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t0: f64,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub events: Vec<EventHit>,
    pub terminated_by: Option<usize>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rtol: f64,
    pub atol: f64,
    steps: Vec<Step>,
}

impl OdeSolution {
    /// Interpolated state at `t` within the integrated range.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = if self.t_end >= self.t0 {
            (self.t0, self.t_end)
        } else {
            (self.t_end, self.t0)
        };
        if !(t >= lo && t <= hi) {
            return Err(Error::domain(format!("t = {t} outside solved range [{lo}, {hi}]")));
        }
        if t == self.t_end {
            return Ok(self.y_end.clone());
        }
        if self.steps.is_empty() {
            return Err(Error::domain("dense output was not stored"));
        }
        let forward = self.t_end >= self.t0;
        let idx = self.steps.partition_point(|s| if forward { s.t0 + s.h <= t } else { s.t0 + s.h >= t });
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        let mut out = vec![0.0; self.y_end.len()];
        step.eval(t, &mut out);
        Ok(out)
    }
}

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(x, s)| (x / s) * (x / s)).sum();
    (s / v.len() as f64).sqrt()
}

/// Adaptive Dormand–Prince 5(4) integration of `y' = field(t, y)` from `t0`
/// to `t1` (either direction), with dense output and event location.
pub fn solve_ivp<F>(
    field: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    events: &[EventSpec<'_>],
) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    if n == 0 || !t0.is_finite() || !t1.is_finite() || y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("invalid initial value problem"));
    }
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::domain("ODE tolerances must be positive"));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut sol = OdeSolution {
        t0,
        t_end: t0,
        y_end: y0.to_vec(),
        events: Vec::new(),
        terminated_by: None,
        accepted_steps: 0,
        rejected_steps: 0,
        rtol: opts.rtol,
        atol: opts.atol,
        steps: Vec::new(),
    };
    if t1 == t0 {
        return Ok(sol);
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut scale = vec![0.0; n];
    field(t, &y, &mut k1);

    let span = (t1 - t0).abs();
    let max_step = opts.max_step.min(span);
    let mut h = match opts.initial_step {
        Some(h) => h.abs().min(max_step),
        None => initial_step(&field, t, &y, &k1, dir, opts, &mut ytmp, &mut k2).min(max_step),
    };
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.function)(t, &y)).collect();
    let mut last_rejected = false;

    loop {
        if sol.accepted_steps + sol.rejected_steps >= opts.max_steps {
            return Err(Error::StepUnderflow {
                t,
                message: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-13) {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow {
                t,
                message: "step size fell below roundoff".into(),
            });
        }
        let hs = dir * h;
        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        field(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        field(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        field(t_new, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field(t_new, &ynew, &mut k7);
        for i in 0..n {
            err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            scale[i] = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
        }
        let e = rms_norm(&err, &scale);
        if !e.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            sol.rejected_steps += 1;
            last_rejected = true;
            h *= 0.1;
            continue;
        }
        if e > 1.0 {
            sol.rejected_steps += 1;
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            last_rejected = true;
            continue;
        }

        let mut rcont: [Vec<f64>; 5] = Default::default();
        rcont[0] = y.clone();
        rcont[1] = (0..n).map(|i| ynew[i] - y[i]).collect();
        rcont[2] = (0..n).map(|i| hs * k1[i] - rcont[1][i]).collect();
        rcont[3] = (0..n).map(|i| rcont[1][i] - hs * k7[i] - rcont[2][i]).collect();
        rcont[4] = (0..n)
            .map(|i| hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
            .collect();
        let step = Step {
            t0: t,
            h: t_new - t,
            rcont,
        };
        sol.accepted_steps += 1;

        // event location on the dense interpolant
        let mut terminal: Option<(f64, usize)> = None;
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for (idx, ev) in events.iter().enumerate() {
            let ga = g_prev[idx];
            let gb = (ev.function)(t_new, &ynew);
            let crossed = match ev.direction {
                Direction::Rising => ga < 0.0 && gb >= 0.0,
                Direction::Falling => ga > 0.0 && gb <= 0.0,
                Direction::Either => (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0),
            };
            g_prev[idx] = gb;
            if !crossed {
                continue;
            }
            let te = locate_root(&step, ev.function, t, ga, t_new, gb, n);
            hits.push((te, idx));
            if ev.terminal && terminal.is_none_or(|(tt, _)| dir * (te - tt) < 0.0) {
                terminal = Some((te, idx));
            }
        }
        hits.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));
        let mut ybuf = vec![0.0; n];
        for &(te, idx) in &hits {
            if let Some((tt, _)) = terminal {
                if dir * (te - tt) > 0.0 {
                    continue;
                }
            }
            step.eval(te, &mut ybuf);
            sol.events.push(EventHit {
                index: idx,
                t: te,
                y: ybuf.clone(),
            });
        }
        if let Some((te, idx)) = terminal {
            step.eval(te, &mut ybuf);
            sol.t_end = te;
            sol.y_end = ybuf;
            sol.terminated_by = Some(idx);
            if opts.dense {
                sol.steps.push(step);
            }
            return Ok(sol);
        }
        if opts.dense {
            sol.steps.push(step);
        }

        t = t_new;
        std::mem::swap(&mut y, &mut ynew);
        std::mem::swap(&mut k1, &mut k7);
        if last {
            sol.t_end = t;
            sol.y_end = y;
            return Ok(sol);
        }
        let mut fac = (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(max_step);
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    field: &F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    dir: f64,
    opts: &OdeOptions,
    ytmp: &mut [f64],
    f1: &mut [f64],
) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = rms_norm(y, &scale);
    let d1 = rms_norm(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    for i in 0..y.len() {
        ytmp[i] = y[i] + dir * h0 * f0[i];
    }
    field(t + dir * h0, ytmp, f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_norm(&diff, &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6
    }
}

fn locate_root(
    step: &Step,
    g: &dyn Fn(f64, &[f64]) -> f64,
    mut ta: f64,
    mut ga: f64,
    mut tb: f64,
    gb: f64,
    n: usize,
) -> f64 {
    if gb == 0.0 {
        return tb;
    }
    let mut buf = vec![0.0; n];
    // Illinois-modified regula falsi, falling back to bisection
    let mut gb = gb;
    let mut side = 0i8;
    for _ in 0..200 {
        if (tb - ta).abs() <= 1e-15 * ta.abs().max(tb.abs()).max(1.0) {
            break;
        }
        let mut tm = (ta * gb - tb * ga) / (gb - ga);
        let lo = ta.min(tb);
        let hi = ta.max(tb);
        if !(tm > lo && tm < hi) {
            tm = 0.5 * (ta + tb);
        }
        step.eval(tm, &mut buf);
        let gm = g(tm, &buf);
        if gm == 0.0 {
            return tm;
        }
        if (gm > 0.0) == (ga > 0.0) {
            ta = tm;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            tb = tm;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    tb
}
