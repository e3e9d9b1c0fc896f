use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{QuadResult, Tolerance};
use crate::error::{Error, Result};

const MAX_SUBDIVISIONS: usize = 4000;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Power-law behaviour `(x - a)^left` and `(b - x)^right` of an integrand at
/// the ends of a finite interval. Exponents must exceed -1; zero means regular.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Endpoints {
    pub left: f64,
    pub right: f64,
}

impl Endpoints {
    pub fn regular() -> Self {
        Endpoints::default()
    }

    pub fn left(power: f64) -> Self {
        Endpoints {
            left: power,
            right: 0.0,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

// 21-point Kronrod rule with the QUADPACK error rescaling.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
    }
    let mut res_g = 0.0;
    for j in 0..5 {
        let k = 2 * j + 1;
        res_g += WG[j] * (fv1[k] + fv2[k]);
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate_finite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: impl Into<Tolerance>,
) -> Result<QuadResult> {
    adaptive(&f, a, b, tol.into())
}

/// As [`integrate_finite`], removing declared power-law endpoint singularities
/// by the substitution `x = a + L s^(1/(1+p))` (mirrored on the right).
pub fn integrate_finite_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: impl Into<Tolerance>,
    ends: Endpoints,
) -> Result<QuadResult> {
    let tol = tol.into();
    if ends.left <= -1.0 || ends.right <= -1.0 {
        return Err(Error::domain("endpoint exponents must exceed -1"));
    }
    if !(a <= b) {
        return Err(Error::domain(format!("invalid interval [{a}, {b}]")));
    }
    let left = ends.left != 0.0;
    let right = ends.right != 0.0;
    match (left, right) {
        (false, false) => adaptive(&f, a, b, tol),
        (true, false) => left_substituted(&f, a, b, ends.left, tol),
        (false, true) => right_substituted(&f, a, b, ends.right, tol),
        (true, true) => {
            let m = 0.5 * (a + b);
            let lo = left_substituted(&f, a, m, ends.left, tol.scaled(0.5))?;
            let hi = right_substituted(&f, m, b, ends.right, tol.scaled(0.5))?;
            Ok(lo.add(hi))
        }
    }
}

fn left_substituted<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    power: f64,
    tol: Tolerance,
) -> Result<QuadResult> {
    let len = b - a;
    let m = 1.0 / (1.0 + power);
    let g = |s: f64| {
        let x = a + len * s.powf(m);
        f(x) * len * m * s.powf(m - 1.0)
    };
    adaptive(&g, 0.0, 1.0, tol)
}

fn right_substituted<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    power: f64,
    tol: Tolerance,
) -> Result<QuadResult> {
    let len = b - a;
    let m = 1.0 / (1.0 + power);
    let g = |s: f64| {
        let x = b - len * s.powf(m);
        f(x) * len * m * s.powf(m - 1.0)
    };
    adaptive(&g, 0.0, 1.0, tol)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult::zero());
    }
    let evals = Cell::new(0usize);
    let counted = |x: f64| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let (v0, e0) = gk21(&counted, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        error: e0,
    });
    let mut total = v0;
    let mut total_err = e0;
    let mut splits = 0usize;
    loop {
        if !(total.is_finite() && total_err.is_finite()) {
            return Err(Error::NonConvergence {
                message: "integrand is not finite on the interval".into(),
                best_estimate: total,
                abs_error: total_err,
            });
        }
        if total_err <= tol.target(total) {
            break;
        }
        if splits >= MAX_SUBDIVISIONS {
            return Err(Error::NonConvergence {
                message: format!("adaptive quadrature on [{a}, {b}] hit the subdivision limit"),
                best_estimate: total,
                abs_error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            return Err(Error::NonConvergence {
                message: "roundoff prevents further subdivision".into(),
                best_estimate: total,
                abs_error: total_err,
            });
        }
        let (vl, el) = gk21(&counted, worst.a, mid);
        let (vr, er) = gk21(&counted, mid, worst.b);
        total += vl + vr - worst.value;
        total_err += el + er - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
        });
        splits += 1;
        // re-sum periodically so cancellation drift in `total` does not accumulate
        if splits.is_multiple_of(64) {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let total_err: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        abs_error_estimate: total_err,
        evaluations: evals.get(),
    })
}
