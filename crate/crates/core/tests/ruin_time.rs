use dualrisk::ruin::ruin_probability;
use dualrisk::ruin_time::*;
use dualrisk::{DualRiskModel, StateFunction};
use proptest::prelude::*;

fn laplace(m: &DualRiskModel, u: f64, delta: f64) -> f64 {
    ruin_time_laplace(&LaplaceQuery::new(m.clone(), u, delta).unwrap()).unwrap().psi
}

// constant rates: ψ(u, δ) = e^{ru} with r the negative root of
// ηr² + (λ - ηγ + δ)r - δγ = 0
fn constant_rate_oracle(eta: f64, lam: f64, g: f64, delta: f64, u: f64) -> f64 {
    let b = lam - eta * g + delta;
    let r = (-b - (b * b + 4.0 * eta * delta * g).sqrt()) / (2.0 * eta);
    (r * u).exp()
}

/// Residual of the generator equation `-ηf' + λ(I - f) = δf`, `I(u) = E f(u + C)`,
/// after eliminating `I` through `I' = γ(I - f)`; relative to its largest term.
fn generator_residual(m: &DualRiskModel, delta: f64, f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = 1e-3;
    let d1 = |g: &dyn Fn(f64) -> f64| (g(u - 2.0 * h) - 8.0 * g(u - h) + 8.0 * g(u + h) - g(u + 2.0 * h)) / (12.0 * h);
    let y = [f(u - 2.0 * h), f(u - h), f(u), f(u + h), f(u + 2.0 * h)];
    let fp = (y[0] - 8.0 * y[1] + 8.0 * y[3] - y[4]) / (12.0 * h);
    let fpp = (-y[0] + 16.0 * y[1] - 30.0 * y[2] + 16.0 * y[3] - y[4]) / (12.0 * h * h);
    let eta = |v: f64| m.eta.evaluate(v).unwrap();
    let lam = |v: f64| m.lam.evaluate(v).unwrap();
    let (e, l) = (eta(u), lam(u));
    let (de, dl) = (d1(&eta), d1(&lam));
    let g = m.gamma;
    // I = (ηf' + (λ+δ)f)/λ
    let i = (e * fp + (l + delta) * y[2]) / l;
    let num = e * fpp + de * fp + (l + delta) * fp + dl * y[2];
    let di = num / l - dl * i / l;
    let residual = di - g * (i - y[2]);
    let scale = (e * fpp).abs() / l + (de * fp).abs() / l + ((l + delta) * fp).abs() / l + g * i.abs() + g * y[2].abs();
    residual.abs() / scale
}

fn certain_classic() -> DualRiskModel {
    DualRiskModel::classic(1.0, 0.5, 1.0).unwrap()
}

#[test]
fn shooting_matches_constant_rate_root() {
    for (eta, lam, g) in [(1.0, 0.5, 1.0), (1.0, 2.0, 1.0), (2.0, 3.0, 0.7)] {
        let m = DualRiskModel::classic(eta, lam, g).unwrap();
        for (u, delta) in [(1.0, 0.5), (3.0, 0.1), (0.5, 2.0)] {
            let exact = constant_rate_oracle(eta, lam, g, delta, u);
            assert!((laplace(&m, u, delta) - exact).abs() < 1e-8, "({eta}, {lam}, {g}) at ({u}, {delta})");
        }
    }
}

#[test]
fn small_delta_recovers_certain_ruin() {
    let psi = laplace(&certain_classic(), 1.0, 1e-8);
    assert!((psi - 1.0).abs() < 1e-4);
}

#[test]
fn closed_forms_agree_with_shooting() {
    let models = [
        DualRiskModel::new(StateFunction::affine(1.0, 0.5), StateFunction::constant(0.8), 1.0).unwrap(),
        DualRiskModel::new(StateFunction::affine(0.5, 1.5), StateFunction::constant(2.0), 1.3).unwrap(),
        DualRiskModel::new(StateFunction::constant(1.0), StateFunction::ExpScale { mu: 1.5, k: -1.0 }, 1.0).unwrap(),
        DualRiskModel::new(StateFunction::affine(1.0, 0.4), StateFunction::ExpScale { mu: 0.7, k: -2.0 }, 2.0).unwrap(),
        DualRiskModel::new(StateFunction::constant(2.0), StateFunction::ExpScale { mu: 0.5, k: 0.3 }, 1.0).unwrap(),
    ];
    for m in &models {
        let fam = laplace_family(m).expect("catalog member");
        for (u, delta) in [(0.5, 0.3), (1.0, 0.5), (2.5, 1.5)] {
            let q = LaplaceQuery::new(m.clone(), u, delta).unwrap();
            let c = ruin_time_laplace_closed(&q).unwrap();
            assert_eq!(c.method, LaplaceMethod::ClosedForm(fam));
            assert!(c.notice.is_none());
            let s = ruin_time_laplace(&q).unwrap().psi;
            assert!((c.psi - s).abs() < 1e-8, "{fam:?} at ({u}, {delta}): {} vs {s}", c.psi);
        }
    }
}

#[test]
fn algebraic_tail_shooting_is_honest() {
    // η = 1 + 0.4u, λ = 0.7e^{-2u}: ψ decays like u^{-δ/0.4}; reference values from
    // 30-digit quadrature of the first-order form
    let m = DualRiskModel::new(StateFunction::affine(1.0, 0.4), StateFunction::ExpScale { mu: 0.7, k: -2.0 }, 2.0).unwrap();
    for (u, delta, reference) in [(0.5, 0.3, 0.851_423_051_383_952_7), (1.0, 0.5, 0.626_482_939_522_326_3)] {
        let q = LaplaceQuery::new(m.clone(), u, delta).unwrap();
        let c = ruin_time_laplace_closed(&q).unwrap();
        assert!((c.psi - reference).abs() < 1e-11);
        let s = ruin_time_laplace(&q).unwrap();
        assert!((s.psi - reference).abs() <= s.error_estimate, "{} +- {}", s.psi, s.error_estimate);
    }
}

#[test]
fn closed_forms_solve_the_generator_equation() {
    let models = [
        DualRiskModel::new(StateFunction::affine(1.0, 0.5), StateFunction::constant(0.8), 1.0).unwrap(),
        DualRiskModel::new(StateFunction::constant(1.0), StateFunction::ExpScale { mu: 1.5, k: -1.0 }, 1.0).unwrap(),
        DualRiskModel::new(StateFunction::constant(2.0), StateFunction::ExpScale { mu: 0.5, k: 0.3 }, 1.0).unwrap(),
    ];
    let delta = 0.4;
    for m in &models {
        let f = |u: f64| ruin_time_laplace_closed(&LaplaceQuery::new(m.clone(), u, delta).unwrap()).unwrap().psi;
        for u in [0.5, 1.0, 2.0, 4.0] {
            let r = generator_residual(m, delta, f, u);
            assert!(r < 1e-6, "{:?} at {u}: residual {r}", laplace_family(m));
        }
    }
}

#[test]
fn reciprocal_family_falls_back_with_notice() {
    let eta = StateFunction::ReciprocalAffine { a: 1.0, b: 0.5 };
    let m = DualRiskModel::new(eta.clone(), eta.scaled(1.0), 1.0).unwrap();
    assert_eq!(laplace_family(&m), Some(LaplaceFamily::ReciprocalEta));
    let q = LaplaceQuery::new(m.clone(), 1.0, 0.5).unwrap();
    let r = ruin_time_laplace_closed(&q).unwrap();
    assert_eq!(r.method, LaplaceMethod::Shooting);
    assert!(r.notice.is_some());
    let f = |u: f64| laplace(&m, u, 0.5);
    assert!(generator_residual(&m, 0.5, f, 1.0) < 1e-6);
}

#[test]
fn expected_time_for_constant_rates() {
    let m = certain_classic();
    for u in [1.0, 2.0, 3.0] {
        let e = expected_ruin_time(&ExpectedRuinQuery::new(m.clone(), u).unwrap()).unwrap();
        assert!((e.value - 2.0 * u).abs() < 1e-6 * 2.0 * u);
        assert!((e.g0 - 2.0).abs() < 1e-8);
    }
}

#[test]
fn expected_time_is_laplace_slope() {
    // ruin certain with state-dependent rates
    let m = DualRiskModel::new(StateFunction::affine(1.0, 0.3), StateFunction::ExpScale { mu: 0.6, k: -0.5 }, 1.0).unwrap();
    let u = 1.5;
    let e = expected_ruin_time(&ExpectedRuinQuery::new(m.clone(), u).unwrap()).unwrap().value;
    let h = 1e-4;
    let slope = (laplace(&m, u, h) - laplace(&m, u, 2.0 * h)) / h;
    assert!((slope - e).abs() < 1e-2 * e, "{slope} vs {e}");
}

#[test]
fn certainty_classification() {
    assert!(matches!(ruin_certainty(&certain_classic()), RuinCertainty::NegativeDrift { .. }));
    let safe = DualRiskModel::classic(1.0, 2.0, 1.0).unwrap();
    assert_eq!(ruin_certainty(&safe), RuinCertainty::NotCertain);
    assert!(matches!(ExpectedRuinQuery::new(safe, 1.0), Err(dualrisk::Error::Divergence(_))));
    let edge = DualRiskModel::classic(1.0, 1.0, 1.0).unwrap();
    assert_eq!(ruin_certainty(&edge), RuinCertainty::DivergentIntegral);
    assert!(matches!(ExpectedRuinQuery::new(edge, 1.0), Err(dualrisk::Error::Inconclusive(_))));
}

#[test]
fn rejects_bad_queries() {
    let m = certain_classic();
    assert!(LaplaceQuery::new(m.clone(), 1.0, 0.0).is_err());
    assert!(LaplaceQuery::new(m.clone(), -1.0, 1.0).is_err());
    let tab = DualRiskModel::new(
        StateFunction::constant(1.0),
        StateFunction::Tabulated { points: vec![[0.0, 0.5], [5.0, 0.6]] },
        1.0,
    )
    .unwrap();
    assert!(LaplaceQuery::new(tab, 1.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplace_bounded_and_monotone(lam in 1.2f64..3.0, u in 0.1f64..4.0, delta in 0.01f64..3.0, dd in 0.01f64..1.0) {
        let m = DualRiskModel::new(StateFunction::affine(1.0, 0.3), StateFunction::affine(lam, 0.3 * lam), 1.0).unwrap();
        let a = laplace(&m, u, delta);
        let b = laplace(&m, u, delta + dd);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-10);
        prop_assert!(a <= ruin_probability(&m, u).unwrap().psi + 1e-10);
    }

    #[test]
    fn expected_time_constant_rates(eta in 0.5f64..3.0, frac in 0.05f64..0.9, g in 0.3f64..3.0, u in 0.1f64..5.0) {
        let lam = frac * g * eta;
        let m = DualRiskModel::classic(eta, lam, g).unwrap();
        let e = expected_ruin_time(&ExpectedRuinQuery::new(m, u).unwrap()).unwrap().value;
        let exact = u / (eta - lam / g);
        prop_assert!((e - exact).abs() < 1e-8 * exact);
    }
}
