use dualrisk::model::{integrability_check, Sign, Verdict};
use dualrisk::ruin::*;
use dualrisk::{DualRiskModel, StateFunction};
use proptest::prelude::*;

/// ψ(u) = ∫_u^∞ h / ∫_0^∞ h with h = r e^{γv - Λ}, by Simpson on a truncated range.
fn psi_oracle(ratio: impl Fn(f64) -> f64, big_lambda: impl Fn(f64) -> f64, gamma: f64, u: f64, vmax: f64) -> f64 {
    let h = |v: f64| ratio(v) * (gamma * v - big_lambda(v)).exp();
    let simpson = |a: f64, b: f64| {
        let n = 20_000;
        let dx = (b - a) / n as f64;
        let mut s = h(a) + h(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * h(a + i as f64 * dx);
        }
        s * dx / 3.0
    };
    let tail = simpson(u, vmax);
    tail / (simpson(0.0, u) + tail)
}

fn model(eta: f64, ratio: StateFunction, gamma: f64) -> DualRiskModel {
    DualRiskModel::new(StateFunction::constant(eta), ratio.scaled(eta), gamma).unwrap()
}

#[test]
fn classic_values() {
    let m = DualRiskModel::classic(1.0, 2.0, 1.0).unwrap();
    for u in [0.5, 1.0, 3.0] {
        let q = ruin_probability(&m, u).unwrap().psi;
        assert!((q - (-u).exp()).abs() < 1e-12);
    }
    assert_eq!(ruin_probability(&m, 0.0).unwrap().psi, 1.0);
}

#[test]
fn affine_ratio_against_oracle() {
    let (a, b, g) = (0.5, 0.8, 1.0);
    let m = model(1.0, StateFunction::affine(a, b), g);
    for u in [0.3, 1.0, 2.5] {
        let oracle = psi_oracle(|v| a + b * v, |v| a * v + 0.5 * b * v * v, g, u, 20.0);
        let c = ruin_probability_closed(&m, u).unwrap().psi;
        assert!((c - oracle).abs() < 1e-9, "u = {u}: {c} vs {oracle}");
    }
}

#[test]
fn hyperbolic_plus_against_oracle() {
    // λ/η = γ + β/(1+u): h = (γ + β/(1+v)) (1+v)^{-β}, slow algebraic tail
    let (beta, g): (f64, f64) = (4.0, 1.0);
    let m = model(1.0, StateFunction::HyperbolicShift { alpha: g, beta, sign: Sign::Plus }, g);
    for u in [0.5, 2.0] {
        let closed = ruin_probability_closed(&m, u).unwrap().psi;
        // exact: ∫_u^∞ h = γ(1+u)^{1-β}/(β-1) + (1+u)^{-β}
        let tail = |x: f64| g * (1.0 + x).powf(1.0 - beta) / (beta - 1.0) + (1.0 + x).powf(-beta);
        assert!((closed - tail(u) / tail(0.0)).abs() < 1e-14);
        let quad = ruin_probability(&m, u).unwrap().psi;
        assert!((closed - quad).abs() < 1e-8);
    }
}

#[test]
fn divergent_models_are_rejected() {
    let m = DualRiskModel::classic(1.0, 0.5, 1.0).unwrap();
    assert_eq!(integrability_check(&m).verdict, Verdict::Divergent);
    assert!(matches!(ruin_probability(&m, 1.0), Err(dualrisk::Error::Divergence(_))));
}

#[test]
fn zero_cost_at_origin_is_refused() {
    // η(u) = u: wealth never reaches zero
    let m = DualRiskModel::new(StateFunction::affine(0.0, 1.0), StateFunction::affine(0.0, 2.0), 1.0).unwrap();
    assert!(matches!(ruin_probability(&m, 1.0), Err(dualrisk::Error::Singularity(_))));
    assert!(matches!(ruin_probability_closed(&m, 1.0), Err(dualrisk::Error::Singularity(_))));
    let cfg = dualrisk::sim::SimConfig::new(m, 1.0, 5.0, 2000, 1);
    let e = dualrisk::sim::estimate(&cfg, &dualrisk::sim::Functional::RuinIndicator).unwrap();
    assert_eq!(e.point, 0.0);
    assert_eq!(e.bias_bound, Some(0.0));
    assert!(!e.biased);
}

#[test]
fn unmatched_model_has_no_closed_form() {
    let m = DualRiskModel::new(StateFunction::constant(1.0), StateFunction::ExpScale { mu: 1.0, k: 0.3 }, 1.0).unwrap();
    assert!(catalog_case(&m).is_none());
    assert!(matches!(ruin_probability_closed(&m, 1.0), Err(dualrisk::Error::NoPattern(_))));
}

#[test]
fn theta_star_for_exponential_and_fixed_jumps() {
    // Exp(1) jumps: root is γ - μ
    let t = solve_theta_star(2.0, |th| 1.0 / (1.0 - th), 1.0).unwrap();
    assert!((t + 1.0).abs() < 1e-10);
    // unit jumps: -θ + μ(e^θ - 1) = 0
    let t = solve_theta_star(3.0, f64::exp, 1.0).unwrap();
    assert!(t < 0.0);
    assert!((-t + 3.0 * t.exp_m1()).abs() < 1e-12);
    assert!(solve_theta_star(0.5, |th| 1.0 / (1.0 - th), 1.0).is_err());
}

fn catalog_member() -> impl Strategy<Value = (StateFunction, f64)> {
    let g = 0.5f64..2.0;
    prop_oneof![
        (0.0f64..2.0, 0.1f64..2.0, g.clone()).prop_map(|(a, b, g)| (StateFunction::affine(a, b), g)),
        (g.clone(), 0.1f64..2.0).prop_map(|(g, d)| (StateFunction::constant(g + d), g)),
        (g.clone(), 0.1f64..2.0, 0.1f64..2.0)
            .prop_map(|(g, d, beta)| (StateFunction::SqrtShift { alpha: g + d, beta }, g)),
        (g.clone(), 0.2f64..2.0, 0.2f64..2.0)
            .prop_map(|(g, alpha, beta)| (StateFunction::PowerShift { alpha, beta, shift: g }, g)),
        (g.clone(), 1.1f64..3.0, 0.1f64..1.5).prop_map(|(g, beta, d)| {
            let alpha = beta.max(g) + d;
            (StateFunction::HyperbolicShift { alpha, beta, sign: Sign::Minus }, g)
        }),
        (g, 1.5f64..6.0).prop_map(|(g, beta)| (StateFunction::HyperbolicShift { alpha: g, beta, sign: Sign::Plus }, g)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_matches_quadrature((ratio, g) in catalog_member(), eta in 0.3f64..3.0, u in 0.0f64..6.0) {
        let m = model(eta, ratio, g);
        prop_assume!(catalog_case(&m).is_some());
        let c = ruin_probability_closed(&m, u).unwrap().psi;
        let q = ruin_probability(&m, u).unwrap();
        prop_assert!((c - q.psi).abs() <= 1e-8, "closed {} quad {}", c, q.psi);
        prop_assert!((c - q.psi).abs() <= q.error_estimate.max(1e-12) * 10.0 + 1e-9);
    }

    #[test]
    fn psi_is_a_decreasing_probability((ratio, g) in catalog_member(), u in 0.0f64..8.0, du in 0.01f64..2.0) {
        let m = model(1.0, ratio, g);
        let a = ruin_probability(&m, u).unwrap().psi;
        let b = ruin_probability(&m, u + du).unwrap().psi;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(b <= a + 1e-12);
    }
}
