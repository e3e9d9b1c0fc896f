use dualrisk::quad::*;
use proptest::prelude::*;

/// Reported error bounds must cover the true error, up to rounding in the sum.
fn honest(r: &QuadResult, truth: f64) -> bool {
    (r.value - truth).abs() <= r.abs_error_estimate + 8.0 * f64::EPSILON * truth.abs()
}

#[test]
fn endpoint_singularity() {
    // ∫₀¹ x^{-1/2} cos x dx, oracle from the series Σ (-1)^k / ((2k)! (2k + 1/2))
    let mut truth = 0.0;
    let mut fact = 1.0;
    for k in 0..20 {
        if k > 0 {
            fact *= (2 * k - 1) as f64 * (2 * k) as f64;
        }
        truth += (-1.0f64).powi(k) / (fact * (2.0 * k as f64 + 0.5));
    }
    let r = integrate_finite_with(|x: f64| x.powf(-0.5) * x.cos(), 0.0, 1.0, Tolerance::rel(1e-12), Endpoints::left(-0.5))
        .unwrap();
    assert!((r.value - truth).abs() < 1e-11);
    assert!(honest(&r, truth));
}

#[test]
fn algebraic_tail_rejects_nonintegrable_power() {
    let r = integrate_semi_infinite(|v: f64| 1.0 / (1.0 + v), 0.0, Tolerance::default(), TailBound::Algebraic {
        power: 1.0,
        start: 0.0,
    });
    assert!(matches!(r, Err(dualrisk::Error::Divergence(_))));
}

#[test]
fn double_integral_mean_identity() {
    // ∫ γe^{-γc} ∫₀^{b+c} 1 dv dc = b + 1/γ
    for (b, g) in [(0.0, 1.0), (2.0, 0.5), (1.5, 3.0)] {
        let inner = if b == 0.0 { InnerLimit::Identity } else { InnerLimit::Shifted(b) };
        let r = integrate_exp_weighted_double(|_| 1.0, g, inner, Tolerance::default(), 0.0).unwrap();
        assert!((r.value - (b + 1.0 / g)).abs() < 1e-9, "b = {b}, gamma = {g}");
    }
}

#[test]
fn ode_event_on_decay() {
    let field = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
    let half = |_t: f64, y: &[f64]| y[0] - 0.5;
    let ev = [EventSpec { function: &half, direction: Direction::Falling, terminal: true }];
    let sol = solve_ivp(field, 0.0, &[1.0], 10.0, &OdeOptions::default(), &ev).unwrap();
    assert_eq!(sol.terminated_by, Some(0));
    assert!((sol.t_end - std::f64::consts::LN_2).abs() < 1e-9);
    assert!((sol.eval(0.3).unwrap()[0] - (-0.3f64).exp()).abs() < 1e-8);
}

proptest! {
    #[test]
    fn finite_power_integrals_are_honest(p in -0.9f64..4.0, b in 0.1f64..5.0) {
        let truth = b.powf(p + 1.0) / (p + 1.0);
        let ends = if p < 0.0 { Endpoints::left(p) } else { Endpoints::regular() };
        let r = integrate_finite_with(|x: f64| x.powf(p), 0.0, b, Tolerance::rel(1e-10), ends).unwrap();
        prop_assert!(honest(&r, truth), "value {} truth {} est {}", r.value, truth, r.abs_error_estimate);
        prop_assert!((r.value - truth).abs() <= 1e-9 * truth.abs());
    }

    #[test]
    fn gamma_kernel_is_honest(n in 0u32..6, k in 0.2f64..4.0) {
        // ∫₀^∞ x^n e^{-kx} dx = n!/k^{n+1}; log-derivative below -k/2 past 2n/k
        let fact: f64 = (1..=n).map(f64::from).product();
        let truth = fact / k.powi(n as i32 + 1);
        let tail = TailBound::Exponential { rate: 0.5 * k, start: 2.0 * f64::from(n) / k };
        let r = integrate_semi_infinite(|x: f64| x.powi(n as i32) * (-k * x).exp(), 0.0, Tolerance::rel(1e-10), tail).unwrap();
        prop_assert!(honest(&r, truth), "value {} truth {} est {}", r.value, truth, r.abs_error_estimate);
        prop_assert!((r.value - truth).abs() <= 1e-9 * truth);
    }

    #[test]
    fn algebraic_tails_are_honest(p in 1.3f64..6.0) {
        let truth = 1.0 / (p - 1.0);
        let r = integrate_semi_infinite(|v: f64| (1.0 + v).powf(-p), 0.0, Tolerance::rel(1e-10), TailBound::Algebraic { power: p, start: 0.0 }).unwrap();
        prop_assert!(honest(&r, truth), "value {} truth {} est {}", r.value, truth, r.abs_error_estimate);
    }

    #[test]
    fn ode_matches_exact_solution(k in -2.0f64..2.0, t1 in 0.1f64..5.0) {
        // y' = k y + cos t, y(0) = 0
        let field = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = k * y[0] + t.cos();
        let d = 1.0 + k * k;
        let exact = |t: f64| (k * (k * t).exp() - k * t.cos() + t.sin()) / d;
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, ..OdeOptions::default() };
        let sol = solve_ivp(field, 0.0, &[0.0], t1, &opts, &[]).unwrap();
        let scale = 1.0 + exact(t1).abs();
        prop_assert!((sol.y_end[0] - exact(t1)).abs() < 1e-7 * scale);
        let mid = 0.37 * t1;
        prop_assert!((sol.eval(mid).unwrap()[0] - exact(mid)).abs() < 1e-7 * scale);
    }

    #[test]
    fn antiderivative_matches_closed_form(x in 0.0f64..40.0) {
        let anti = AccumulatingAntiderivative::new(|v: f64| (-0.3 * v).exp() * (1.0 + v.sin()), 0.25, Tolerance::rel(1e-12));
        // ∫ e^{-cv}(1 + sin v) = (1 - e^{-cx})/c + (1 - e^{-cx}(c sin x + cos x))/(1 + c²)
        let c: f64 = 0.3;
        let e = (-c * x).exp();
        let truth = (1.0 - e) / c + (1.0 - e * (c * x.sin() + x.cos())) / (1.0 + c * c);
        let (v, err) = anti.eval(x).unwrap();
        prop_assert!((v - truth).abs() <= err + 1e-13 * (1.0 + truth.abs()), "v {} truth {} err {}", v, truth, err);
    }
}
