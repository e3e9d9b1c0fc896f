use dualrisk::moments::*;
use proptest::prelude::*;

/// RK4 on the moment equations m' = D - k m, s' = αE[c²] + A m - 2k s.
fn ode_oracle(s: &AffineModelSpec, u: f64, t: f64) -> (f64, f64) {
    let k = s.mu - s.beta * s.jump_mean;
    let d = s.alpha * s.jump_mean - s.rho;
    let a = 2.0 * d + s.beta * s.jump_second;
    let f = |y: [f64; 2]| [d - k * y[0], s.alpha * s.jump_second + a * y[0] - 2.0 * k * y[1]];
    let n = 4000;
    let h = t / n as f64;
    let mut y = [u, u * u];
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[0], y[1])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn matches_moment_ode() {
    let s = AffineModelSpec::exponential(1.0, 0.5, 1.0, 0.2, 1.0).unwrap();
    let t0 = deterministic_hit_time(1.0, 0.5, 2.0).unwrap();
    for frac in [0.1, 0.5, 0.9] {
        let t = frac * t0;
        let (m, q) = ode_oracle(&s, 2.0, t);
        assert!(rel(mean_wealth(&s, 2.0, t).unwrap(), m) < 1e-10);
        assert!(rel(second_moment_wealth(&s, 2.0, t).unwrap(), q) < 1e-10);
    }
}

#[test]
fn pure_constant_rates_are_polynomial() {
    // μ = β = 0: U_t = u - ρt + compound Poisson(α) of mean-E[c] jumps
    let s = AffineModelSpec::new(1.0, 0.0, 2.0, 0.0, 0.5, 0.6).unwrap();
    let (u, t) = (3.0, 1.2);
    let m = u + (2.0 * 0.5 - 1.0) * t;
    assert!((mean_wealth(&s, u, t).unwrap() - m).abs() < 1e-14);
    let var = 2.0 * 0.6 * t;
    assert!((variance_wealth(&s, u, t).unwrap() - var).abs() < 1e-12);
}

#[test]
fn continuous_through_zero_decay() {
    // μ close to βE[c] must agree with the limiting polynomial
    let at = |mu: f64| {
        let s = AffineModelSpec::exponential(1.0, mu, 1.0, 0.3, 1.0).unwrap();
        (mean_wealth(&s, 2.0, 0.5).unwrap(), second_moment_wealth(&s, 2.0, 0.5).unwrap())
    };
    let exact = at(0.3);
    for eps in [1e-6, 1e-9, 1e-12] {
        let near = at(0.3 + eps);
        assert!((near.0 - exact.0).abs() < 10.0 * eps + 1e-14);
        assert!((near.1 - exact.1).abs() < 100.0 * eps + 1e-13);
    }
}

#[test]
fn rejects_times_at_or_after_hit_time() {
    let s = AffineModelSpec::exponential(1.0, 0.5, 1.0, 0.2, 1.0).unwrap();
    let t0 = deterministic_hit_time(1.0, 0.5, 1.0).unwrap();
    assert!(mean_wealth(&s, 1.0, t0).is_err());
    assert!(second_moment_wealth(&s, 1.0, 2.0 * t0).is_err());
    assert!(AffineModelSpec::new(1.0, 0.5, 1.0, 0.2, 1.0, 0.5).is_err());
}

#[test]
fn printed_formula_does_not_solve_the_equation() {
    let s = AffineModelSpec::exponential(1.0, 0.5, 1.0, 0.2, 1.0).unwrap();
    let t = 0.5 * deterministic_hit_time(1.0, 0.5, 1.0).unwrap();
    let (_, q) = ode_oracle(&s, 1.0, t);
    assert!(rel(second_moment_printed(&s, 1.0, t), q) > 1e-3);
    // already wrong at t = 0, where it returns u instead of u²
    assert!((second_moment_printed(&s, 2.0, 0.0) - 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn variance_nonnegative(rho in 0.1f64..3.0, mu in 0.0f64..2.0, alpha in 0.0f64..3.0, beta in 0.0f64..2.0,
                            gamma in 0.3f64..3.0, u in 0.0f64..5.0, frac in 0.0f64..0.999) {
        let s = AffineModelSpec::exponential(rho, mu, alpha, beta, gamma).unwrap();
        let t = frac * deterministic_hit_time(rho, mu, u).unwrap();
        prop_assume!(t < deterministic_hit_time(rho, mu, u).unwrap());
        let m = mean_wealth(&s, u, t).unwrap();
        let q = second_moment_wealth(&s, u, t).unwrap();
        prop_assert!(q - m * m >= -1e-10 * q.abs().max(1.0));
    }

    #[test]
    fn agrees_with_ode_oracle(rho in 0.1f64..3.0, mu in 0.0f64..2.0, alpha in 0.0f64..3.0, beta in 0.0f64..2.0,
                              gamma in 0.3f64..3.0, u in 0.1f64..5.0, frac in 0.01f64..0.99) {
        let s = AffineModelSpec::exponential(rho, mu, alpha, beta, gamma).unwrap();
        let t = frac * deterministic_hit_time(rho, mu, u).unwrap();
        let (m, q) = ode_oracle(&s, u, t);
        prop_assert!((mean_wealth(&s, u, t).unwrap() - m).abs() < 1e-9 * (1.0 + m.abs()));
        prop_assert!((second_moment_wealth(&s, u, t).unwrap() - q).abs() < 1e-9 * (1.0 + q.abs()));
    }
}
