use dualrisk::sim::*;
use dualrisk::{DualRiskModel, StateFunction};

fn classic() -> DualRiskModel {
    DualRiskModel::classic(1.0, 2.0, 1.0).unwrap()
}

/// Asymptotic Kolmogorov p-value for statistic `d` on `n` points.
fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        p += 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * x * x).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn pure_decay_ruins_on_schedule() {
    let m = DualRiskModel::new(StateFunction::constant(1.0), StateFunction::constant(0.0), 1.0).unwrap();
    let p = simulate_path(&SimConfig::new(m, 2.0, 10.0, 1, 7), 0).unwrap();
    assert_eq!(p.jump_count, 0);
    assert!((p.ruin_time().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(p.events.len(), 1);
}

#[test]
fn proportional_cost_never_reaches_zero() {
    let m = DualRiskModel::new(StateFunction::affine(0.0, 1.0), StateFunction::constant(0.0), 1.0).unwrap();
    let cfg = SimConfig::new(m, 1.0, 5.0, 1, 3).with_observations(vec![1.0, 5.0]);
    let p = simulate_path(&cfg, 0).unwrap();
    assert!(p.events.is_empty());
    assert!(matches!(p.terminal, Terminal::Survived { .. }));
    assert!((p.observations[0] - (-1.0f64).exp()).abs() < 1e-9);
    assert!((p.wealth_end - (-5.0f64).exp()).abs() < 1e-9);
}

#[test]
fn paths_are_reproducible_by_index() {
    let cfg = SimConfig::new(classic(), 1.0, 20.0, 10, 42).with_barrier(3.0);
    for i in [0, 5, 1_000_000] {
        assert_eq!(simulate_path(&cfg, i).unwrap(), simulate_path(&cfg, i).unwrap());
    }
    assert_ne!(simulate_path(&cfg, 0).unwrap(), simulate_path(&cfg, 1).unwrap());
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let cfg = SimConfig::new(classic(), 1.0, 20.0, 30_000, 9);
    let fs = [Functional::RuinIndicator, Functional::RuinTime, Functional::Wealth { t: 0.5 }];
    let one = estimate_many_with(&cfg, &fs, Some(1)).unwrap();
    for w in [4, 16] {
        let many = estimate_many_with(&cfg, &fs, Some(w)).unwrap();
        for (a, b) in one.iter().zip(&many) {
            assert_eq!(a.point.to_bits(), b.point.to_bits());
            assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        }
    }
}

#[test]
fn interarrival_times_are_exponential() {
    // wealth far from zero: jumps arrive as a rate-2 Poisson process
    let cfg = SimConfig::new(classic(), 1e3, 100.0, 20, 0);
    let mut small = 0;
    for seed in 0..20u64 {
        let mut cfg = cfg.clone();
        cfg.master_seed = seed;
        let p = simulate_path(&cfg, 0).unwrap();
        let mut last = 0.0;
        let mut gaps: Vec<f64> = p
            .events
            .iter()
            .map(|e| {
                let g = e.time - last;
                last = e.time;
                g
            })
            .collect();
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len();
        assert!(n > 100);
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let f = 1.0 - (-2.0 * g).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        if ks_pvalue(d, n) < 0.01 {
            small += 1;
        }
    }
    assert!(small <= 1, "{small} of 20 seeds rejected at the 1% level");
}

#[test]
fn jump_sizes_have_rate_gamma() {
    let m = DualRiskModel::classic(1.0, 2.0, 0.5).unwrap();
    let cfg = SimConfig::new(m, 1e6, 2000.0, 1, 11);
    let p = simulate_path(&cfg, 0).unwrap();
    let sizes: Vec<f64> = p
        .events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Jump { size } => Some(size),
            _ => None,
        })
        .collect();
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    // mean 2, sd 2; 4000 draws
    assert!((mean - 2.0).abs() < 4.0 * 2.0 / (sizes.len() as f64).sqrt());
}

#[test]
fn event_invariants_hold() {
    let cfg = SimConfig::new(classic(), 1.0, 30.0, 1, 5).with_barrier(2.5);
    for i in 0..200 {
        let p = simulate_path(&cfg, i).unwrap();
        let mut last = 0.0;
        let mut paid = 0.0;
        for (j, e) in p.events.iter().enumerate() {
            assert!(e.time >= last);
            last = e.time;
            match e.kind {
                EventKind::Jump { size } => {
                    assert!(size > 0.0);
                    assert!(e.wealth_after > 0.0 && e.wealth_after < 2.5);
                }
                EventKind::BarrierHit { overshoot } => {
                    assert!(overshoot >= 0.0);
                    assert_eq!(e.wealth_after, 2.5);
                    paid += overshoot;
                }
                EventKind::Ruin => {
                    assert_eq!(j, p.events.len() - 1);
                    assert_eq!(e.wealth_after, 0.0);
                }
            }
        }
        assert!((paid - p.dividend_total).abs() < 1e-12);
        assert_eq!(p.jump_count as usize, p.events.iter().filter(|e| !matches!(e.kind, EventKind::Ruin)).count());
    }
}

#[test]
fn short_horizons_are_flagged_biased() {
    let cfg = SimConfig::new(classic(), 1.0, 1.0, 20_000, 1);
    let e = estimate(&cfg, &Functional::RuinIndicator).unwrap();
    assert!(e.biased);
    assert!(e.bias_bound.unwrap() > 0.01);
    let long = SimConfig { horizon: 60.0, ..cfg };
    let e = estimate(&long, &Functional::RuinIndicator).unwrap();
    assert!(!e.biased, "bias bound {:?} vs se {}", e.bias_bound, e.std_error);
    assert!(e.agrees_with((-1.0f64).exp(), 3.0, true));
}

#[test]
fn engines_agree_pathwise() {
    let m = DualRiskModel::new(StateFunction::affine(1.0, 0.5), StateFunction::affine(1.0, 0.2), 1.0).unwrap();
    let base = SimConfig::new(m, 1.0, 10.0, 1, 17).with_observations(vec![0.5, 2.0]);
    let inv = base.clone().with_engine(Engine::Inversion);
    let ode = base.with_engine(Engine::Ode);
    for i in 0..100 {
        let a = simulate_path(&inv, i).unwrap();
        let b = simulate_path(&ode, i).unwrap();
        assert_eq!(a.jump_count, b.jump_count, "path {i}");
        match (a.ruin_time(), b.ruin_time()) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-6 * (1.0 + x), "path {i}: {x} vs {y}"),
            (None, None) => assert!((a.wealth_end - b.wealth_end).abs() < 1e-6 * (1.0 + a.wealth_end)),
            other => panic!("path {i} disagrees on ruin: {other:?}"),
        }
        for (x, y) in a.observations.iter().zip(&b.observations) {
            assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SimConfig::new(classic(), 1.0, 0.0, 10, 0),
        SimConfig::new(classic(), 1.0, 1.0, 0, 0),
        SimConfig::new(classic(), 2.0, 1.0, 10, 0).with_barrier(1.0),
        SimConfig::new(classic(), 1.0, 1.0, 10, 0).with_observations(vec![2.0]),
        SimConfig::new(classic(), 1.0, 1.0, 10, 0).with_barrier(3.0).with_wealth_cap(2.0),
    ];
    for cfg in bad {
        assert!(matches!(simulate_path(&cfg, 0), Err(dualrisk::Error::Validation(_))), "{cfg:?}");
    }
}
