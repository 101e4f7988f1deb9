mod common;

use common::random_model;
use privtrade::datasets;
use privtrade::gauss_info::{info_point, mi_private_zero_noise, mi_utility_zero_noise};
use privtrade::greedy::{greedy_optimize, verify_result, Termination};
use privtrade::trace::{write_trace_csv, TRACE_COLUMNS};
use privtrade::{Config, Model, Noise};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_runs(seed: u64, count: usize) -> Vec<(Model, Config)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=5);
            let m = random_model(&mut rng, n);
            let full = mi_utility_zero_noise(&m).unwrap();
            let gamma = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..4.0) };
            let cfg = Config::for_model(&m, rng.random_range(0.0..1.1) * full, gamma);
            (m, cfg)
        })
        .collect()
}

#[test]
fn every_committed_step_replays_and_was_admissible() {
    for (m, cfg) in random_runs(1, 60) {
        let r = greedy_optimize(&m, &cfg).unwrap();
        let i0 = mi_private_zero_noise(&m).unwrap();
        let mut theta = Noise::zeros(m.n());
        for step in &r.trace {
            theta = theta.incremented(step.variable.unwrap(), step.dtheta);
            let p = info_point(&m, &theta).unwrap();
            assert!((p.i_xp_y - step.point.i_xp_y).abs() < 1e-9);
            assert!((p.utility_loss - step.point.utility_loss).abs() < 1e-9);
            assert!(p.utility_loss <= cfg.delta + 1e-9);
            if p.utility_loss >= 1e-12 {
                assert!((i0 - p.i_xp_y) / p.utility_loss >= cfg.gamma - 1e-9);
            }
        }
        for (a, b) in theta.as_slice().iter().zip(r.theta.as_slice()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn trajectory_is_monotone() {
    for (m, cfg) in random_runs(2, 60) {
        let r = greedy_optimize(&m, &cfg).unwrap();
        let mut prev = info_point(&m, &Noise::zeros(m.n())).unwrap();
        for step in &r.trace {
            assert!(step.point.i_xp_y < prev.i_xp_y);
            assert!(step.point.utility_loss >= prev.utility_loss - 1e-12);
            prev = step.point;
        }
    }
}

#[test]
fn stricter_ratio_never_lowers_leakage() {
    for m in [datasets::dataset1(), datasets::dataset2()] {
        let delta = mi_utility_zero_noise(&m).unwrap();
        let base = greedy_optimize(&m, &Config::for_model(&m, delta, 0.0)).unwrap().point.i_xp_y;
        for gamma in [0.5, 1.0, 2.0, 5.0, 20.0] {
            let r = greedy_optimize(&m, &Config::for_model(&m, delta, gamma)).unwrap();
            assert!(r.point.i_xp_y >= base - 1e-9, "gamma {gamma}");
            assert!(verify_result(&m, &Config::for_model(&m, delta, gamma), &r).all_passed());
        }
    }
}

#[test]
fn unattainable_ratio_adds_no_noise() {
    let m = datasets::dataset1();
    let r = greedy_optimize(&m, &Config::for_model(&m, 1.0, 1e9)).unwrap();
    assert!(r.theta.is_zero());
    assert!(r.trace.is_empty());
}

#[test]
fn iteration_cap_is_respected() {
    let m = datasets::dataset2();
    let mut cfg = Config::for_model(&m, 1.0, 0.0);
    cfg.max_iters = 7;
    let r = greedy_optimize(&m, &cfg).unwrap();
    assert_eq!(r.termination, Termination::MaxIters);
    assert!(r.iterations <= 7);
}

#[test]
fn trace_export_has_one_row_per_step() {
    let m = datasets::dataset1();
    let r = greedy_optimize(&m, &Config::for_model(&m, 0.5, 0.0)).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, "greedy", &r.trace).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRACE_COLUMNS.join(","));
    assert_eq!(lines.len(), r.trace.len() + 1);
    assert!(lines[1..].iter().all(|l| l.starts_with("greedy,")));
}
