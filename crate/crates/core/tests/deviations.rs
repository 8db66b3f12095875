mod common;

use mqw_core::deviations::*;
use mqw_core::evolution::DEFAULT_BUDGET;
use mqw_core::model::WalkModel;
use mqw_core::spectral::{averaged_diffusion, DiffusionResult, Spectral};
use proptest::prelude::*;
use std::sync::OnceLock;

fn flip(q: &str) -> (WalkModel, Spectral, DiffusionResult) {
    let w = common::corpus_model(&format!("flip_q{q}")).model.walk().unwrap();
    let spec = Spectral::for_model(&w);
    let res = averaged_diffusion(&spec, &w.drift(), 8).unwrap();
    (w, spec, res)
}

fn flip025() -> &'static (WalkModel, Spectral, DiffusionResult) {
    static F: OnceLock<(WalkModel, Spectral, DiffusionResult)> = OnceLock::new();
    F.get_or_init(|| flip("025"))
}

/// `ln` of the top eigenvalue of the tilted two-state transition matrix of the
/// persistent walk that keeps its direction with probability `q`.
fn persistent_cgf(q: f64, y: f64) -> f64 {
    (q * y.cosh() + (q * q * y.sinh().powi(2) + (1.0 - q).powi(2)).sqrt()).ln()
}

/// `sup_y xy − persistent_cgf(q, y)` by bisection on the derivative.
fn persistent_rate(q: f64, x: f64) -> f64 {
    let deriv = |y: f64| (persistent_cgf(q, y + 1e-6) - persistent_cgf(q, y - 1e-6)) / 2e-6;
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    x * y - persistent_cgf(q, y)
}

#[test]
fn moderate_rate_is_inverse_quadratic() {
    for (q, name) in [(0.25, "025"), (0.5, "050"), (0.75, "075")] {
        let (_, spec, res) = flip(name);
        let dval = q / (1.0 - q);
        let xs: Vec<Vec<f64>> = (-4..=4).map(|i| vec![0.25 * i as f64]).collect();
        let rate = moderate_rate_function(&spec, &res, &xs, 4.0).unwrap();
        for (x, v) in xs.iter().zip(&rate.values) {
            assert!((v - 0.5 * x[0] * x[0] / dval).abs() < 1e-6, "q={q} x={x:?}: {v}");
        }
        let mq = moderate_quadratic(&spec, &res, &[0.7]).unwrap();
        assert_eq!(mq.kind, MaximumKind::Constant);
        assert!((mq.value - 0.5 * 0.49 * dval).abs() < 1e-9);
    }
}

#[test]
fn legendre_twice_recovers_quadratic() {
    let (_, spec, res) = flip025();
    let once = |x: &[f64]| -> mqw_core::error::Result<f64> {
        let f = |y: &[f64]| -> mqw_core::error::Result<f64> { Ok(moderate_quadratic(spec, res, y)?.value) };
        Ok(legendre(&f, x, 4.0)?.value)
    };
    for y in [-0.6, -0.2, 0.1, 0.5] {
        let twice = legendre(&once, &[y], 3.0).unwrap();
        let want = moderate_quadratic(spec, res, &[y]).unwrap().value;
        assert!((twice.value - want).abs() < 1e-5, "y={y}: {} vs {want}", twice.value);
    }
}

#[test]
fn lambda_bar_matches_tilted_chain() {
    let (w, spec, _) = flip025();
    for y in [-1.5, -0.4, 0.3, 1.2] {
        let lb = large_dev_lambda_bar(spec, &w.drift(), &[y], 8).unwrap();
        assert!(lb.valid);
        assert!((lb.value - persistent_cgf(0.25, y)).abs() < 1e-10, "y={y}");
        assert!(lb.value.abs() <= growth_constant(w) * y.abs() + 1e-12);
    }
}

#[test]
fn clt_hessian_matches_covariance() {
    for name in ["025", "050", "075"] {
        let (w, spec, res) = flip(name);
        let h = clt_hessian(&spec, &w.drift(), 8, 1e-3).unwrap();
        assert!((h.matrix[0][0] - res.covariance[0][0]).abs() < 1e-5, "{name}");
    }
    let w = common::corpus_model("swap_markov").model.walk().unwrap();
    let spec = Spectral::for_model(&w);
    let lb = large_dev_lambda_bar(&spec, &w.drift(), &[0.2], 16).unwrap();
    let lm = large_dev_lambda_bar(&spec, &w.drift(), &[-0.2], 16).unwrap();
    assert!((lb.value - lm.value).abs() < 1e-9);
}

#[test]
fn large_rate_matches_persistent_walk() {
    let (w, spec, _) = flip025();
    let xs: Vec<Vec<f64>> = [-0.3, -0.1, 0.0, 0.05, 0.2].iter().map(|&x| vec![x]).collect();
    let rate = large_rate_function(spec, &w.drift(), &xs, 8).unwrap();
    for ((x, v), ok) in xs.iter().zip(&rate.values).zip(&rate.valid) {
        assert!(*ok);
        assert!((v - persistent_rate(0.25, x[0])).abs() < 1e-7, "x={x:?}: {v}");
    }
    let dinv = 3.0;
    for x in [0.02, -0.05] {
        let r = large_rate_function(spec, &w.drift(), &[vec![x]], 8).unwrap().values[0];
        let quad = 0.5 * x * x * dinv;
        assert!((r - quad).abs() / quad < 0.05);
    }
}

#[test]
fn brute_force_cgf_moves_towards_limit() {
    for (name, y) in [("flip_q025", 0.5), ("pauli_xz", 0.25), ("swap_markov", -0.5)] {
        let w = common::corpus_model(name).model.walk().unwrap();
        let spec = Spectral::for_model(&w);
        let lim = large_dev_lambda_bar(&spec, &w.drift(), &[y], 16).unwrap().value;
        let e8 = (scaled_cgf_bruteforce(&w, &[y], 8, DEFAULT_BUDGET).unwrap() - lim).abs();
        let e10 = (scaled_cgf_bruteforce(&w, &[y], 10, DEFAULT_BUDGET).unwrap() - lim).abs();
        assert!(e10 < e8, "{name}: {e8} -> {e10}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rate_is_convex_and_vanishes_at_zero(a in -0.8f64..0.8, b in -0.8f64..0.8) {
        let (_, spec, res) = flip025();
        let xs = vec![vec![a], vec![b], vec![0.5 * (a + b)], vec![0.0]];
        let r = moderate_rate_function(spec, res, &xs, 4.0).unwrap().values;
        prop_assert!(r.iter().all(|v| *v >= -1e-10));
        prop_assert!(r[3].abs() < 1e-8);
        prop_assert!(r[2] <= 0.5 * (r[0] + r[1]) + 1e-8);
    }
}
