mod common;

use mqw_core::config::LoadedModel;
use mqw_core::evolution::{distribution_for_path, sample_markov_path, DEFAULT_BUDGET};
use mqw_core::linalg::{c, C64};
use mqw_core::permutation::*;
use mqw_core::spectral::{averaged_diffusion, Spectral};
use mqw_core::transfer::{averaged_characteristic_fk, min_grid_size};
use proptest::prelude::*;

fn pmodel(name: &str) -> PermutationModel {
    match common::corpus_model(name).model {
        LoadedModel::Permutation(pm) => pm,
        other => panic!("{name} loaded as {}", other.kind()),
    }
}

const NAMES: [&str; 4] = ["flip_q025", "flip_markov", "permutation_2d", "flip_q075"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn evolution_is_a_pushforward(idx in 0usize..4, seed in any::<u64>(), n in 1usize..14) {
        let pm = pmodel(NAMES[idx]);
        let path = sample_markov_path(&pm.base.coins, n, seed);
        let quantum = distribution_for_path(&pm.base, &path, n).unwrap();
        let classical = pushforward_distribution(&pm, &path, n);
        prop_assert!(quantum.max_abs_diff(&classical) < 1e-12);
    }
}

fn path_law_characteristic(pm: &PermutationModel, n: usize, y: &[f64]) -> C64 {
    let law = path_law_bruteforce(pm, n, DEFAULT_BUDGET).unwrap();
    let r = &pm.base.jump.r;
    law.iter()
        .map(|(taus, w)| {
            let phase: f64 = taus[1..]
                .iter()
                .map(|&t| r[t].iter().zip(y).map(|(a, b)| *a as f64 * b).sum::<f64>())
                .sum();
            c(phase.cos(), phase.sin()) * *w
        })
        .sum()
}

#[test]
fn transfer_matrix_reproduces_path_law_and_fk() {
    for name in NAMES {
        let pm = pmodel(name);
        let nm = build_n(&pm);
        let d = pm.base.d();
        for n in [1, 2, 5] {
            for y0 in [0.3, -1.7] {
                let y: Vec<f64> = (0..d).map(|i| y0 * (1.0 + 0.5 * i as f64)).collect();
                let k: Vec<C64> = y.iter().map(|&v| c(v, 0.0)).collect();
                let via_n = characteristic_via_n(&pm, &nm, n, &k);
                let law = path_law_characteristic(&pm, n, &y);
                let fk = averaged_characteristic_fk(&pm.base, n, &k, min_grid_size(&pm.base, n)).unwrap();
                assert!((via_n - law).norm() < 1e-12, "{name} n={n}");
                assert!((fk - law).norm() < 1e-10, "{name} n={n}");
            }
        }
    }
}

#[test]
fn n_matrix_gap_and_projector() {
    for name in NAMES {
        let nm = build_n(&pmodel(name));
        let rep = check_assumption_s_tilde(&nm).unwrap();
        assert!(rep.passed, "{name}");
        assert!(rep.projector_residual < 1e-10 && rep.fixed_vector_residual < 1e-12, "{name}");
        assert!(rep.weighted_norm <= 1.0 + 1e-10, "{name}");
    }
    let rep = check_assumption_s_tilde(&build_n(&pmodel("identity_det"))).unwrap();
    assert!(!rep.passed);
}

#[test]
fn covariance_routes_agree() {
    for (name, q) in [("flip_q025", 0.25), ("flip_q050", 0.5), ("flip_q075", 0.75)] {
        let pm = pmodel(name);
        let want = q / (1.0 - q);
        let s = sigma_covariance(&pm).unwrap();
        let iid = iid_sigma_covariance(&pm).unwrap();
        assert!((s.sigma[0][0] - want).abs() < 1e-8, "{name}");
        assert!((iid[0][0] - want).abs() < 1e-8, "{name}");
        assert!((s.fd_hessian[0][0] - want).abs() < 1e-6, "{name}");
    }
    for name in ["flip_markov", "permutation_2d"] {
        let pm = pmodel(name);
        let s = sigma_covariance(&pm).unwrap();
        let spec = Spectral::for_model(&pm.base);
        let res = averaged_diffusion(&spec, &pm.base.drift(), 4).unwrap();
        let d = pm.base.d();
        for i in 0..d {
            for j in 0..d {
                assert!((s.sigma[i][j] - res.covariance[i][j]).abs() < 1e-8, "{name}");
                assert!((s.sigma[i][j] - s.fd_hessian[i][j]).abs() < 1e-6, "{name}");
            }
        }
        assert!(iid_sigma_covariance(&pm).is_err());
    }
}

#[test]
fn iid_permutation_law_in_two_dimensions() {
    // Uniform i.i.d. choice among the identity, a 4-cycle and a pair swap.
    let base = pmodel("permutation_2d").base;
    let coins = mqw_core::model::CoinEnsemble::iid(base.coins.coins.clone(), vec![1.0 / 3.0; 3]).unwrap();
    let m = mqw_core::model::WalkModel::new(base.jump.clone(), coins, base.repr.clone(), base.initial.clone()).unwrap();
    let pm = PermutationModel::new(m).unwrap();
    let a = sigma_covariance(&pm).unwrap().sigma;
    let b = iid_sigma_covariance(&pm).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((a[i][j] - b[i][j]).abs() < 1e-8);
        }
    }
}

#[test]
fn monte_carlo_flip_variance() {
    let pm = pmodel("flip_q050");
    let sigma = sigma_covariance(&pm).unwrap().sigma;
    let trials = 2000;
    let emp = empirical_random_diffusion(&pm, &sigma, 512, trials, 11).unwrap();
    assert!((emp.covariance[0][0] - 1.0).abs() < 5.0 / (trials as f64).sqrt());
    let again = empirical_random_diffusion(&pm, &sigma, 512, trials, 11).unwrap();
    assert_eq!(emp.covariance, again.covariance);
}
