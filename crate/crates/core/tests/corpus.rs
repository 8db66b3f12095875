mod common;

use mqw_core::config::LoadedModel;
use mqw_core::evolution::{averaged_distribution_bruteforce, DEFAULT_BUDGET};
use mqw_core::linalg::c;
use mqw_core::spectral::{check_assumption_s, Spectral, DELTA_FLOOR};
use mqw_core::transfer::{averaged_characteristic_fk, min_grid_size};
use mqw_core::uncorrelated::tensor_family;

fn spectral_of(model: &LoadedModel) -> Spectral {
    match model {
        LoadedModel::Tensor(tm) => Spectral::for_family(tensor_family(tm)),
        m => Spectral::for_model(&m.walk().unwrap()),
    }
}

#[test]
fn every_file_validates() {
    for (name, cfg) in common::corpus() {
        if let Some(v) = &cfg.validation {
            assert!(v.accepted(), "{name}: {:?}", v.failures());
        }
        assert!(cfg.warnings.is_empty(), "{name}: {:?}", cfg.warnings);
    }
}

#[test]
fn permutation_files_are_detected() {
    for name in ["flip_q025", "flip_markov", "permutation_2d", "identity_det"] {
        assert_eq!(
            common::corpus_model(name).model.kind(),
            "permutation",
            "{name}"
        );
    }
    assert_eq!(
        common::corpus_model("uncorrelated_two_coin").model.kind(),
        "uncorrelated"
    );
    assert_eq!(common::corpus_model("swap_markov").model.kind(), "walk");
}

#[test]
fn gap_verdicts_match_metadata() {
    for (name, cfg) in common::corpus() {
        let rep = check_assumption_s(&spectral_of(&cfg.model), 8, DELTA_FLOOR).unwrap();
        if let Some(want) = cfg.expect.assumption_s {
            assert_eq!(rep.passed, want, "{name}: {:?}", rep.first_failure);
        }
        if cfg.expect.degenerate == Some(true) {
            let why = rep.first_failure.unwrap_or_default();
            assert!(why.contains("degenerate"), "{name}: {why}");
        }
    }
}

#[test]
fn fk_matches_enumeration_on_small_models() {
    let ys = [-2.3, -0.7, 0.0, 0.4, 1.9];
    let mut checked = 0;
    for (name, cfg) in common::corpus() {
        let m = cfg.model.walk().unwrap();
        if m.d() != 1 || m.num_coins() > 3 || m.repr.num_cosets() > 2 {
            continue;
        }
        for n in [1, 3, 5] {
            let dist = averaged_distribution_bruteforce(&m, n, DEFAULT_BUDGET).unwrap();
            for &y in &ys {
                let k = [c(y, 0.0)];
                let fk = averaged_characteristic_fk(&m, n, &k, min_grid_size(&m, n)).unwrap();
                let bf = dist.characteristic(&k);
                assert!((fk - bf).norm() < 1e-10, "{name} n={n} y={y}: {fk} vs {bf}");
            }
        }
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn fk_matches_enumeration_in_two_dimensions() {
    let m = common::corpus_model("grover_dft_2d").model.walk().unwrap();
    let n = 2;
    let dist = averaged_distribution_bruteforce(&m, n, DEFAULT_BUDGET).unwrap();
    for y in [[0.3, -1.1], [2.0, 0.5]] {
        let k = [c(y[0], 0.0), c(y[1], 0.0)];
        let fk = averaged_characteristic_fk(&m, n, &k, min_grid_size(&m, n)).unwrap();
        assert!((fk - dist.characteristic(&k)).norm() < 1e-10);
    }
}
