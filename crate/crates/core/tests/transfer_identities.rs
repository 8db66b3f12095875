mod common;

use mqw_core::linalg::{c, max_abs, max_abs_vec, CVec, C64};
use mqw_core::model::WalkModel;
use mqw_core::transfer::{
    apply_fiber, apply_fiber_adjoint, build_fiber_adjoint, build_fiber_operator, delta_identity,
    fiber_factors, fiber_family, inner, torus_grid, weighted_norm,
};
use proptest::prelude::*;

fn models() -> Vec<(String, WalkModel)> {
    common::corpus()
        .into_iter()
        .map(|(n, cfg)| (n, cfg.model.walk().unwrap()))
        .collect()
}

fn vec_from(seed: &[f64], dim: usize) -> CVec {
    CVec::from_fn(dim, |i, _| {
        c(seed[(2 * i) % seed.len()], seed[(2 * i + 1) % seed.len()])
    })
}

#[test]
fn identity_is_fixed_and_trace_is_preserved() {
    for (name, m) in models() {
        let id = delta_identity(&m);
        let zero = vec![C64::default(); m.d()];
        for t in torus_grid(m.d(), if m.d() == 1 { 32 } else { 6 }) {
            let fwd = apply_fiber(&m, &zero, &t, &id);
            assert!(max_abs_vec(&(&fwd - &id)) < 1e-12, "{name} t={t:?}");
            let back = apply_fiber_adjoint(&m, &zero, &t, &id);
            assert!(max_abs_vec(&(&back - &id)) < 1e-12, "{name} t={t:?}");
        }
    }
}

#[test]
fn factors_compose_to_operator() {
    for (name, m) in models() {
        let k = vec![c(0.37, 0.0); m.d()];
        let t = vec![1.1; m.d()];
        let (s, u, q) = fiber_factors(&m, &k, &t);
        let full = build_fiber_operator(&m, &k, &t).matrix;
        assert!(max_abs(&(s * u * q - full)) < 1e-12, "{name}");
    }
}

#[test]
fn assembled_adjoint_is_weighted_adjoint() {
    for (name, m) in models() {
        let k = vec![c(-0.8, 0.0); m.d()];
        let t = vec![2.6; m.d()];
        let a = build_fiber_operator(&m, &k, &t).matrix;
        let b = build_fiber_adjoint(&m, &k, &t).matrix;
        let w = fiber_family(&m).weights;
        // ⟨φ, Aψ⟩_w = ⟨Bφ, ψ⟩_w for all φ, ψ  ⇔  W A = B* W.
        let n = a.nrows();
        for i in 0..n {
            for j in 0..n {
                let lhs = a[(i, j)] * w[i];
                let rhs = b[(j, i)].conj() * w[j];
                assert!((lhs - rhs).norm() < 1e-12, "{name} ({i},{j})");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjointness_on_random_pairs(
        idx in 0usize..15,
        k in -3.2f64..3.2, t in 0.0f64..6.3,
        a in proptest::collection::vec(-1.0f64..1.0, 8),
        b in proptest::collection::vec(-1.0f64..1.0, 8),
    ) {
        let all = models();
        let (name, m) = &all[idx % all.len()];
        let kk = vec![c(k, 0.0); m.d()];
        let tt = vec![t; m.d()];
        let dim = m.fiber_dim();
        let phi = vec_from(&a, dim);
        let psi = vec_from(&b, dim);
        let lhs = inner(m, &phi, &apply_fiber(m, &kk, &tt, &psi));
        let rhs = inner(m, &apply_fiber_adjoint(m, &kk, &tt, &phi), &psi);
        prop_assert!((lhs - rhs).norm() < 1e-12, "{}: {} vs {}", name, lhs, rhs);
    }

    #[test]
    fn contraction_for_real_momenta(idx in 0usize..15, k in -3.2f64..3.2, t in 0.0f64..6.3) {
        let all = models();
        let (name, m) = &all[idx % all.len()];
        let fam = fiber_family(m);
        let nrm = weighted_norm(&fam.weights, &fam.matrix(&vec![c(k, 0.0); m.d()], &vec![t; m.d()]));
        prop_assert!(nrm <= 1.0 + 1e-10, "{}: {}", name, nrm);
    }
}
