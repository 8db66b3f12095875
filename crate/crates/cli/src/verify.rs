use std::time::Instant;

use anyhow::Result;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use mqw_core::config::LoadedModel;
use mqw_core::deviations::{
    clt_hessian, continuation_radius, moderate_rate_function, CONSTANT_TOL,
};
use mqw_core::evolution::{averaged_distribution_bruteforce, DEFAULT_BUDGET};
use mqw_core::linalg::{c, max_abs_vec, CVec, C64};
use mqw_core::model::WalkModel;
use mqw_core::optimize::{min_eigenvalue, solve_real};
use mqw_core::permutation::{
    empirical_random_diffusion, iid_sigma_covariance, sigma_covariance, PermutationModel,
};
use mqw_core::rng::master_rng;
use mqw_core::spectral::*;
use mqw_core::transfer::{
    apply_fiber, apply_fiber_adjoint, averaged_characteristic_fk, delta_identity, inner,
    min_grid_size, operator_norm_bound_check, torus_grid,
};
use mqw_core::uncorrelated::{averaged_char_uncorrelated, TensorModel};

use crate::commands::{spectral_of, RunContext};
use crate::output::write_json;
use crate::{Cli, EXIT_BUDGET, EXIT_CHECK_FAILED, EXIT_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Failed as the model file says it should.
    ExpectedFailure,
    /// A hypothesis of the check does not hold for this model.
    NotApplicable,
    /// Not run because the time budget was spent.
    Skipped,
}

#[derive(Debug, Serialize)]
pub struct CheckRecord {
    pub name: &'static str,
    pub status: Status,
    pub detail: Value,
}

fn record(name: &'static str, pass: bool, detail: Value) -> CheckRecord {
    CheckRecord {
        name,
        status: if pass { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn skip(name: &'static str, why: &str) -> CheckRecord {
    CheckRecord {
        name,
        status: Status::NotApplicable,
        detail: json!({"reason": why}),
    }
}

struct Suite {
    start: Instant,
    budget: f64,
    records: Vec<CheckRecord>,
}

impl Suite {
    fn run(&mut self, name: &'static str, f: impl FnOnce() -> Result<CheckRecord>) {
        if self.start.elapsed().as_secs_f64() > self.budget {
            self.records.push(CheckRecord {
                name,
                status: Status::Skipped,
                detail: json!({"reason": "time budget spent"}),
            });
            return;
        }
        let rec = f().unwrap_or_else(|e| record(name, false, json!({"error": format!("{e:#}")})));
        self.records.push(rec);
    }
}

fn y_values(d: usize) -> Vec<Vec<f64>> {
    (0..8)
        .map(|j| {
            (0..d)
                .map(|i| (-3.0 + 6.0 * (j as f64 + 0.5) / 8.0) / (1.0 + i as f64))
                .collect()
        })
        .collect()
}

fn fk_bruteforce(w: &WalkModel) -> Result<CheckRecord> {
    let f = w.num_coins() as u64;
    let max_n = if w.d() == 1 { 6 } else { 2 };
    let n_top = (1..=max_n)
        .take_while(|&n| f.pow(n as u32) <= 4096)
        .last()
        .unwrap_or(1);
    let mut worst = 0.0_f64;
    for n in 1..=n_top {
        let dist = averaged_distribution_bruteforce(w, n, DEFAULT_BUDGET)?;
        for y in y_values(w.d()) {
            let k: Vec<C64> = y.iter().map(|&v| c(v, 0.0)).collect();
            let fk = averaged_characteristic_fk(w, n, &k, min_grid_size(w, n))?;
            worst = worst.max((fk - dist.characteristic(&k)).norm());
        }
    }
    Ok(record(
        "fk_vs_bruteforce",
        worst <= 1e-10,
        json!({"max_steps": n_top, "max_abs_error": worst, "tolerance": 1e-10}),
    ))
}

fn transfer_identities(w: &WalkModel, seed: u64) -> Result<CheckRecord> {
    let d = w.d();
    let zero = vec![C64::default(); d];
    let id = delta_identity(w);
    let mut fixed = 0.0_f64;
    for t in torus_grid(d, if d == 1 { 32 } else { 6 }) {
        fixed = fixed.max(max_abs_vec(&(apply_fiber(w, &zero, &t, &id) - &id)));
        fixed = fixed.max(max_abs_vec(&(apply_fiber_adjoint(w, &zero, &t, &id) - &id)));
    }
    let mut rng = master_rng(seed);
    let pi = std::f64::consts::PI;
    let dim = w.fiber_dim();
    let mut adj = 0.0_f64;
    for _ in 0..100 {
        let k: Vec<C64> = (0..d).map(|_| c(rng.random_range(-pi..pi), 0.0)).collect();
        let t: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0 * pi)).collect();
        let mut rv = || {
            CVec::from_fn(dim, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let phi = rv();
        let psi = rv();
        let lhs = inner(w, &phi, &apply_fiber(w, &k, &t, &psi));
        let rhs = inner(w, &apply_fiber_adjoint(w, &k, &t, &phi), &psi);
        adj = adj.max((lhs - rhs).norm());
    }
    let norm = operator_norm_bound_check(w, 200, seed ^ 1);
    Ok(record(
        "transfer_identities",
        fixed <= 1e-12 && adj <= 1e-12 && !norm.flagged,
        json!({"fixed_vector_residual": fixed, "adjointness_residual": adj, "max_norm": norm.max_norm}),
    ))
}

fn s_grid(d: usize) -> usize {
    if d == 1 {
        8
    } else {
        4
    }
}

pub fn run(cli: &Cli, ctx: &RunContext) -> Result<u8> {
    let cfg = &ctx.config;
    let seed = cli.global.seed;
    let mut suite = Suite {
        start: Instant::now(),
        budget: cli.global.budget_seconds,
        records: Vec::new(),
    };
    suite.records.push(record(
        "validation",
        true,
        json!({"checks": cfg.validation.as_ref().map(|v| v.checks.len()).unwrap_or(0), "warnings": cfg.warnings}),
    ));
    let walk = cfg.model.walk()?;
    suite.run("fk_vs_bruteforce", || fk_bruteforce(&walk));
    suite.run("transfer_identities", || transfer_identities(&walk, seed));

    let (spec, drift, _) = spectral_of(&cfg.model)?;
    let d = spec.d();
    let mut gapped = false;
    suite.run("assumption_s", || {
        let rep = check_assumption_s(&spec, s_grid(d), DELTA_FLOOR)?;
        gapped = rep.passed;
        let detail = json!({
            "passed": rep.passed, "full_pass": rep.full_pass, "cyclic_dim": rep.cyclic_dim,
            "min_gap_cyclic": rep.min_gap_cyclic, "first_failure": rep.first_failure,
        });
        let degenerate_ok = match cfg.expect.degenerate {
            Some(true) => rep
                .first_failure
                .as_deref()
                .is_some_and(|f| f.contains("degenerate")),
            _ => true,
        };
        let status = match cfg.expect.assumption_s {
            Some(false) if !rep.passed && degenerate_ok => Status::ExpectedFailure,
            Some(want) if want != rep.passed || !degenerate_ok => Status::Fail,
            _ if rep.passed => Status::Pass,
            _ => Status::NotApplicable,
        };
        Ok(CheckRecord {
            name: "assumption_s",
            status,
            detail,
        })
    });

    if !gapped {
        for name in ["diffusion_routes", "conjugation_symmetry", "rate_functions"] {
            suite
                .records
                .push(skip(name, "gap condition does not hold"));
        }
    } else {
        suite.run("diffusion_routes", || {
            let pts = if d == 1 { torus_grid(1, 5) } else { torus_grid(d, 2) };
            let mut worst = 0.0_f64;
            let mut asym = 0.0_f64;
            let mut min_eig = f64::INFINITY;
            for t in pts {
                let a = diffusion_matrix_analytic(&spec, &t)?;
                let f = diffusion_matrix_fd(&spec, &t, FD_STEP)?;
                for i in 0..d {
                    for j in 0..d {
                        worst = worst.max((a.d[i][j] - f.d[i][j]).abs());
                        asym = asym.max((a.d[i][j] - a.d[j][i]).abs());
                    }
                }
                min_eig = min_eig.min(min_eigenvalue(&a.d));
            }
            Ok(record(
                "diffusion_routes",
                worst <= 1e-6 && asym <= 1e-10 && min_eig >= -1e-8,
                json!({"max_route_difference": worst, "asymmetry": asym, "min_eigenvalue": min_eig}),
            ))
        });
        suite.run("conjugation_symmetry", || {
            let kappa = continuation_radius(&spec, 2.0);
            if kappa == 0.0 {
                return Ok(skip("conjugation_symmetry", "no continuation radius found"));
            }
            let mut rng = master_rng(seed ^ 2);
            let mut worst = 0.0_f64;
            for _ in 0..20 {
                let k: Vec<f64> = (0..d).map(|_| rng.random_range(-kappa..kappa)).collect();
                let t: Vec<f64> = (0..d)
                    .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
                    .collect();
                worst = worst.max(symmetry_residual(&spec, &k, &t)?);
            }
            Ok(record(
                "conjugation_symmetry",
                worst < 1e-9,
                json!({"radius": kappa, "max_residual": worst}),
            ))
        });
        suite.run("rate_functions", || {
            let res = averaged_diffusion(&spec, &drift, s_grid(d))?;
            if res.variation > CONSTANT_TOL || drift.iter().any(|v| v.abs() > 1e-12) {
                return Ok(skip(
                    "rate_functions",
                    "closed forms need a constant diffusion matrix and zero drift",
                ));
            }
            let dm = &res.averaged;
            let xs = crate::grids::parse_point_grid("-1:1:9", 1)?
                .into_iter()
                .map(|x| {
                    (0..d)
                        .map(|i| x[0] / (1.0 + i as f64))
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>();
            let rate = moderate_rate_function(&spec, &res, &xs, 4.0)?;
            let mut worst = 0.0_f64;
            for (x, v) in xs.iter().zip(&rate.values) {
                let z = solve_real(dm, x)
                    .ok_or_else(|| anyhow::anyhow!("singular diffusion matrix"))?;
                let want = 0.5 * x.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
                worst = worst.max((v - want).abs());
            }
            let h = clt_hessian(&spec, &drift, s_grid(d), 1e-3)?;
            let mut hd = 0.0_f64;
            for i in 0..d {
                for j in 0..d {
                    hd = hd.max((h.matrix[i][j] - res.covariance[i][j]).abs());
                }
            }
            Ok(record(
                "rate_functions",
                worst <= 1e-6 && hd <= 1e-5,
                json!({"moderate_max_error": worst, "clt_hessian_difference": hd}),
            ))
        });
    }

    match &cfg.model {
        LoadedModel::Permutation(pm) if gapped => {
            suite.run("sigma_routes", || sigma_routes(pm, &spec, &drift, d));
            suite.run("clt_monte_carlo", || clt_monte_carlo(pm, seed));
        }
        LoadedModel::Tensor(tm) => {
            suite.run("uncorrelated_vs_correlated", || tensor_vs_walk(tm, &walk))
        }
        _ => {}
    }

    let failed = suite
        .records
        .iter()
        .filter(|r| r.status == Status::Fail)
        .count();
    let skipped = suite
        .records
        .iter()
        .filter(|r| r.status == Status::Skipped)
        .count();
    let body = json!({
        "model": cfg.name,
        "kind": cfg.model.kind(),
        "checks": suite.records,
        "summary": {"failed": failed, "skipped": skipped, "passed": failed == 0 && skipped == 0},
    });
    write_json(cli.global.out.as_deref(), &ctx.manifest, body)?;
    for r in &suite.records {
        eprintln!("{:<28} {:?}", r.name, r.status);
    }
    Ok(if failed > 0 {
        EXIT_CHECK_FAILED
    } else if skipped > 0 {
        EXIT_BUDGET
    } else {
        EXIT_PASS
    })
}

fn sigma_routes(
    pm: &PermutationModel,
    spec: &Spectral,
    drift: &[f64],
    d: usize,
) -> Result<CheckRecord> {
    let s = sigma_covariance(pm)?;
    let res = averaged_diffusion(spec, drift, s_grid(d))?;
    let mut pipeline = 0.0_f64;
    let mut fd = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            pipeline = pipeline.max((s.sigma[i][j] - res.covariance[i][j]).abs());
            fd = fd.max((s.sigma[i][j] - s.fd_hessian[i][j]).abs());
        }
    }
    let covma = match iid_sigma_covariance(pm) {
        Ok(c) => {
            let mut m = 0.0_f64;
            for i in 0..d {
                for j in 0..d {
                    m = m.max((c[i][j] - s.sigma[i][j]).abs());
                }
            }
            Some(m)
        }
        Err(_) => None,
    };
    Ok(record(
        "sigma_routes",
        pipeline <= 1e-6 && fd <= 1e-6 && covma.is_none_or(|m| m <= 1e-8),
        json!({"sigma": s.sigma, "vs_pipeline": pipeline, "vs_fd_hessian": fd, "vs_iid_formula": covma}),
    ))
}

fn clt_monte_carlo(pm: &PermutationModel, seed: u64) -> Result<CheckRecord> {
    let sigma = sigma_covariance(pm)?.sigma;
    let trials = 1000;
    let emp = empirical_random_diffusion(pm, &sigma, 256, trials, seed)?;
    let mut ok = true;
    let mut worst = 0.0_f64;
    for i in 0..sigma.len() {
        let err = (emp.covariance[i][i] - sigma[i][i]).abs();
        worst = worst.max(err);
        ok &= err <= 5.0 * sigma[i][i].max(1.0) / (trials as f64).sqrt();
    }
    Ok(record(
        "clt_monte_carlo",
        ok,
        json!({"steps": 256, "trials": trials, "covariance": emp.covariance, "max_variance_error": worst, "ks": emp.ks}),
    ))
}

fn tensor_vs_walk(tm: &TensorModel, walk: &WalkModel) -> Result<CheckRecord> {
    let mut worst = 0.0_f64;
    for n in 0..=6 {
        for y in y_values(tm.d()) {
            let k: Vec<C64> = y.iter().map(|&v| c(v, 0.0)).collect();
            let a = averaged_char_uncorrelated(tm, n, &k, tm.min_grid_size(n))?;
            let b = averaged_characteristic_fk(walk, n, &k, min_grid_size(walk, n))?;
            worst = worst.max((a - b).norm());
        }
    }
    Ok(record(
        "uncorrelated_vs_correlated",
        worst <= 1e-10,
        json!({"max_abs_error": worst}),
    ))
}
