use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use mqw_core::config::{parse_config, Config, LoadedModel};
use mqw_core::deviations::{
    large_dev_lambda_bar, large_rate_function, moderate_quadratic, moderate_rate_function,
    RateFunctionSample,
};
use mqw_core::evolution::{
    averaged_distribution_bruteforce, averaged_distribution_monte_carlo, distribution_for_path,
    sample_markov_path, Distribution, DEFAULT_BUDGET,
};
use mqw_core::linalg::{c, C64};
use mqw_core::permutation::{
    build_n, check_assumption_s_tilde, empirical_random_diffusion, iid_sigma_covariance,
    sigma_covariance,
};
use mqw_core::spectral::{
    averaged_diffusion, check_assumption_s, full_spectrum, spectral_data, verdict, Spectral,
    DELTA_FLOOR,
};
use mqw_core::transfer::{averaged_characteristic_fk, min_grid_size, torus_grid};
use mqw_core::uncorrelated::{averaged_char_uncorrelated, tensor_family, uncorrelated_diffusion};

use crate::grids::{parse_point_grid, parse_vector};
use crate::manifest::RunManifest;
use crate::output::{num, write_csv, write_json};
use crate::{Cli, Command, DevMode, EXIT_CHECK_FAILED, EXIT_PASS};

pub struct RunContext {
    pub config: Config,
    pub manifest: RunManifest,
}

pub fn load(cli: &Cli) -> Result<RunContext> {
    let path = cli
        .global
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("--config is required"))?;
    let bytes = std::fs::read(path)
        .map_err(mqw_core::error::Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| anyhow!("{} is not UTF-8", path.display()))?;
    let config = parse_config(&text)?;
    let shown = path.to_string_lossy().into_owned();
    let manifest = RunManifest::new(
        command_name(&cli.command),
        Some((shown.as_str(), &bytes)),
        serde_json::to_value(&cli.command)?,
        cli.global.seed,
        cli.global.budget_seconds,
    );
    Ok(RunContext { config, manifest })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Evolve(_) => "evolve",
        Command::Charfn(_) => "charfn",
        Command::Spectrum(_) => "spectrum",
        Command::Diffusion(_) => "diffusion",
        Command::Deviations(_) => "deviations",
        Command::Permutation(_) => "permutation",
        Command::Uncorrelated(_) => "uncorrelated",
        Command::Verify => "verify",
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    let ctx = load(cli)?;
    for w in &ctx.config.warnings {
        eprintln!("warning: {w}");
    }
    let out = cli.global.out.as_deref();
    match &cli.command {
        Command::Validate => {
            let body = json!({
                "name": ctx.config.name,
                "kind": ctx.config.model.kind(),
                "warnings": ctx.config.warnings,
                "validation": ctx.config.validation,
                "expect": ctx.config.expect,
            });
            write_json(out, &ctx.manifest, body)?;
            Ok(EXIT_PASS)
        }
        Command::Evolve(a) => {
            let model = ctx.config.model.walk()?;
            let (mode, dist, extra): (&str, Distribution, Vec<(&str, String)>) = if a.enumerate {
                (
                    "enumerate",
                    averaged_distribution_bruteforce(&model, a.steps, DEFAULT_BUDGET)?,
                    vec![],
                )
            } else if let Some(t) = a.paths {
                let mc = averaged_distribution_monte_carlo(&model, a.steps, t, cli.global.seed)?;
                ("monte-carlo", mc.mean, vec![("paths", t.to_string())])
            } else {
                let path = sample_markov_path(&model.coins, a.steps, cli.global.seed);
                let d = distribution_for_path(&model, &path, a.steps)?;
                let steps: Vec<String> = path.steps.iter().map(|s| s.to_string()).collect();
                ("single-path", d, vec![("disorder", steps.join(" "))])
            };
            let mut meta = vec![
                ("mode", mode.to_string()),
                ("steps", a.steps.to_string()),
                ("seed", cli.global.seed.to_string()),
            ];
            meta.extend(extra);
            let header: Vec<String> = (1..=model.d())
                .map(|i| format!("k_{i}"))
                .chain(["probability".to_string()])
                .collect();
            let rows: Vec<Vec<String>> = dist
                .entries()
                .into_iter()
                .filter(|(_, p)| *p != 0.0)
                .map(|(k, p)| k.iter().map(|v| v.to_string()).chain([num(p)]).collect())
                .collect();
            write_csv(out, &ctx.manifest, &meta, &header, &rows)?;
            Ok(EXIT_PASS)
        }
        Command::Charfn(a) => {
            let model = ctx.config.model.walk()?;
            let y = parse_vector(&a.y)?;
            let k: Vec<C64> = y.iter().map(|&v| c(v, 0.0)).collect();
            let grid = a.grid.unwrap_or_else(|| min_grid_size(&model, a.steps));
            let value = averaged_characteristic_fk(&model, a.steps, &k, grid)?;
            let cross = if a.check {
                let bf = averaged_distribution_bruteforce(&model, a.steps, DEFAULT_BUDGET)?
                    .characteristic(&k);
                let err = (bf - value).norm();
                Some(
                    json!({"bruteforce": [bf.re, bf.im], "abs_error": err, "agrees": err <= 1e-10}),
                )
            } else {
                None
            };
            let failed = cross.as_ref().is_some_and(|c| c["agrees"] == json!(false));
            write_json(
                out,
                &ctx.manifest,
                json!({"steps": a.steps, "y": y, "grid": grid, "value": [value.re, value.im], "cross_check": cross}),
            )?;
            Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_PASS })
        }
        Command::Spectrum(a) => {
            let (spec, _, momentum) = spectral_of(&ctx.config.model)?;
            let d = spec.d();
            let zero = vec![C64::default(); d];
            let mut points = Vec::new();
            for t in torus_grid(d, a.p_grid) {
                let full = full_spectrum(&spec.family.matrix(&zero, &t))?;
                let cyc = verdict(
                    &mqw_core::linalg::eigenvalues(&spec.restricted.matrix(&zero, &t))?,
                    DELTA_FLOOR,
                );
                let branch = if cyc.passed {
                    let sd = spectral_data(&spec, &zero, &t)?;
                    json!({"lambda1": sd.lambda1, "projector_trace": sd.projector_trace, "idempotency": sd.idempotency})
                } else {
                    Value::Null
                };
                points.push(json!({
                    "t": t, "p": momentum(&t), "eigenvalues": full.values, "cyclic": cyc, "branch": branch,
                }));
            }
            let report = if a.check_s {
                Some(check_assumption_s(&spec, a.p_grid, DELTA_FLOOR)?)
            } else {
                None
            };
            let failed = report.as_ref().is_some_and(|r| !r.passed);
            write_json(
                out,
                &ctx.manifest,
                json!({"full_dim": spec.family.dim(), "cyclic_dim": spec.cyclic_dim(), "points": points, "assumption_s": report}),
            )?;
            Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_PASS })
        }
        Command::Diffusion(a) => {
            let (spec, drift, momentum) = spectral_of(&ctx.config.model)?;
            let report = check_assumption_s(&spec, a.p_grid, DELTA_FLOOR)?;
            if !report.passed {
                eprintln!(
                    "gap condition fails: {}",
                    report.first_failure.clone().unwrap_or_default()
                );
                write_json(
                    out,
                    &ctx.manifest,
                    json!({"assumption_s": report, "diffusion": null}),
                )?;
                return Ok(EXIT_CHECK_FAILED);
            }
            let res = averaged_diffusion(&spec, &drift, a.p_grid)?;
            let per_p: Vec<Value> = res
                .points
                .iter()
                .map(|p| json!({"t": p.t, "p": momentum(&p.t), "d": p.d, "imag_residual": p.imag_residual}))
                .collect();
            write_json(
                out,
                &ctx.manifest,
                json!({
                    "drift": res.drift,
                    "averaged": res.averaged,
                    "covariance": res.covariance,
                    "variation": res.variation,
                    "points": per_p,
                    "gap": {"min_full": report.min_gap_full, "min_cyclic": report.min_gap_cyclic,
                            "full_pass": report.full_pass, "cyclic_dim": report.cyclic_dim},
                }),
            )?;
            Ok(EXIT_PASS)
        }
        Command::Deviations(a) => {
            let (spec, drift, momentum) = spectral_of(&ctx.config.model)?;
            let d = spec.d();
            let xs = parse_point_grid(&a.x_grid, d)?;
            let report = check_assumption_s(&spec, a.p_grid, DELTA_FLOOR)?;
            if !report.passed {
                bail!(mqw_core::error::Error::Hypothesis(
                    report.first_failure.unwrap_or_default()
                ));
            }
            let (sample, extra): (RateFunctionSample, Vec<(Vec<f64>, f64)>) = match a.mode {
                DevMode::Moderate => {
                    let res = averaged_diffusion(&spec, &drift, a.p_grid)?;
                    let s = moderate_rate_function(&spec, &res, &xs, a.y_box)?;
                    let extra = s
                        .argmax
                        .iter()
                        .map(|y| Ok((moderate_quadratic(&spec, &res, y)?.t_max, f64::NAN)))
                        .collect::<Result<Vec<_>>>()?;
                    (s, extra)
                }
                DevMode::Large => {
                    let s = large_rate_function(&spec, &drift, &xs, a.p_grid)?;
                    let extra = s
                        .argmax
                        .iter()
                        .map(|y| {
                            let lb = large_dev_lambda_bar(&spec, &drift, y, a.p_grid)?;
                            Ok((lb.t_max, lb.gradient_norm))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (s, extra)
                }
            };
            let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
            header.push("value".into());
            header.push("valid".into());
            header.extend((1..=d).map(|i| format!("y_{i}")));
            header.extend((1..=d).map(|i| format!("p_{i}")));
            header.push("gradient_norm".into());
            let rows: Vec<Vec<String>> = (0..xs.len())
                .map(|i| {
                    let mut r: Vec<String> = xs[i].iter().map(|v| num(*v)).collect();
                    r.push(num(sample.values[i]));
                    r.push(sample.valid[i].to_string());
                    r.extend(sample.argmax[i].iter().map(|v| num(*v)));
                    r.extend(momentum(&extra[i].0).iter().map(|v| num(*v)));
                    r.push(if extra[i].1.is_nan() {
                        String::new()
                    } else {
                        num(extra[i].1)
                    });
                    r
                })
                .collect();
            let mut meta = vec![
                ("mode", format!("{:?}", sample.mode).to_lowercase()),
                ("y_domain", num(sample.y_domain)),
            ];
            meta.extend(sample.notes.iter().map(|n| ("note", n.clone())));
            write_csv(out, &ctx.manifest, &meta, &header, &rows)?;
            Ok(if sample.valid.iter().all(|v| *v) {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Permutation(a) => {
            let LoadedModel::Permutation(pm) = &ctx.config.model else {
                bail!(mqw_core::error::Error::InvalidInput(format!(
                    "the model is a {} model; permutation coins are required",
                    ctx.config.model.kind()
                )));
            };
            let nm = build_n(pm);
            let nrep = check_assumption_s_tilde(&nm)?;
            if !nrep.passed {
                write_json(out, &ctx.manifest, json!({"n_matrix": nrep}))?;
                return Ok(EXIT_CHECK_FAILED);
            }
            let sig = sigma_covariance(pm)?;
            let covma = match iid_sigma_covariance(pm) {
                Ok(s) => json!({"sigma": s}),
                Err(e) => json!({"unavailable": e.to_string()}),
            };
            let emp =
                empirical_random_diffusion(pm, &sig.sigma, a.steps, a.trials, cli.global.seed)?;
            write_json(
                out,
                &ctx.manifest,
                json!({"n_matrix": nrep, "vbs": sig, "covma": covma, "empirical": emp}),
            )?;
            Ok(EXIT_PASS)
        }
        Command::Uncorrelated(a) => {
            let LoadedModel::Tensor(tm) = &ctx.config.model else {
                bail!(mqw_core::error::Error::InvalidInput(format!(
                    "the model is a {} model; kind \"uncorrelated\" is required",
                    ctx.config.model.kind()
                )));
            };
            let y = parse_vector(&a.y)?;
            let k: Vec<C64> = y.iter().map(|&v| c(v, 0.0)).collect();
            let grid = a.grid.unwrap_or_else(|| tm.min_grid_size(a.steps));
            let value = averaged_char_uncorrelated(tm, a.steps, &k, grid)?;
            let walk = tm.to_walk()?;
            let corr =
                averaged_characteristic_fk(&walk, a.steps, &k, min_grid_size(&walk, a.steps))?;
            let diff = uncorrelated_diffusion(tm, a.p_grid)?;
            let err = (value - corr).norm();
            write_json(
                out,
                &ctx.manifest,
                json!({
                    "steps": a.steps, "y": y, "grid": grid, "value": [value.re, value.im],
                    "correlated_pipeline": {"value": [corr.re, corr.im], "abs_error": err},
                    "assumption_s": diff.report.passed,
                    "diffusion": diff.result.map(|r| json!({"drift": r.drift, "averaged": r.averaged, "covariance": r.covariance})),
                }),
            )?;
            Ok(if err <= 1e-10 {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Verify => crate::verify::run(cli, &ctx),
    }
}

pub type Momentum = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// Spectral data, drift and the torus-to-momentum map for a loaded model.
pub fn spectral_of(model: &LoadedModel) -> Result<(Spectral, Vec<f64>, Momentum)> {
    Ok(match model {
        LoadedModel::Tensor(tm) => (
            Spectral::for_family(tensor_family(tm)),
            tm.drift(),
            Box::new(|t: &[f64]| t.to_vec()) as Momentum,
        ),
        m => {
            let w = m.walk()?;
            let repr = w.repr.clone();
            (
                Spectral::for_model(&w),
                w.drift(),
                Box::new(move |t: &[f64]| repr.momentum(t)) as Momentum,
            )
        }
    })
}
