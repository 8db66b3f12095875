//! Spectral data of the transfer operator: the gap condition, the eigenvalue
//! branch through 1, the reduced resolvent, drift and diffusion matrix.
//!
//! All branch computations run on the compression of the family to its cyclic
//! subspace (see [`crate::family`]); the full space is used only for the
//! gap-condition report and the closed resolvent formula.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{Restricted, TiltedFamily};
use crate::linalg::{c, eigen, eigenvalues, max_abs, overlap, solve, wdot, CMat, CVec, C64};
use crate::model::WalkModel;
use crate::optimize::richardson_hessian;
use crate::transfer::{
    self, averaged_characteristic_fk_with, delta_identity, delta_projector, fiber_family,
    torus_grid,
};

pub const DELTA_FLOOR: f64 = 1e-6;
pub const RANK_TOL: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-3;

/// Transfer family together with its cyclic compression.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub family: TiltedFamily,
    pub restricted: Restricted,
}

impl Spectral {
    pub fn for_family(family: TiltedFamily) -> Self {
        let restricted = family.restrict(RANK_TOL);
        Self { family, restricted }
    }

    pub fn for_model(model: &WalkModel) -> Self {
        Self::for_family(fiber_family(model))
    }

    pub fn d(&self) -> usize {
        self.family.d
    }

    pub fn cyclic_dim(&self) -> usize {
        self.restricted.dim()
    }
}

/// Eigenvalues with per-pair backward residuals.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub values: Vec<[f64; 2]>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

pub fn full_spectrum(m: &CMat) -> Result<Spectrum> {
    let e = eigen(m)?;
    let residuals: Vec<f64> = (0..m.nrows()).map(|j| e.residual(m, j)).collect();
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    if max_residual > 1e-8 {
        return Err(Error::Eigen(format!(
            "eigenpair residual {max_residual:.3e} exceeds 1e-8 for\n{m:.6e}"
        )));
    }
    Ok(Spectrum {
        values: e.values.iter().map(|z| [z.re, z.im]).collect(),
        residuals,
        max_residual,
    })
}

/// Gap-condition verdict for one spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub passed: bool,
    /// Eigenvalues within the floor of 1.
    pub near_one: usize,
    /// `1 − max |λ|` over the rest of the spectrum.
    pub gap: f64,
    pub reason: Option<String>,
}

pub fn verdict(values: &[C64], delta_floor: f64) -> Verdict {
    let one = c(1.0, 0.0);
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        (values[a] - one)
            .norm()
            .total_cmp(&(values[b] - one).norm())
    });
    let near_one = values
        .iter()
        .filter(|z| (*z - one).norm() <= delta_floor)
        .count();
    let rest_max = idx
        .iter()
        .skip(1)
        .map(|&j| values[j].norm())
        .fold(0.0, f64::max);
    let gap = 1.0 - rest_max;
    let reason = if values.is_empty() || (values[idx[0]] - one).norm() > delta_floor {
        Some("eigenvalue 1 absent".to_string())
    } else if near_one > 1 {
        Some(format!("eigenvalue 1 degenerate (multiplicity {near_one})"))
    } else if gap <= delta_floor {
        Some(format!(
            "peripheral spectrum beyond 1 (max |λ| = {rest_max:.12})"
        ))
    } else {
        None
    };
    Verdict {
        passed: reason.is_none(),
        near_one,
        gap,
        reason,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointVerdict {
    pub t: Vec<f64>,
    pub full: Verdict,
    pub cyclic: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct SReport {
    pub delta_floor: f64,
    pub full_dim: usize,
    pub cyclic_dim: usize,
    pub full_pass: bool,
    pub cyclic_pass: bool,
    pub min_gap_full: f64,
    pub min_gap_cyclic: f64,
    /// The condition holds on the cyclic subspace, which is all the asymptotics use.
    pub passed: bool,
    pub first_failure: Option<String>,
    pub points: Vec<PointVerdict>,
}

pub fn check_assumption_s(spec: &Spectral, grid: usize, delta_floor: f64) -> Result<SReport> {
    let d = spec.d();
    let zero = vec![C64::default(); d];
    let pts = torus_grid(d, grid);
    let points: Vec<Result<PointVerdict>> = pts
        .par_iter()
        .map(|t| {
            let full = verdict(&eigenvalues(&spec.family.matrix(&zero, t))?, delta_floor);
            let cyclic = verdict(
                &eigenvalues(&spec.restricted.matrix(&zero, t))?,
                delta_floor,
            );
            Ok(PointVerdict {
                t: t.clone(),
                full,
                cyclic,
            })
        })
        .collect();
    let points: Vec<PointVerdict> = points.into_iter().collect::<Result<_>>()?;
    let full_pass = points.iter().all(|p| p.full.passed);
    let cyclic_pass = points.iter().all(|p| p.cyclic.passed);
    let first_failure = points.iter().find(|p| !p.cyclic.passed).map(|p| {
        format!(
            "t = {:?}: {}",
            p.t,
            p.cyclic.reason.clone().unwrap_or_default()
        )
    });
    Ok(SReport {
        delta_floor,
        full_dim: spec.family.dim(),
        cyclic_dim: spec.cyclic_dim(),
        full_pass,
        cyclic_pass,
        min_gap_full: points
            .iter()
            .map(|p| p.full.gap)
            .fold(f64::INFINITY, f64::min),
        min_gap_cyclic: points
            .iter()
            .map(|p| p.cyclic.gap)
            .fold(f64::INFINITY, f64::min),
        passed: cyclic_pass,
        first_failure,
        points,
    })
}

/// Eigenvalue, right and left eigenvectors with `w* v = 1`.
#[derive(Clone, Debug)]
pub struct Branch {
    pub value: C64,
    pub right: CVec,
    pub left: CVec,
}

impl Branch {
    /// Spectral projector `v w*`.
    pub fn projector(&self) -> CMat {
        &self.right * self.left.adjoint()
    }
}

fn pick(m: &CMat, select: impl Fn(&[C64], &CMat) -> (usize, f64)) -> Result<(Branch, f64)> {
    let e = eigen(m)?;
    let (j, score) = select(&e.values, &e.right);
    let v = e.right.column(j).into_owned();
    let w = e.left.column(j).into_owned();
    let s = w.dotc(&v);
    if s.norm() < 1e-13 {
        return Err(Error::Hypothesis(
            "eigenvalue is defective (left/right eigenvectors orthogonal)".into(),
        ));
    }
    let w = w / s.conj();
    // Two-sided Rayleigh quotient.
    let value = w.dotc(&(m * &v));
    Ok((
        Branch {
            value,
            right: v,
            left: w,
        },
        score,
    ))
}

/// Branch at `k = 0`: the eigenvalue nearest to 1.
pub fn unperturbed(rest: &Restricted, t: &[f64]) -> Result<Branch> {
    let zero = vec![C64::default(); rest.d()];
    let m = rest.matrix(&zero, t);
    let (b, _) = pick(&m, |vals, _| {
        let j = (0..vals.len())
            .min_by(|&a, &b| (vals[a] - 1.0).norm().total_cmp(&(vals[b] - 1.0).norm()))
            .unwrap();
        (j, 0.0)
    })?;
    if (b.value - 1.0).norm() > 1e-8 {
        return Err(Error::Hypothesis(format!("no eigenvalue 1 at t = {t:?}")));
    }
    Ok(b)
}

/// `λ₁(k, p)` continued from `λ₁(0, p) = 1` along the segment `s k`, `s ∈ [0, 1]`,
/// choosing at each node the eigenvector of maximal overlap with the previous one.
pub fn lambda1_branch(rest: &Restricted, k: &[C64], t: &[f64]) -> Result<Branch> {
    let start = unperturbed(rest, t)?;
    if k.iter().all(|z| *z == C64::default()) {
        return Ok(start);
    }
    let mut segments = 4usize;
    loop {
        let mut prev = start.right.clone();
        let mut current = None;
        let mut failure = None;
        for s in 1..=segments {
            let f = s as f64 / segments as f64;
            let ks: Vec<C64> = k.iter().map(|z| z * f).collect();
            let m = rest.matrix(&ks, t);
            let (b, score) = pick(&m, |_, right| {
                let mut best = (0, -1.0);
                for j in 0..right.ncols() {
                    let o = overlap(&prev, &right.column(j).into_owned());
                    if o > best.1 {
                        best = (j, o);
                    }
                }
                best
            })?;
            if score < 0.5 {
                failure = Some((ks, score));
                break;
            }
            prev = b.right.clone();
            current = Some(b);
        }
        match failure {
            None => return Ok(current.expect("at least one segment")),
            Some((ks, score)) => {
                if segments >= 16 {
                    return Err(Error::BranchCollision {
                        k: ks
                            .iter()
                            .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
                            .collect(),
                        overlap: score,
                    });
                }
                segments *= 2;
            }
        }
    }
}

pub fn lambda1(spec: &Spectral, k: &[C64], t: &[f64]) -> Result<C64> {
    Ok(lambda1_branch(&spec.restricted, k, t)?.value)
}

/// `|λ₁(k, p) − conj(λ₁(−k, p − k))|` for real `k`.
pub fn symmetry_residual(spec: &Spectral, k: &[f64], t: &[f64]) -> Result<f64> {
    let kc: Vec<C64> = k.iter().map(|&v| c(v, 0.0)).collect();
    let km: Vec<C64> = k.iter().map(|&v| c(-v, 0.0)).collect();
    let a = lambda1(spec, &kc, t)?;
    let b = lambda1(spec, &km, &spec.family.shift_torus(t, k))?;
    Ok((a - b.conj()).norm())
}

/// Spectral summary at one `(k, p)`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    pub t: Vec<f64>,
    /// Full spectrum of `M̂(0, p)`.
    pub eigenvalues: Vec<[f64; 2]>,
    pub lambda1: [f64; 2],
    /// Rank-one projector on the cyclic subspace.
    #[serde(skip)]
    pub projector: CMat,
    pub projector_trace: [f64; 2],
    /// `‖P² − P‖_max`.
    pub idempotency: f64,
    /// Gap on the cyclic subspace at `k = 0`.
    pub gap: f64,
}

pub fn spectral_data(spec: &Spectral, k: &[C64], t: &[f64]) -> Result<SpectralData> {
    let zero = vec![C64::default(); spec.d()];
    let full = full_spectrum(&spec.family.matrix(&zero, t))?;
    let v = verdict(
        &eigenvalues(&spec.restricted.matrix(&zero, t))?,
        DELTA_FLOOR,
    );
    let b = lambda1_branch(&spec.restricted, k, t)?;
    let projector = b.projector();
    let tr = projector.trace();
    let idempotency = max_abs(&(&projector * &projector - &projector));
    Ok(SpectralData {
        t: t.to_vec(),
        eigenvalues: full.values,
        lambda1: [b.value.re, b.value.im],
        projector,
        projector_trace: [tr.re, tr.im],
        idempotency,
        gap: v.gap,
    })
}

/// Reduced resolvent at 1 with its defining residuals.
#[derive(Clone, Debug)]
pub struct Resolvent {
    pub s: CMat,
    pub projector: CMat,
    /// `‖(M − 1) S − (I − Π)‖_max`.
    pub residual: f64,
    /// `max(‖S Π‖, ‖Π S‖)`.
    pub annihilation: f64,
}

/// Solves the bordered system `[[M − 1, v], [w*, 0]] [X; μ] = [(I − Π) B; 0]` for `B = I`.
pub fn reduced_resolvent_with(m: &CMat, right: &CVec, left: &CVec) -> Result<Resolvent> {
    let n = m.nrows();
    let norm = left.dotc(right);
    let projector = right * left.adjoint() / norm;
    let id = CMat::identity(n, n);
    let mut border = CMat::zeros(n + 1, n + 1);
    border.view_mut((0, 0), (n, n)).copy_from(&(m - &id));
    for i in 0..n {
        border[(i, n)] = right[i];
        border[(n, i)] = left[i].conj();
    }
    let mut rhs = CMat::zeros(n + 1, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(&id - &projector));
    let sol = solve(&border, &rhs).map_err(|_| {
        Error::Hypothesis("bordered system singular: eigenvalue 1 is not simple".into())
    })?;
    let s = sol.view((0, 0), (n, n)).into_owned();
    let residual = max_abs(&((m - &id) * &s - (&id - &projector)));
    let annihilation = max_abs(&(&s * &projector)).max(max_abs(&(&projector * &s)));
    Ok(Resolvent {
        s,
        projector,
        residual,
        annihilation,
    })
}

/// `S_p(1)` of the compressed operator at torus point `t`.
pub fn reduced_resolvent(spec: &Spectral, t: &[f64]) -> Result<Resolvent> {
    let b = unperturbed(&spec.restricted, t)?;
    let zero = vec![C64::default(); spec.d()];
    reduced_resolvent_with(&spec.restricted.matrix(&zero, t), &b.right, &b.left)
}

/// `r̄ = (1/2d) Σ_τ r(τ)`.
pub fn drift(model: &WalkModel) -> Vec<f64> {
    model.drift()
}

/// Diffusion matrix at one torus point.
#[derive(Clone, Debug, Serialize)]
pub struct DiffusionPoint {
    pub t: Vec<f64>,
    /// `−i ∂_k λ₁(0, p)`.
    pub drift: Vec<f64>,
    /// `D_ij = −∂_i ∂_j λ₁(0, p)`.
    pub d: Vec<Vec<f64>>,
    /// Largest imaginary part discarded.
    pub imag_residual: f64,
}

/// Second-order perturbation of the simple eigenvalue 1:
/// `∂_i∂_j λ = w* B_ij v − w* B_i S B_j v − w* B_j S B_i v`.
pub fn diffusion_matrix_analytic(spec: &Spectral, t: &[f64]) -> Result<DiffusionPoint> {
    let rest = &spec.restricted;
    let d = spec.d();
    let b = unperturbed(rest, t)?;
    let zero = vec![C64::default(); d];
    let m0 = rest.matrix(&zero, t);
    let res = reduced_resolvent_with(&m0, &b.right, &b.left)?;
    let first: Vec<CMat> = (0..d).map(|i| rest.k_derivative(t, i)).collect();
    let sb: Vec<CVec> = first.iter().map(|bi| &res.s * (bi * &b.right)).collect();
    let mut drift = vec![0.0; d];
    let mut imag = 0.0_f64;
    for i in 0..d {
        let l = b.left.dotc(&(&first[i] * &b.right));
        drift[i] = l.im;
        imag = imag.max(l.re.abs());
    }
    let mut dm = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let bij = rest.k_second_derivative(t, i, j);
            let v = b.left.dotc(&(&bij * &b.right))
                - b.left.dotc(&(&first[i] * &sb[j]))
                - b.left.dotc(&(&first[j] * &sb[i]));
            dm[i][j] = -v.re;
            imag = imag.max(v.im.abs());
        }
    }
    Ok(DiffusionPoint {
        t: t.to_vec(),
        drift,
        d: dm,
        imag_residual: imag,
    })
}

/// Finite-difference route with one Richardson step.
#[derive(Clone, Debug, Serialize)]
pub struct FdDiffusion {
    pub d: Vec<Vec<f64>>,
    /// Relative disagreement between the `h` and `h/2` stencils.
    pub stencil_disagreement: f64,
    pub noisy: bool,
    pub imag_residual: f64,
}

/// `D_ij = −∂_i∂_j [λ₁(k, p) − i k·r̄]` at `k = 0` by central differences.
pub fn diffusion_matrix_fd(spec: &Spectral, t: &[f64], h: f64) -> Result<FdDiffusion> {
    let d = spec.d();
    let mut lam = |k: &[f64]| -> Result<C64> {
        let kc: Vec<C64> = k.iter().map(|&v| c(v, 0.0)).collect();
        lambda1(spec, &kc, t)
    };
    let (hess, dis) = richardson_hessian(&mut lam, d, h)?;
    let imag = hess
        .iter()
        .flatten()
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    let dm = hess
        .iter()
        .map(|row| row.iter().map(|z| -z.re).collect())
        .collect();
    Ok(FdDiffusion {
        d: dm,
        stencil_disagreement: dis,
        noisy: dis > 1e-4,
        imag_residual: imag,
    })
}

/// `−i ∂_k λ₁(0, p)` by central differences.
pub fn drift_fd(spec: &Spectral, t: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = spec.d();
    (0..d)
        .map(|i| {
            let mut kp = vec![C64::default(); d];
            kp[i] = c(h, 0.0);
            let mut km = vec![C64::default(); d];
            km[i] = c(-h, 0.0);
            let g = (lambda1(spec, &kp, t)? - lambda1(spec, &km, t)?) / (2.0 * h);
            Ok(g.im)
        })
        .collect()
}

/// Closed second-order formula on the full fiber,
/// `⟨k, D k⟩ = −(1/d)[Σ_τ (k·r(τ))²/2 + Σ_{τ,τ'} (k·r(τ))(k·r(τ'))(S_{τ'τ} − 1/2d)]`
/// with `S_{τ'τ} = ⟨δ₀⊗P_τ', S_p(1) δ₀⊗P_τ⟩`. Requires the gap condition on the
/// full space.
pub fn diffusion_matrix_closed_form(model: &WalkModel, t: &[f64]) -> Result<Vec<Vec<f64>>> {
    let fam = fiber_family(model);
    let d = model.d();
    let s2 = model.states();
    let zero = vec![C64::default(); d];
    let m0 = fam.matrix(&zero, t);
    let v = verdict(&eigenvalues(&m0)?, DELTA_FLOOR);
    if !v.passed {
        return Err(Error::Hypothesis(format!(
            "closed form needs the gap condition on the full fiber: {}",
            v.reason.unwrap_or_default()
        )));
    }
    let v0 = delta_identity(model);
    let w0 = CVec::from_iterator(v0.len(), v0.iter().zip(&fam.weights).map(|(z, w)| z * *w));
    let res = reduced_resolvent_with(&m0, &v0, &w0)?;
    let proj: Vec<CVec> = (0..s2).map(|tau| delta_projector(model, tau)).collect();
    let mut smat = vec![vec![C64::default(); s2]; s2];
    for tp in 0..s2 {
        for tau in 0..s2 {
            smat[tp][tau] = wdot(&fam.weights, &proj[tp], &(&res.s * &proj[tau]));
        }
    }
    let r = &model.jump.r;
    let inv = 1.0 / s2 as f64;
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = C64::default();
            for tau in 0..s2 {
                acc += c(0.5 * (r[tau][i] * r[tau][j]) as f64, 0.0);
            }
            for tau in 0..s2 {
                for tp in 0..s2 {
                    let coef = 0.5 * (r[tau][i] * r[tp][j] + r[tau][j] * r[tp][i]) as f64;
                    acc += (smat[tp][tau] - inv) * coef;
                }
            }
            out[i][j] = -(acc.re) / d as f64;
        }
    }
    Ok(out)
}

/// Drift, the diffusion field on the torus grid and its average.
#[derive(Clone, Debug, Serialize)]
pub struct DiffusionResult {
    pub drift: Vec<f64>,
    pub grid: usize,
    pub points: Vec<DiffusionPoint>,
    /// `∫ D(p) dp̃`.
    pub averaged: Vec<Vec<f64>>,
    /// `∫ D(p) dp̃ − r̄ r̄ᵀ`, the limiting covariance.
    pub covariance: Vec<Vec<f64>>,
    /// Largest entrywise spread of `D(p)` over the grid.
    pub variation: f64,
}

pub fn averaged_diffusion(spec: &Spectral, drift: &[f64], grid: usize) -> Result<DiffusionResult> {
    let d = spec.d();
    let pts = torus_grid(d, grid);
    let points: Vec<Result<DiffusionPoint>> = pts
        .par_iter()
        .map(|t| diffusion_matrix_analytic(spec, t))
        .collect();
    let points: Vec<DiffusionPoint> = points.into_iter().collect::<Result<_>>()?;
    let mut averaged = vec![vec![0.0; d]; d];
    for p in &points {
        for i in 0..d {
            for j in 0..d {
                averaged[i][j] += p.d[i][j];
            }
        }
    }
    let mut variation = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            averaged[i][j] /= points.len() as f64;
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                    (a.min(p.d[i][j]), b.max(p.d[i][j]))
                });
            variation = variation.max(hi - lo);
        }
    }
    let covariance = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| averaged[i][j] - drift[i] * drift[j])
                .collect()
        })
        .collect();
    Ok(DiffusionResult {
        drift: drift.to_vec(),
        grid,
        points,
        averaged,
        covariance,
        variation,
    })
}

/// Residuals of the diffusive and ballistic scaling limits of `Φ_n`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub n: usize,
    pub steps: usize,
    pub diffusive: [f64; 2],
    pub diffusive_limit: f64,
    pub diffusive_residual: f64,
    pub ballistic: [f64; 2],
    pub ballistic_limit: [f64; 2],
    pub ballistic_residual: f64,
}

/// Compares `e^{−i[tn] r̄·y/√n} Φ_{[tn]}(y/√n)` with `∫ e^{−(t/2)⟨y, C(p) y⟩} dp̃`,
/// `C(p) = D(p) − r̄ r̄ᵀ`, and `Φ_{[tn]}(y/n)` with `e^{i t y·r̄}`.
pub fn scaled_charfn_limit_check(
    model: &WalkModel,
    diffusion: &DiffusionResult,
    y: &[f64],
    t: f64,
    n_list: &[usize],
) -> Result<Vec<LimitRow>> {
    let fam = fiber_family(model);
    let rbar = &diffusion.drift;
    let d = model.d();
    let limit: f64 = diffusion
        .points
        .iter()
        .map(|p| {
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += y[i] * (p.d[i][j] - rbar[i] * rbar[j]) * y[j];
                }
            }
            (-0.5 * t * q).exp()
        })
        .sum::<f64>()
        / diffusion.points.len() as f64;
    let ydr: f64 = y.iter().zip(rbar).map(|(a, b)| a * b).sum();
    let mut rows = Vec::new();
    for &n in n_list {
        let steps = (t * n as f64).floor() as usize;
        let grid = transfer::min_grid_size(model, steps);
        let sq = (n as f64).sqrt();
        let kd: Vec<C64> = y.iter().map(|v| c(v / sq, 0.0)).collect();
        let phi = averaged_characteristic_fk_with(model, &fam, steps, &kd, grid)?;
        let val = phi * crate::linalg::cis(-(steps as f64) * ydr / sq);
        let kb: Vec<C64> = y.iter().map(|v| c(v / n as f64, 0.0)).collect();
        let bal = averaged_characteristic_fk_with(model, &fam, steps, &kb, grid)?;
        let blim = crate::linalg::cis(t * ydr);
        rows.push(LimitRow {
            n,
            steps,
            diffusive: [val.re, val.im],
            diffusive_limit: limit,
            diffusive_residual: (val - limit).norm(),
            ballistic: [bal.re, bal.im],
            ballistic_limit: [blim.re, blim.im],
            ballistic_residual: (bal - blim).norm(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn flip_branch_matches_two_state_chain() {
        let q = 0.7;
        let spec = Spectral::for_model(&fixtures::flip(q));
        assert_eq!(spec.cyclic_dim(), 2);
        for &k in &[0.1, 0.4, 0.9] {
            let lam = lambda1(&spec, &[c(k, 0.0)], &[0.3]).unwrap();
            let want = q * k.cos() + c(q * q * k.cos().powi(2) - 2.0 * q + 1.0, 0.0).sqrt();
            assert!((lam - want).norm() < 1e-12, "k = {k}: {lam} vs {want}");
        }
    }

    #[test]
    fn flip_resolvent_spectrum() {
        let q = 0.25;
        let spec = Spectral::for_model(&fixtures::flip(q));
        let r = reduced_resolvent(&spec, &[1.0]).unwrap();
        let mut ev: Vec<f64> = eigenvalues(&r.s).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0 / (2.0 * q - 2.0)).abs() < 1e-12);
        assert!(ev[1].abs() < 1e-12);
        assert!(r.residual < 1e-12 && r.annihilation < 1e-12);
    }

    #[test]
    fn identity_coin_is_degenerate() {
        let spec = Spectral::for_model(&fixtures::deterministic(fixtures::identity2()));
        let rep = check_assumption_s(&spec, 8, DELTA_FLOOR).unwrap();
        assert!(!rep.passed);
        assert!(rep.first_failure.unwrap().contains("degenerate"));
    }

    #[test]
    fn hadamard_has_peripheral_spectrum() {
        let spec = Spectral::for_model(&fixtures::deterministic(fixtures::hadamard()));
        let rep = check_assumption_s(&spec, 8, DELTA_FLOOR).unwrap();
        assert!(!rep.passed && !rep.full_pass);
    }

    #[test]
    fn flip_fails_on_full_fiber_only() {
        let spec = Spectral::for_model(&fixtures::flip(0.5));
        let rep = check_assumption_s(&spec, 8, DELTA_FLOOR).unwrap();
        assert!(rep.passed);
        assert!(!rep.full_pass);
    }
}
