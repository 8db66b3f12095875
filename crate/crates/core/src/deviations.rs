//! Moderate and large deviation rate functions and the CLT covariance read
//! off the scaled cumulant generating function.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::averaged_distribution_bruteforce;
use crate::linalg::{c, eigenvalues, C64};
use crate::model::WalkModel;
use crate::optimize::{
    fd_gradient_hessian, min_eigenvalue, nelder_mead, newton_maximize, richardson_hessian,
};
use crate::spectral::{diffusion_matrix_analytic, lambda1_branch, DiffusionResult, Spectral};
use crate::transfer::torus_grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Moderate,
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaximumKind {
    /// `p ↦ ⟨y, D(p) y⟩` constant on the grid.
    Constant,
    /// Nondegenerate isolated maximum.
    Isolated,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModerateValue {
    /// `(1/2) ⟨y, D(p₁) y⟩`.
    pub value: f64,
    pub t_max: Vec<f64>,
    pub kind: MaximumKind,
}

fn quad(d: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            s += y[i] * d[i][j] * y[j];
        }
    }
    s
}

/// Fields whose spread over the grid is below this are treated as constant.
pub const CONSTANT_TOL: f64 = 1e-9;

/// `(1/2) max_p ⟨y, D(p) y⟩`, grid maximum refined by Newton steps on the
/// analytic `D(p)`.
pub fn moderate_quadratic(
    spec: &Spectral,
    diffusion: &DiffusionResult,
    y: &[f64],
) -> Result<ModerateValue> {
    let (imax, qmax) = diffusion
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, quad(&p.d, y)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidInput("empty diffusion grid".into()))?;
    let t0 = diffusion.points[imax].t.clone();
    if diffusion.variation <= CONSTANT_TOL || y.iter().all(|v| *v == 0.0) {
        return Ok(ModerateValue {
            value: 0.5 * qmax,
            t_max: t0,
            kind: MaximumKind::Constant,
        });
    }
    let h = 2.0 * std::f64::consts::PI / diffusion.grid as f64;
    let mut f = |t: &[f64]| -> Result<f64> { Ok(quad(&diffusion_matrix_analytic(spec, t)?.d, y)) };
    match newton_maximize(&mut f, &t0, h / 4.0, h)? {
        Some((t, _)) => {
            let v = f(&t)?.max(qmax);
            Ok(ModerateValue {
                value: 0.5 * v,
                t_max: t,
                kind: MaximumKind::Isolated,
            })
        }
        None => Err(Error::Hypothesis(format!(
            "p ↦ ⟨y, D(p) y⟩ has a degenerate non-constant maximum near t = {t0:?} (y = {y:?}); \
             the moderate deviation principle needs nondegenerate maxima"
        ))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LegendrePoint {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub on_boundary: bool,
}

/// `sup_{y ∈ [−b, b]^d} ⟨x, y⟩ − f(y)` by a coarse grid followed by Nelder–Mead.
pub fn legendre(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x: &[f64],
    half_width: f64,
) -> Result<LegendrePoint> {
    let d = x.len();
    let per: usize = match d {
        1 => 41,
        2 => 13,
        _ => 7,
    };
    let lo = vec![-half_width; d];
    let hi = vec![half_width; d];
    let total = per.pow(d as u32);
    let objective =
        |y: &[f64]| -> Result<f64> { Ok(f(y)? - x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()) };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for idx in 0..total {
        let mut r = idx;
        let y: Vec<f64> = (0..d)
            .map(|_| {
                let i = r % per;
                r /= per;
                -half_width + 2.0 * half_width * i as f64 / (per - 1) as f64
            })
            .collect();
        let v = objective(&y)?;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((y, v));
        }
    }
    let (y0, _) = best.expect("grid is nonempty");
    let spacing = 2.0 * half_width / (per - 1) as f64;
    let mut obj = |y: &[f64]| objective(y);
    let m = nelder_mead(&mut obj, &y0, spacing / 2.0, &lo, &hi, 1e-15, 4000)?;
    let on_boundary = m.x.iter().any(|v| v.abs() >= half_width * (1.0 - 1e-6));
    Ok(LegendrePoint {
        value: -m.value,
        argmax: m.x,
        on_boundary,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFunctionSample {
    pub mode: Mode,
    pub x_grid: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub argmax: Vec<Vec<f64>>,
    /// Half-width of the dual search box.
    pub y_domain: f64,
    pub valid: Vec<bool>,
    pub notes: Vec<String>,
}

/// `Λ*(x) = sup_y ⟨y, x⟩ − (1/2)⟨y, D(p₁(y)) y⟩`. A supremum on the box
/// boundary doubles the box once; a second boundary hit is an error.
pub fn moderate_rate_function(
    spec: &Spectral,
    diffusion: &DiffusionResult,
    x_grid: &[Vec<f64>],
    y_box: f64,
) -> Result<RateFunctionSample> {
    let f = |y: &[f64]| -> Result<f64> { Ok(moderate_quadratic(spec, diffusion, y)?.value) };
    let mut notes = Vec::new();
    let mut box_used = y_box;
    let results: Vec<Result<LegendrePoint>> = x_grid
        .par_iter()
        .map(|x| {
            let first = legendre(&f, x, y_box)?;
            if !first.on_boundary {
                return Ok(first);
            }
            let second = legendre(&f, x, 2.0 * y_box)?;
            if second.on_boundary {
                return Err(Error::Hypothesis(format!(
                    "supremum for x = {x:?} lies on the boundary of the enlarged box [-{}, {}]",
                    2.0 * y_box,
                    2.0 * y_box
                )));
            }
            Ok(second)
        })
        .collect();
    let pts: Vec<LegendrePoint> = results.into_iter().collect::<Result<_>>()?;
    if pts.iter().any(|p| p.argmax.iter().any(|v| v.abs() > y_box)) {
        box_used = 2.0 * y_box;
        notes.push(format!("dual box enlarged to half-width {box_used}"));
    }
    Ok(RateFunctionSample {
        mode: Mode::Moderate,
        x_grid: x_grid.to_vec(),
        values: pts.iter().map(|p| p.value).collect(),
        argmax: pts.iter().map(|p| p.argmax.clone()).collect(),
        y_domain: box_used,
        valid: vec![true; pts.len()],
        notes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaBar {
    pub value: f64,
    /// Torus coordinates of the maximiser of `|λ₁(−iy, ·)|`.
    pub t_max: Vec<f64>,
    /// `‖∇_p λ₁(−iy, p₁)‖` by central differences.
    pub gradient_norm: f64,
    /// Whether the stationarity hypothesis holds (`gradient_norm < 1e-6`).
    pub valid: bool,
}

pub const STATIONARITY_TOL: f64 = 1e-6;

fn tilted(y: &[f64]) -> Vec<C64> {
    y.iter().map(|&v| c(0.0, -v)).collect()
}

/// `Λ̄(y) = −y·r̄ + ln λ₁(−iy, p₁(y))` with `p₁(y)` maximising `|λ₁(−iy, p)|`.
pub fn large_dev_lambda_bar(
    spec: &Spectral,
    drift: &[f64],
    y: &[f64],
    grid: usize,
) -> Result<LambdaBar> {
    let d = spec.d();
    let k = tilted(y);
    let ydr: f64 = y.iter().zip(drift).map(|(a, b)| a * b).sum();
    let lam = |t: &[f64]| -> Result<C64> { Ok(lambda1_branch(&spec.restricted, &k, t)?.value) };
    if y.iter().all(|v| *v == 0.0) {
        return Ok(LambdaBar {
            value: 0.0,
            t_max: vec![0.0; d],
            gradient_norm: 0.0,
            valid: true,
        });
    }
    let pts = torus_grid(d, grid);
    let vals: Vec<Result<f64>> = pts.par_iter().map(|t| Ok(lam(t)?.norm())).collect();
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let (imax, vmax) = vals
        .iter()
        .cloned()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is nonempty");
    let spread = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut t = pts[imax].clone();
    if vmax - spread > 1e-13 {
        let h = 2.0 * std::f64::consts::PI / grid as f64;
        let mut f = |t: &[f64]| -> Result<f64> { Ok(lam(t)?.norm()) };
        if let Some((tn, _)) = newton_maximize(&mut f, &t, h / 4.0, h)? {
            if f(&tn)? >= vmax {
                t = tn;
            }
        }
    }
    let l = lam(&t)?;
    // Gradient in p: t = G p, so ∇_p = Gᵀ ∇_t.
    let hstep = 1e-5;
    let mut gt = vec![C64::default(); d];
    for (i, g) in gt.iter_mut().enumerate() {
        let mut tp = t.clone();
        tp[i] += hstep;
        let mut tm = t.clone();
        tm[i] -= hstep;
        *g = (lam(&tp)? - lam(&tm)?) / (2.0 * hstep);
    }
    let gmap = &spec.family.torus_map;
    let gradient_norm = (0..d)
        .map(|l| {
            let z: C64 = (0..d).map(|i| gt[i] * gmap[i][l]).sum();
            z.norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    Ok(LambdaBar {
        value: -ydr + l.ln().re,
        t_max: t,
        gradient_norm,
        valid: gradient_norm < STATIONARITY_TOL,
    })
}

/// Samples per doubling step when following the branch outwards.
const PATH_SAMPLES: usize = 32;

/// Largest radius (doubling from 1/8, at most `cap`) on which the branch
/// through 1 can be followed along real and imaginary `k` on a coarse torus
/// grid. Along every ray the followed eigenvalue must stay separated from the
/// rest of the spectrum by a quarter of its separation at `k = 0`, which keeps
/// the path away from eigenvalue collisions; along imaginary rays it must also
/// stay strictly dominant.
pub fn continuation_radius(spec: &Spectral, cap: f64) -> f64 {
    let d = spec.d();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            dirs.push(v);
        }
    }
    if d > 1 {
        for mask in 0..(1usize << d) {
            let v: Vec<f64> = (0..d)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            dirs.push(v);
        }
    }
    let per_dim = if d == 1 { 4 } else { 2 };
    let mut rays: Vec<Ray> = Vec::new();
    for t in torus_grid(d, per_dim) {
        for dir in &dirs {
            for imaginary in [true, false] {
                match Ray::start(spec, t.clone(), imaginary, dir.clone()) {
                    Some(ray) => rays.push(ray),
                    None => return 0.0,
                }
            }
        }
    }
    let mut reached = 0.0;
    let mut start = 0.0;
    let mut r = 0.125;
    while r <= cap + 1e-12 {
        let ok = rays
            .par_iter_mut()
            .map(|ray| ray.advance(spec, start, r))
            .reduce(|| true, |a, b| a && b);
        if !ok {
            break;
        }
        reached = r;
        start = r;
        r *= 2.0;
    }
    reached
}

fn separation(values: &[C64], at: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != at)
        .map(|(_, z)| (z - values[at]).norm())
        .fold(f64::INFINITY, f64::min)
}

struct Ray {
    t: Vec<f64>,
    imaginary: bool,
    dir: Vec<f64>,
    floor: f64,
    current: C64,
}

impl Ray {
    fn k(&self, s: f64) -> Vec<C64> {
        self.dir
            .iter()
            .map(|v| {
                if self.imaginary {
                    c(0.0, -v * s)
                } else {
                    c(v * s, 0.0)
                }
            })
            .collect()
    }

    fn start(spec: &Spectral, t: Vec<f64>, imaginary: bool, dir: Vec<f64>) -> Option<Self> {
        let mut ray = Ray {
            t,
            imaginary,
            dir,
            floor: 0.0,
            current: c(1.0, 0.0),
        };
        let ev = eigenvalues(&spec.restricted.matrix(&ray.k(0.0), &ray.t)).ok()?;
        let i =
            (0..ev.len()).min_by(|&a, &b| (ev[a] - 1.0).norm().total_cmp(&(ev[b] - 1.0).norm()))?;
        ray.floor = 0.25 * separation(&ev, i).min(1.0);
        ray.current = ev[i];
        Some(ray)
    }

    /// Follows the eigenvalue from `|k| = from` to `|k| = to`.
    fn advance(&mut self, spec: &Spectral, from: f64, to: f64) -> bool {
        for j in 1..=PATH_SAMPLES {
            let s = from + (to - from) * j as f64 / PATH_SAMPLES as f64;
            let Ok(ev) = eigenvalues(&spec.restricted.matrix(&self.k(s), &self.t)) else {
                return false;
            };
            let Some(i) = (0..ev.len()).min_by(|&a, &b| {
                (ev[a] - self.current)
                    .norm()
                    .total_cmp(&(ev[b] - self.current).norm())
            }) else {
                return false;
            };
            if separation(&ev, i) < self.floor {
                return false;
            }
            if self.imaginary {
                let lm = ev[i].norm();
                let others = ev
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, z)| z.norm())
                    .fold(0.0, f64::max);
                if lm <= others * (1.0 + 1e-9) {
                    return false;
                }
            }
            self.current = ev[i];
        }
        true
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CltHessian {
    pub matrix: Vec<Vec<f64>>,
    pub stencil_disagreement: f64,
    pub noisy: bool,
}

/// Finite-difference Hessian of `Λ̄` at 0.
pub fn clt_hessian(spec: &Spectral, drift: &[f64], grid: usize, h: f64) -> Result<CltHessian> {
    let d = spec.d();
    let mut f = |y: &[f64]| -> Result<C64> {
        Ok(c(large_dev_lambda_bar(spec, drift, y, grid)?.value, 0.0))
    };
    let (hess, dis) = richardson_hessian(&mut f, d, h)?;
    Ok(CltHessian {
        matrix: hess
            .iter()
            .map(|r| r.iter().map(|z| z.re).collect())
            .collect(),
        stencil_disagreement: dis,
        noisy: dis > 1e-4,
    })
}

/// `Λ̄*(x)`, the supremum restricted to the box of half-width equal to the
/// discovered continuation radius. Points whose supremum sits on the box
/// boundary, or whose maximiser fails the stationarity check, are flagged.
pub fn large_rate_function(
    spec: &Spectral,
    drift: &[f64],
    x_grid: &[Vec<f64>],
    grid: usize,
) -> Result<RateFunctionSample> {
    let kappa = continuation_radius(spec, 4.0);
    if kappa == 0.0 {
        return Err(Error::Hypothesis(
            "no continuation radius found for the tilted branch".into(),
        ));
    }
    let hess = clt_hessian(spec, drift, grid, 1e-3)?;
    let convex = min_eigenvalue(&hess.matrix) > 1e-8;
    let f = |y: &[f64]| -> Result<f64> { Ok(large_dev_lambda_bar(spec, drift, y, grid)?.value) };
    let results: Vec<Result<(LegendrePoint, bool)>> = x_grid
        .par_iter()
        .map(|x| {
            let p = legendre(&f, x, kappa)?;
            let stationary = large_dev_lambda_bar(spec, drift, &p.argmax, grid)?.valid;
            Ok((p, stationary))
        })
        .collect();
    let pts: Vec<(LegendrePoint, bool)> = results.into_iter().collect::<Result<_>>()?;
    let mut notes = vec![format!("continuation radius {kappa}")];
    if !convex {
        notes.push("Hessian of the cumulant generator at 0 is not positive definite".into());
    }
    Ok(RateFunctionSample {
        mode: Mode::Large,
        x_grid: x_grid.to_vec(),
        values: pts.iter().map(|p| p.0.value).collect(),
        argmax: pts.iter().map(|p| p.0.argmax.clone()).collect(),
        y_domain: kappa,
        valid: pts
            .iter()
            .map(|(p, s)| convex && *s && !p.on_boundary)
            .collect(),
        notes,
    })
}

/// `(1/n) ln E[e^{y·(X_n − n r̄)}]` from the brute-force averaged distribution.
pub fn scaled_cgf_bruteforce(model: &WalkModel, y: &[f64], n: usize, budget: u64) -> Result<f64> {
    let dist = averaged_distribution_bruteforce(model, n, budget)?;
    let drift = model.drift();
    let shift: f64 = y.iter().zip(&drift).map(|(a, b)| a * b).sum::<f64>() * n as f64;
    let m: f64 = dist
        .entries()
        .iter()
        .map(|(x, p)| p * (y.iter().zip(x).map(|(a, &b)| a * b as f64).sum::<f64>() - shift).exp())
        .sum();
    Ok(m.ln() / n as f64)
}

/// Constant in the bound `|Λ̄(y)| ≤ c₀ ‖y‖`: `c₀ = ρ + ‖r̄‖`.
pub fn growth_constant(model: &WalkModel) -> f64 {
    let r = model.drift();
    model.jump.rho() as f64 + r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Gradient and Hessian of a scalar function by central differences; exposed
/// for checks of curvature near a maximiser.
pub fn local_curvature(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    fd_gradient_hessian(f, x, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::spectral::averaged_diffusion;

    #[test]
    fn flip_lambda_bar_matches_tilted_chain() {
        let q = 0.6;
        let m = fixtures::flip(q);
        let spec = Spectral::for_model(&m);
        for &y in &[0.2, -0.5, 1.0] {
            let lb = large_dev_lambda_bar(&spec, &[0.0], &[y], 4).unwrap();
            let ch = y.cosh();
            let want = (q * ch + (q * q * ch * ch - 2.0 * q + 1.0).sqrt()).ln();
            assert!((lb.value - want).abs() < 1e-12);
            assert!(lb.valid);
        }
    }

    #[test]
    fn flip_moderate_quadratic_is_constant() {
        let q = 0.75;
        let m = fixtures::flip(q);
        let spec = Spectral::for_model(&m);
        let diff = averaged_diffusion(&spec, &[0.0], 8).unwrap();
        let v = moderate_quadratic(&spec, &diff, &[0.7]).unwrap();
        assert_eq!(v.kind, MaximumKind::Constant);
        assert!((v.value - 0.5 * 0.49 * 3.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_of_quadratic() {
        let f = |y: &[f64]| Ok(0.5 * 2.0 * y[0] * y[0]);
        let p = legendre(&f, &[0.8], 3.0).unwrap();
        assert!((p.value - 0.16).abs() < 1e-10);
        assert!(!p.on_boundary);
    }
}
