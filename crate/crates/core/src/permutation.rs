//! Walks whose coins are permutation matrices.
//!
//! With `C(π)` a permutation of the basis, a walker started in a basis state
//! stays in a basis state, so for a fixed disorder the position law is the
//! pushforward of the initial weights under a deterministic process `τ_j`.
//! Averaged over the disorder, `(τ_j, local coin)` is a Markov chain with
//! transition matrix `N`.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, FieldError, Result};
use crate::evolution::{sample_markov_path_with, window_half, Distribution, PathSample};
use crate::lattice::{compose, is_perm, Perm};
use crate::linalg::{c, eigen, eigenvalues, spectral_norm, CMat, CVec, C64};
use crate::model::{Initial, WalkModel};
use crate::optimize::richardson_hessian;
use crate::rng::{categorical, trial_rng, Rng};
use crate::spectral::{reduced_resolvent_with, verdict, Verdict, DELTA_FLOOR};

/// `C(π)` with `C_{στ} = δ_{σ, π(τ)}`.
pub fn permutation_coin(pi: &[usize]) -> Result<CMat> {
    if !is_perm(pi) {
        return Err(Error::InvalidModel(vec![FieldError {
            field: "permutation".into(),
            message: format!("{pi:?} is not a bijection"),
        }]));
    }
    let n = pi.len();
    let mut m = CMat::zeros(n, n);
    for (tau, &s) in pi.iter().enumerate() {
        m[(s, tau)] = c(1.0, 0.0);
    }
    Ok(m)
}

/// Reads a permutation off a 0/1 unitary, or `None` if it is not one.
pub fn as_permutation(m: &CMat) -> Option<Perm> {
    let n = m.nrows();
    let mut pi = vec![usize::MAX; n];
    for tau in 0..n {
        for s in 0..n {
            let z = m[(s, tau)];
            if (z - 1.0).norm() < 1e-12 {
                if pi[tau] != usize::MAX {
                    return None;
                }
                pi[tau] = s;
            } else if z.norm() > 1e-12 {
                return None;
            }
        }
    }
    if is_perm(&pi) {
        Some(pi)
    } else {
        None
    }
}

#[derive(Clone, Debug)]
pub struct PermutationModel {
    pub base: WalkModel,
    /// `π` for each coin, as an index map on the internal states.
    pub perms: Vec<Perm>,
    /// `|a_τ|²`.
    pub weights: Vec<f64>,
}

impl PermutationModel {
    pub fn new(base: WalkModel) -> Result<Self> {
        let mut errs = Vec::new();
        let mut perms = Vec::new();
        for (i, cm) in base.coins.coins.iter().enumerate() {
            match as_permutation(cm) {
                Some(p) => perms.push(p),
                None => errs.push(FieldError {
                    field: format!("coins[{i}]"),
                    message: "not a permutation matrix".into(),
                }),
            }
        }
        let weights = match &base.initial {
            Initial::Vector(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Initial::Kernel(_) => {
                errs.push(FieldError {
                    field: "initial".into(),
                    message: "permutation walks need a vector initial state at the origin".into(),
                });
                Vec::new()
            }
        };
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        Ok(Self {
            base,
            perms,
            weights,
        })
    }

    pub fn states(&self) -> usize {
        self.base.states()
    }

    pub fn num_coins(&self) -> usize {
        self.perms.len()
    }

    /// Permutation applied at site `x` when the disorder reads `ω`.
    fn local(&self, x: &[i64], omega: usize) -> &Perm {
        &self.perms[self.base.repr.act(x, omega)]
    }
}

/// `τ_0..τ_n` and the partial sums `S_0 = 0, S_j = Σ_{s ≤ j} r(τ_s)`.
#[derive(Clone, Debug, Serialize)]
pub struct TauPath {
    pub taus: Vec<usize>,
    pub positions: Vec<Vec<i64>>,
    pub seed: Option<u64>,
}

impl TauPath {
    pub fn end(&self) -> &[i64] {
        self.positions.last().expect("S_0 is always present")
    }
}

/// `τ_j = π_{σ_{S_{j−1}}(ω_j)}(τ_{j−1})` from a given start and disorder.
pub fn tau_process(pm: &PermutationModel, tau0: usize, steps: &[usize]) -> TauPath {
    let d = pm.base.d();
    let mut taus = vec![tau0];
    let mut positions = vec![vec![0i64; d]];
    let mut tau = tau0;
    let mut x = vec![0i64; d];
    for &omega in steps {
        tau = pm.local(&x, omega)[tau];
        for (xi, r) in x.iter_mut().zip(&pm.base.jump.r[tau]) {
            *xi += r;
        }
        taus.push(tau);
        positions.push(x.clone());
    }
    TauPath {
        taus,
        positions,
        seed: None,
    }
}

pub fn sample_tau_process_with(pm: &PermutationModel, n: usize, rng: &mut Rng) -> TauPath {
    let tau0 = categorical(rng, &pm.weights);
    let path = sample_markov_path_with(&pm.base.coins, n, rng);
    tau_process(pm, tau0, &path.steps)
}

/// `τ_0 ~ |a_τ|²`, then the disorder path; both drawn from stream 0 of `seed`.
pub fn sample_tau_process(pm: &PermutationModel, n: usize, seed: u64) -> TauPath {
    let mut rng = trial_rng(seed, 0);
    let mut p = sample_tau_process_with(pm, n, &mut rng);
    p.seed = Some(seed);
    p
}

/// `Σ_{τ_0} |a_{τ_0}|² δ_{S_n(τ_0)}` for a fixed disorder.
pub fn pushforward_distribution(
    pm: &PermutationModel,
    path: &PathSample,
    n: usize,
) -> Distribution {
    let half = window_half(&pm.base, n);
    let mut dist = Distribution::zeros(pm.base.d(), half);
    for (tau0, &w) in pm.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let tp = tau_process(pm, tau0, &path.steps[..n]);
        dist.add_at(tp.end(), w);
    }
    dist
}

/// Law of `(τ_0, …, τ_n)` averaged over the disorder, by enumeration of `Ω^n`.
pub fn path_law_bruteforce(
    pm: &PermutationModel,
    n: usize,
    budget: u64,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let f = pm.num_coins() as u64;
    let count = (0..n).try_fold(1u64, |acc, _| acc.checked_mul(f));
    match count {
        Some(cnt) if cnt.saturating_mul(pm.states() as u64) <= budget => {}
        _ => {
            return Err(Error::Budget(format!(
                "{}^{n} disorder paths times {} initial states exceed the budget {budget}",
                pm.num_coins(),
                pm.states()
            )))
        }
    }
    let coins = &pm.base.coins;
    let mut law: std::collections::BTreeMap<Vec<usize>, f64> = std::collections::BTreeMap::new();
    let mut steps = vec![0usize; n];
    let total = count.unwrap_or(1);
    for idx in 0..total {
        let mut r = idx;
        for s in steps.iter_mut() {
            *s = (r % f) as usize;
            r /= f;
        }
        let mut pw = if n == 0 { 1.0 } else { coins.p[steps[0]] };
        for w in steps.windows(2) {
            pw *= coins.kernel[w[0]][w[1]];
        }
        if pw == 0.0 {
            continue;
        }
        for (tau0, &a) in pm.weights.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let tp = tau_process(pm, tau0, &steps);
            *law.entry(tp.taus).or_insert(0.0) += a * pw;
        }
    }
    Ok(law.into_iter().collect())
}

/// The matrix `N` on `ℂ^{2d} ⊗ ℂ^{|Ω|}`, index `τ·|Ω| + π`, with its fixed vectors.
#[derive(Clone, Debug)]
pub struct NMatrix {
    pub n: CMat,
    /// All-ones, `Nᵀ ψ₁ = ψ₁`.
    pub psi1: CVec,
    /// `χ₁(τ, π) = p(π)`, `N χ₁ = χ₁`.
    pub chi1: CVec,
    pub states: usize,
    pub coins: usize,
}

impl NMatrix {
    pub fn index(&self, tau: usize, pi: usize) -> usize {
        tau * self.coins + pi
    }

    /// Residuals of the two fixed-vector identities.
    pub fn fixed_vector_residual(&self) -> f64 {
        let a = (self.n.transpose() * &self.psi1 - &self.psi1)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let b = (&self.n * &self.chi1 - &self.chi1)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        a.max(b)
    }

    /// `N(k) = diag(e^{i k·r(τ')}) N`; pass `k = −iy` for the real tilt.
    pub fn tilted(&self, pm: &PermutationModel, k: &[C64]) -> CMat {
        let mut m = self.n.clone();
        for tau in 0..self.states {
            let z: C64 = k
                .iter()
                .zip(&pm.base.jump.r[tau])
                .map(|(a, &b)| a * b as f64)
                .sum();
            let ph = (crate::linalg::I * z).exp();
            for pi in 0..self.coins {
                let row = self.index(tau, pi);
                for col in 0..m.ncols() {
                    m[(row, col)] *= ph;
                }
            }
        }
        m
    }

    /// Norm in `ℓ²(1/χ₁)`, in which `N` is a contraction.
    pub fn weighted_norm(&self, m: &CMat) -> f64 {
        let s: Vec<f64> = self.chi1.iter().map(|z| z.re.sqrt()).collect();
        let scaled = CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (s[j] / s[i]));
        spectral_norm(&scaled)
    }
}

pub fn build_n(pm: &PermutationModel) -> NMatrix {
    let s = pm.states();
    let f = pm.num_coins();
    let coins = &pm.base.coins;
    let repr = &pm.base.repr;
    let mut n = CMat::zeros(s * f, s * f);
    for tau in 0..s {
        let shift = &pm.base.jump.r[tau];
        for pi in 0..f {
            let from = repr.act(shift, pi);
            for pp in 0..f {
                let tp = pm.perms[pp][tau];
                n[(tp * f + pp, tau * f + pi)] += c(coins.kernel[from][pp], 0.0);
            }
        }
    }
    let psi1 = CVec::from_element(s * f, c(1.0, 0.0));
    let chi1 = CVec::from_fn(s * f, |i, _| c(coins.p[i % f], 0.0));
    NMatrix {
        n,
        psi1,
        chi1,
        states: s,
        coins: f,
    }
}

/// `⟨Ψ₁ | N(y)^{n−1} B(y)⟩` with `B(y)` the tilted law of `(τ_1, ω_1)`.
pub fn characteristic_via_n(pm: &PermutationModel, nm: &NMatrix, n: usize, k: &[C64]) -> C64 {
    if n == 0 {
        return c(1.0, 0.0);
    }
    let f = nm.coins;
    let mut b = CVec::zeros(nm.n.nrows());
    for (tau0, &w) in pm.weights.iter().enumerate() {
        for pi in 0..f {
            b[nm.index(pm.perms[pi][tau0], pi)] += c(w * pm.base.coins.p[pi], 0.0);
        }
    }
    let nk = nm.tilted(pm, k);
    // D(y) B, then N(y)^{n−1}.
    let mut v = CVec::from_fn(b.len(), |i, _| {
        let tau = i / f;
        let z: C64 = k
            .iter()
            .zip(&pm.base.jump.r[tau])
            .map(|(a, &r)| a * r as f64)
            .sum();
        b[i] * (crate::linalg::I * z).exp()
    });
    for _ in 1..n {
        v = &nk * v;
    }
    nm.psi1.dotc(&v)
}

#[derive(Clone, Debug, Serialize)]
pub struct NReport {
    pub verdict: Verdict,
    /// `max |P₁ − |χ₁⟩⟨Ψ₁|/(2d)|`.
    pub projector_residual: f64,
    pub spectral_radius: f64,
    pub weighted_norm: f64,
    pub fixed_vector_residual: f64,
    pub passed: bool,
}

pub fn check_assumption_s_tilde(nm: &NMatrix) -> Result<NReport> {
    let ev = eigenvalues(&nm.n)?;
    let v = verdict(&ev, DELTA_FLOOR);
    let spectral_radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let projector_residual = if v.passed {
        let e = eigen(&nm.n)?;
        let j = (0..ev.len())
            .min_by(|&a, &b| {
                (e.values[a] - 1.0)
                    .norm()
                    .total_cmp(&(e.values[b] - 1.0).norm())
            })
            .unwrap();
        let r = e.right.column(j).into_owned();
        let l = e.left.column(j).into_owned();
        let p = &r * l.adjoint() / l.dotc(&r);
        let want = &nm.chi1 * nm.psi1.adjoint() / c(nm.states as f64, 0.0);
        (p - want).iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(NReport {
        passed: v.passed,
        verdict: v,
        projector_residual,
        spectral_radius,
        weighted_norm: nm.weighted_norm(&nm.n),
        fixed_vector_residual: nm.fixed_vector_residual(),
    })
}

/// Drift and covariance of the classical process.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaCovariance {
    pub vbar: Vec<f64>,
    /// Second-order coefficient `−∂²λ_top` of the tilted `N`.
    pub lambda_coefficient: Vec<Vec<f64>>,
    /// `Σ = −∂² ln λ_top = lambda_coefficient − v̄ v̄ᵀ`.
    pub sigma: Vec<Vec<f64>>,
    /// Finite-difference Hessian of `ln λ_top(N(−iy))` at 0.
    pub fd_hessian: Vec<Vec<f64>>,
    pub discrepancy: f64,
}

fn lifted(nm: &NMatrix, pm: &PermutationModel, i: usize, weighted: bool) -> CVec {
    let f = nm.coins;
    CVec::from_fn(nm.n.nrows(), |idx, _| {
        let r = pm.base.jump.r[idx / f][i] as f64;
        let w = if weighted {
            pm.base.coins.p[idx % f]
        } else {
            1.0
        };
        c(r * w, 0.0)
    })
}

/// Top eigenvalue of `N(−iy)`; `N(−iy)` is nonnegative so this is its Perron root.
pub fn perron_root(nm: &NMatrix, pm: &PermutationModel, y: &[f64]) -> Result<f64> {
    let k: Vec<C64> = y.iter().map(|&v| c(0.0, -v)).collect();
    let ev = eigenvalues(&nm.tilted(pm, &k))?;
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Second-order coefficient of `λ_top` through the reduced resolvent of `N`,
/// validated against a finite-difference Hessian of `ln λ_top`.
pub fn sigma_covariance(pm: &PermutationModel) -> Result<SigmaCovariance> {
    let nm = build_n(pm);
    let rep = check_assumption_s_tilde(&nm)?;
    if !rep.passed {
        return Err(Error::Hypothesis(format!(
            "gap condition fails for N: {}",
            rep.verdict.reason.unwrap_or_default()
        )));
    }
    let d = pm.base.d();
    let s2 = nm.states as f64;
    let vbar = pm.base.drift();
    let res = reduced_resolvent_with(&nm.n, &nm.chi1, &nm.psi1)?;
    let up: Vec<CVec> = (0..d).map(|i| lifted(&nm, pm, i, false)).collect();
    let down: Vec<CVec> = (0..d).map(|i| lifted(&nm, pm, i, true)).collect();
    let mut lc = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let rr: f64 = pm.base.jump.r.iter().map(|r| (r[i] * r[j]) as f64).sum();
            let a = up[i].dotc(&(&res.s * &down[j]));
            let b = up[j].dotc(&(&res.s * &down[i]));
            lc[i][j] = -rr / s2 + 2.0 * vbar[i] * vbar[j] - (a + b).re / s2;
        }
    }
    let sigma: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| lc[i][j] - vbar[i] * vbar[j]).collect())
        .collect();
    let mut f = |y: &[f64]| -> Result<C64> { Ok(c(perron_root(&nm, pm, y)?.ln(), 0.0)) };
    let (h, _) = richardson_hessian(&mut f, d, 1e-3)?;
    let fd: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|z| z.re).collect()).collect();
    let mut discrepancy = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            discrepancy = discrepancy.max((fd[i][j] - sigma[i][j]).abs());
        }
    }
    Ok(SigmaCovariance {
        vbar,
        lambda_coefficient: lc,
        sigma,
        fd_hessian: fd,
        discrepancy,
    })
}

/// One-step transition matrix `P = Σ_π p(π) C(π)ᵀ` of the direction chain.
pub fn direction_chain(pm: &PermutationModel) -> Vec<Vec<f64>> {
    let s = pm.states();
    let mut p = vec![vec![0.0; s]; s];
    for (pi, perm) in pm.perms.iter().enumerate() {
        for tau in 0..s {
            p[tau][perm[tau]] += pm.base.coins.p[pi];
        }
    }
    p
}

/// Whether some power `P^m`, `m ≤ (s−1)² + 1`, is entrywise positive.
pub fn is_primitive(p: &[Vec<f64>]) -> bool {
    let s = p.len();
    let mut m: Vec<Vec<bool>> = p
        .iter()
        .map(|r| r.iter().map(|&v| v > 0.0).collect())
        .collect();
    let base = m.clone();
    for _ in 0..((s - 1) * (s - 1) + 1) {
        if m.iter().all(|r| r.iter().all(|&b| b)) {
            return true;
        }
        m = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| (0..s).any(|k| m[i][k] && base[k][j]))
                    .collect()
            })
            .collect();
    }
    m.iter().all(|r| r.iter().all(|&b| b))
}

/// Covariance for an i.i.d. coin law through the direction chain:
/// `Σ_ij = −(1/2d)⟨r_i, r_j⟩ + r̄_i r̄_j − (1/2d)(⟨r_i, S r_j⟩ + ⟨r_j, S r_i⟩)`.
pub fn iid_sigma_covariance(pm: &PermutationModel) -> Result<Vec<Vec<f64>>> {
    let coins = &pm.base.coins;
    if !coins.is_rank_one(1e-12) {
        return Err(Error::Hypothesis(
            "coin law is not i.i.d. (kernel rows differ from p)".into(),
        ));
    }
    let p = direction_chain(pm);
    if !is_primitive(&p) {
        return Err(Error::Hypothesis(
            "direction chain is reducible or periodic".into(),
        ));
    }
    let s = pm.states();
    let d = pm.base.d();
    let pm_mat = CMat::from_fn(s, s, |i, j| c(p[i][j], 0.0));
    let ones = CVec::from_element(s, c(1.0, 0.0));
    let res = reduced_resolvent_with(&pm_mat, &ones, &ones)?;
    let rbar = pm.base.drift();
    let rv: Vec<CVec> = (0..d)
        .map(|i| CVec::from_fn(s, |t, _| c(pm.base.jump.r[t][i] as f64, 0.0)))
        .collect();
    let inv = 1.0 / s as f64;
    Ok((0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let rr = rv[i].dotc(&rv[j]).re;
                    let a = rv[i].dotc(&(&res.s * &rv[j])).re;
                    let b = rv[j].dotc(&(&res.s * &rv[i])).re;
                    -inv * rr + rbar[i] * rbar[j] - inv * (a + b)
                })
                .collect()
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalDiffusion {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Mean of `Z = (S_n − n r̄)/√n`.
    pub mean: Vec<f64>,
    pub mean_std_err: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// 95% bootstrap intervals of the covariance entries.
    pub covariance_ci: Vec<Vec<[f64; 2]>>,
    /// Reference covariance `Σ`.
    pub sigma: Vec<Vec<f64>>,
    /// Per-coordinate sup distance to `N(0, Σ_ii)` at lattice midpoints.
    pub ks: Vec<f64>,
    pub ks_ci: Vec<[f64; 2]>,
    /// `S_n / n` spread: largest coordinate standard deviation.
    pub lln_spread: f64,
}

const BOOTSTRAP: usize = 200;

/// Sup distance between the empirical CDF and `N(0, var)`, evaluated between
/// consecutive distinct sample values so lattice atoms are not penalised.
pub fn ks_midpoint(sorted: &[f64], var: f64) -> f64 {
    let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
    let n = sorted.len() as f64;
    let mut worst = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j < sorted.len() {
            let mid = 0.5 * (sorted[i] + sorted[j]);
            worst = worst.max((j as f64 / n - normal.cdf(mid)).abs());
        }
        i = j;
    }
    worst
}

fn covariance_of(samples: &[Vec<f64>], idx: &[usize], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t = idx.len() as f64;
    let mut mean = vec![0.0; d];
    for &k in idx {
        for i in 0..d {
            mean[i] += samples[k][i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= t);
    let mut cov = vec![vec![0.0; d]; d];
    for &k in idx {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (samples[k][i] - mean[i]) * (samples[k][j] - mean[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= (t - 1.0).max(1.0);
        }
    }
    (mean, cov)
}

fn quantiles(mut v: Vec<f64>) -> [f64; 2] {
    v.sort_by(f64::total_cmp);
    let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
    [at(0.025), at(0.975)]
}

/// Samples `(S_n − n r̄)/√n` over independent disorder and initial state draws.
pub fn empirical_random_diffusion(
    pm: &PermutationModel,
    sigma: &[Vec<f64>],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalDiffusion> {
    if trials < 2 {
        return Err(Error::InvalidInput("at least two trials are needed".into()));
    }
    let d = pm.base.d();
    let rbar = pm.base.drift();
    let sq = (n as f64).sqrt();
    let samples: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let p = sample_tau_process_with(pm, n, &mut rng);
            p.end()
                .iter()
                .zip(&rbar)
                .map(|(&x, r)| (x as f64 - n as f64 * r) / sq)
                .collect()
        })
        .collect();
    let all: Vec<usize> = (0..trials).collect();
    let (mean, covariance) = covariance_of(&samples, &all, d);
    let mean_std_err = (0..d)
        .map(|i| (covariance[i][i] / trials as f64).sqrt())
        .collect();
    let ks_of = |idx: &[usize]| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let mut v: Vec<f64> = idx.iter().map(|&k| samples[k][i]).collect();
                v.sort_by(f64::total_cmp);
                ks_midpoint(&v, sigma[i][i])
            })
            .collect()
    };
    let ks = ks_of(&all);
    // Bootstrap replicates from a stream disjoint from the trial streams.
    let reps: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..BOOTSTRAP)
        .into_par_iter()
        .map(|b| {
            let mut rng = trial_rng(seed ^ 0x9e37_79b9_7f4a_7c15, b as u64);
            let idx: Vec<usize> = (0..trials)
                .map(|_| rand::Rng::random_range(&mut rng, 0..trials))
                .collect();
            (covariance_of(&samples, &idx, d).1, ks_of(&idx))
        })
        .collect();
    let covariance_ci = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| quantiles(reps.iter().map(|r| r.0[i][j]).collect()))
                .collect()
        })
        .collect();
    let ks_ci = (0..d)
        .map(|i| quantiles(reps.iter().map(|r| r.1[i]).collect()))
        .collect();
    let lln_spread = (0..d)
        .map(|i| covariance[i][i].sqrt() / sq)
        .fold(0.0, f64::max);
    Ok(EmpiricalDiffusion {
        n,
        trials,
        seed,
        mean,
        mean_std_err,
        covariance,
        covariance_ci,
        sigma: sigma.to_vec(),
        ks,
        ks_ci,
        lln_spread,
    })
}

/// `C(π) C(σ) = C(π ∘ σ)` residual for a pair.
pub fn composition_residual(a: &[usize], b: &[usize]) -> Result<f64> {
    let lhs = permutation_coin(a)? * permutation_coin(b)?;
    let rhs = permutation_coin(&compose(&a.to_vec(), &b.to_vec()))?;
    Ok((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max))
}
