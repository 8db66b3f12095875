//! Exact evolution of the walker for a given disorder path on a finite window
//! that the walker provably never leaves.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{kernel_matrix, CoinEnsemble, Initial, WalkModel};
use crate::rng::{categorical, master_rng, trial_rng, Rng};

/// Default cap on `|Ω|^n` for exhaustive enumeration.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Amplitudes on the box `[−L, L]^d`, stored densely.
#[derive(Clone, Debug)]
pub struct LatticeState {
    pub d: usize,
    pub states: usize,
    pub half: i64,
    pub amp: Vec<C64>,
}

impl LatticeState {
    pub fn zeros(d: usize, states: usize, half: i64) -> Self {
        let side = (2 * half + 1) as usize;
        Self {
            d,
            states,
            half,
            amp: vec![C64::default(); side.pow(d as u32) * states],
        }
    }

    pub fn side(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    pub fn num_sites(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn site_index(&self, x: &[i64]) -> Option<usize> {
        let side = self.side() as i64;
        let mut idx = 0i64;
        let mut mul = 1i64;
        for &xi in x {
            if xi.abs() > self.half {
                return None;
            }
            idx += (xi + self.half) * mul;
            mul *= side;
        }
        Some(idx as usize)
    }

    pub fn site(&self, idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut r = idx;
        (0..self.d)
            .map(|_| {
                let v = (r % side) as i64 - self.half;
                r /= side;
                v
            })
            .collect()
    }

    /// State localized at the origin.
    pub fn localized(d: usize, half: i64, phi: &CVec) -> Self {
        let mut s = Self::zeros(d, phi.len(), half);
        let o = s.site_index(&vec![0; d]).unwrap();
        for (a, z) in phi.iter().enumerate() {
            s.amp[o * phi.len() + a] = *z;
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Position distribution `Σ_τ |ψ(x)_τ|²` per site.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amp
            .chunks(self.states)
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

/// One unitary step: `ψ'(x + r(τ))_τ += (C(x) ψ(x))_τ` with `C(x) = coins[field(x)]`.
pub fn step_unitary(
    state: &LatticeState,
    field: impl Fn(usize) -> usize,
    coins: &[CMat],
    jump: &[Vec<i64>],
) -> Result<LatticeState> {
    let s = state.states;
    let mut out = LatticeState::zeros(state.d, s, state.half);
    let mut v = vec![C64::default(); s];
    for site in 0..state.num_sites() {
        let psi = &state.amp[site * s..(site + 1) * s];
        if psi.iter().all(|z| *z == C64::default()) {
            continue;
        }
        let cm = &coins[field(site)];
        for (a, va) in v.iter_mut().enumerate() {
            *va = (0..s).map(|b| cm[(a, b)] * psi[b]).sum();
        }
        let x = state.site(site);
        for (tau, r) in jump.iter().enumerate() {
            let y: Vec<i64> = x.iter().zip(r).map(|(a, b)| a + b).collect();
            let j = out.site_index(&y).ok_or_else(|| Error::WindowOverflow {
                site: y.clone(),
                half_width: state.half,
            })?;
            out.amp[j * s + tau] += v[tau];
        }
    }
    Ok(out)
}

/// A disorder realization `ω(1..n)`.
#[derive(Clone, Debug, Serialize)]
pub struct PathSample {
    pub steps: Vec<usize>,
    /// `ln(p(ω₁) Π P(ω_j, ω_{j+1}))`, kept in log form since long paths underflow.
    pub log_weight: f64,
    pub seed: Option<u64>,
}

impl PathSample {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

pub fn path_log_weight(coins: &CoinEnsemble, steps: &[usize]) -> f64 {
    if steps.is_empty() {
        return 0.0;
    }
    let mut w = coins.p[steps[0]].ln();
    for k in steps.windows(2) {
        w += coins.kernel[k[0]][k[1]].ln();
    }
    w
}

pub fn sample_markov_path_with(coins: &CoinEnsemble, n: usize, rng: &mut Rng) -> PathSample {
    let mut steps = Vec::with_capacity(n);
    if n > 0 {
        steps.push(categorical(rng, &coins.p));
        for j in 1..n {
            let prev = steps[j - 1];
            steps.push(categorical(rng, &coins.kernel[prev]));
        }
    }
    let log_weight = path_log_weight(coins, &steps);
    PathSample {
        steps,
        log_weight,
        seed: None,
    }
}

/// `ω₁ ~ p`, `ω_{j+1} ~ P(ω_j, ·)`, reproducible from `seed`.
pub fn sample_markov_path(coins: &CoinEnsemble, n: usize, seed: u64) -> PathSample {
    let mut rng = master_rng(seed);
    let mut path = sample_markov_path_with(coins, n, &mut rng);
    path.seed = Some(seed);
    path
}

/// Probability distribution on the box `[−L, L]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub d: usize,
    pub half: i64,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn zeros(d: usize, half: i64) -> Self {
        let side = (2 * half + 1) as usize;
        Self {
            d,
            half,
            probs: vec![0.0; side.pow(d as u32)],
        }
    }

    fn layout(&self) -> LatticeState {
        LatticeState {
            d: self.d,
            states: 1,
            half: self.half,
            amp: Vec::new(),
        }
    }

    pub fn get(&self, k: &[i64]) -> f64 {
        self.layout()
            .site_index(k)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    /// Adds `w` at site `k`; false when `k` lies outside the box.
    pub fn add_at(&mut self, k: &[i64], w: f64) -> bool {
        match self.layout().site_index(k) {
            Some(i) => {
                self.probs[i] += w;
                true
            }
            None => false,
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `(site, probability)` pairs in index order, including zeros.
    pub fn entries(&self) -> Vec<(Vec<i64>, f64)> {
        let l = self.layout();
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (l.site(i), p))
            .collect()
    }

    pub fn add_scaled(&mut self, other: &Distribution, w: f64) {
        for (a, b) in self.probs.iter_mut().zip(&other.probs) {
            *a += w * b;
        }
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        let half = self.half.max(other.half);
        let mut worst = 0.0_f64;
        let probe = Distribution::zeros(self.d, half);
        for (k, _) in probe.entries() {
            worst = worst.max((self.get(&k) - other.get(&k)).abs());
        }
        worst
    }

    /// `Σ_k w_k e^{i y·k}`.
    pub fn characteristic(&self, y: &[C64]) -> C64 {
        characteristic_function_empirical(self, y)
    }

    /// `Σ_k w_k k_i k_j` and `Σ_k w_k k_i`.
    pub fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut mean = vec![0.0; self.d];
        let mut second = vec![vec![0.0; self.d]; self.d];
        for (k, w) in self.entries() {
            for i in 0..self.d {
                mean[i] += w * k[i] as f64;
                for j in 0..self.d {
                    second[i][j] += w * (k[i] * k[j]) as f64;
                }
            }
        }
        (mean, second)
    }
}

/// `Σ_k dist(k) e^{i y·k}`; `y` may be complex.
pub fn characteristic_function_empirical(dist: &Distribution, y: &[C64]) -> C64 {
    let mut s = C64::default();
    for (k, w) in dist.entries() {
        if w == 0.0 {
            continue;
        }
        let phase: C64 = k.iter().zip(y).map(|(&a, b)| b * a as f64).sum();
        s += (crate::linalg::I * phase).exp() * w;
    }
    s
}

/// Pure components `(weight, state)` of the initial condition on a window of
/// half-width `half`.
fn initial_components(model: &WalkModel, half: i64) -> Vec<(f64, LatticeState)> {
    let d = model.d();
    let s = model.states();
    match &model.initial {
        Initial::Vector(v) => vec![(1.0, LatticeState::localized(d, half, v))],
        Initial::Kernel(entries) => {
            let (sites, m) = kernel_matrix(model, entries);
            let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let mut out = Vec::new();
            for (j, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam <= 1e-14 {
                    continue;
                }
                let mut st = LatticeState::zeros(d, s, half);
                for (i, x) in sites.iter().enumerate() {
                    let idx = st.site_index(x).unwrap();
                    for a in 0..s {
                        st.amp[idx * s + a] = eig.eigenvectors[(i * s + a, j)];
                    }
                }
                out.push((lam, st));
            }
            out
        }
    }
}

/// Half-width that contains `n` steps from the initial support.
pub fn window_half(model: &WalkModel, n: usize) -> i64 {
    model.jump.rho() * n as i64 + model.initial_radius()
}

struct Stepper<'a> {
    model: &'a WalkModel,
    coset: Vec<usize>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a WalkModel, half: i64) -> Self {
        let probe = LatticeState::zeros(model.d(), 1, half);
        let coset = (0..probe.num_sites())
            .map(|i| model.repr.reduce(&probe.site(i)))
            .collect();
        Self { model, coset }
    }

    fn step(&self, st: &LatticeState, omega: usize) -> Result<LatticeState> {
        let rep = &self.model.repr;
        step_unitary(
            st,
            |site| rep.representative_sigma(self.coset[site])[omega],
            &self.model.coins.coins,
            &self.model.jump.r,
        )
    }
}

fn components_distribution(comps: &[(f64, LatticeState)], d: usize, half: i64) -> Distribution {
    let mut dist = Distribution::zeros(d, half);
    for (w, st) in comps {
        for (a, p) in dist.probs.iter_mut().zip(st.probabilities()) {
            *a += w * p;
        }
    }
    dist
}

fn path_distribution_any(model: &WalkModel, steps: &[usize]) -> Result<Distribution> {
    let half = window_half(model, steps.len());
    let stepper = Stepper::new(model, half);
    let mut comps = initial_components(model, half);
    for &omega in steps {
        for (_, st) in comps.iter_mut() {
            *st = stepper.step(st, omega)?;
        }
    }
    Ok(components_distribution(&comps, model.d(), half))
}

/// `W_k(n)` for a fixed disorder path with coin field `C_j(x) = Ω[σ_x(ω(j))]`.
pub fn distribution_for_path(
    model: &WalkModel,
    path: &PathSample,
    n: usize,
) -> Result<Distribution> {
    if matches!(model.initial, Initial::Kernel(_)) {
        return Err(Error::Unsupported(
            "density-kernel initial conditions are handled by the transfer module".into(),
        ));
    }
    if path.steps.len() < n {
        return Err(Error::InvalidInput(format!(
            "path has {} steps, need {n}",
            path.steps.len()
        )));
    }
    path_distribution_any(model, &path.steps[..n])
}

/// `w_k(n) = E W_k(n)` by exhaustive enumeration of `Ω^n`.
pub fn averaged_distribution_bruteforce(
    model: &WalkModel,
    n: usize,
    budget: u64,
) -> Result<Distribution> {
    let f = model.num_coins() as u64;
    let count = (0..n).try_fold(1u64, |acc, _| acc.checked_mul(f));
    match count {
        Some(c) if c <= budget => {}
        _ => {
            return Err(Error::Budget(format!(
                "|Ω|^n = {f}^{n} exceeds the enumeration budget {budget}; use Monte Carlo or the transfer module"
            )))
        }
    }
    let half = window_half(model, n);
    let stepper = Stepper::new(model, half);
    let ce = &model.coins;
    let d = model.d();

    // Split the tree into prefixes for the parallel map.
    let mut prefixes: Vec<Vec<usize>> = vec![Vec::new()];
    while prefixes.len() < 64 && prefixes[0].len() < n {
        let mut next = Vec::new();
        for p in &prefixes {
            for w in 0..ce.len() {
                let prob = match p.last() {
                    None => ce.p[w],
                    Some(&l) => ce.kernel[l][w],
                };
                if prob > 0.0 {
                    let mut q = p.clone();
                    q.push(w);
                    next.push(q);
                }
            }
        }
        prefixes = next;
    }

    let parts: Vec<Result<Distribution>> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut comps = initial_components(model, half);
            let mut weight = 1.0;
            for (j, &w) in prefix.iter().enumerate() {
                weight *= if j == 0 {
                    ce.p[w]
                } else {
                    ce.kernel[prefix[j - 1]][w]
                };
                for (_, st) in comps.iter_mut() {
                    *st = stepper.step(st, w)?;
                }
            }
            let mut acc = Distribution::zeros(d, half);
            descend(
                &stepper,
                ce,
                comps,
                prefix.last().copied(),
                weight,
                n - prefix.len(),
                &mut acc,
            )?;
            Ok(acc)
        })
        .collect();
    let mut total = Distribution::zeros(d, half);
    for p in parts {
        total.add_scaled(&p?, 1.0);
    }
    Ok(total)
}

fn descend(
    stepper: &Stepper,
    ce: &CoinEnsemble,
    comps: Vec<(f64, LatticeState)>,
    last: Option<usize>,
    weight: f64,
    remaining: usize,
    acc: &mut Distribution,
) -> Result<()> {
    if remaining == 0 {
        let dist = components_distribution(&comps, acc.d, acc.half);
        acc.add_scaled(&dist, weight);
        return Ok(());
    }
    for w in 0..ce.len() {
        let prob = match last {
            None => ce.p[w],
            Some(l) => ce.kernel[l][w],
        };
        if prob == 0.0 {
            continue;
        }
        let next: Vec<(f64, LatticeState)> = comps
            .iter()
            .map(|(lam, st)| Ok((*lam, stepper.step(st, w)?)))
            .collect::<Result<_>>()?;
        descend(
            stepper,
            ce,
            next,
            Some(w),
            weight * prob,
            remaining - 1,
            acc,
        )?;
    }
    Ok(())
}

/// Empirical mean of `W_k(n)` over sampled paths with per-site standard errors.
#[derive(Clone, Debug)]
pub struct MonteCarloDistribution {
    pub mean: Distribution,
    pub std_err: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

pub fn averaged_distribution_monte_carlo(
    model: &WalkModel,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloDistribution> {
    let half = window_half(model, n);
    let d = model.d();
    let mut sum = Distribution::zeros(d, half);
    let mut sq = vec![0.0; sum.probs.len()];
    let chunk = 1024;
    let mut start = 0;
    while start < trials {
        let end = (start + chunk).min(trials);
        let part: Vec<Result<Distribution>> = (start..end)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, t as u64);
                let path = sample_markov_path_with(&model.coins, n, &mut rng);
                path_distribution_any(model, &path.steps)
            })
            .collect();
        for p in part {
            let p = p?;
            for (i, v) in p.probs.iter().enumerate() {
                sq[i] += v * v;
            }
            sum.add_scaled(&p, 1.0);
        }
        start = end;
    }
    let t = trials as f64;
    let mut mean = sum;
    for v in mean.probs.iter_mut() {
        *v /= t;
    }
    let std_err = mean
        .probs
        .iter()
        .zip(&sq)
        .map(|(m, s)| ((s / t - m * m).max(0.0) / (t - 1.0).max(1.0)).sqrt())
        .collect();
    Ok(MonteCarloDistribution {
        mean,
        std_err,
        trials,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::c;

    fn path(steps: Vec<usize>) -> PathSample {
        PathSample {
            steps,
            log_weight: 0.0,
            seed: None,
        }
    }

    #[test]
    fn identity_coin_drifts() {
        let m = fixtures::deterministic(fixtures::identity2());
        let d = distribution_for_path(&m, &path(vec![0; 5]), 5).unwrap();
        assert!((d.get(&[5]) - 1.0).abs() < 1e-15);
        let d0 = distribution_for_path(&m, &path(vec![]), 0).unwrap();
        assert!((d0.get(&[0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hadamard_two_steps() {
        let m = fixtures::deterministic(fixtures::hadamard());
        let d1 = distribution_for_path(&m, &path(vec![0]), 1).unwrap();
        assert!((d1.get(&[1]) - 0.5).abs() < 1e-15 && (d1.get(&[-1]) - 0.5).abs() < 1e-15);
        let d2 = distribution_for_path(&m, &path(vec![0, 0]), 2).unwrap();
        assert!((d2.get(&[-2]) - 0.25).abs() < 1e-15);
        assert!((d2.get(&[0]) - 0.5).abs() < 1e-15);
        assert!((d2.get(&[2]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn one_step_flip_average() {
        let q = 0.3;
        let w = averaged_distribution_bruteforce(&fixtures::flip(q), 1, DEFAULT_BUDGET).unwrap();
        assert!((w.get(&[1]) - q).abs() < 1e-15);
        assert!((w.get(&[-1]) - (1.0 - q)).abs() < 1e-15);
    }

    #[test]
    fn absorbing_chain_path_is_constant() {
        let ce = CoinEnsemble::new(
            vec![fixtures::pauli_x(), fixtures::pauli_z()],
            vec![0.4, 0.6],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        for seed in 0..20 {
            let p = sample_markov_path(&ce, 12, seed);
            assert!(p.steps.iter().all(|&s| s == p.steps[0]));
            assert!((p.weight() - ce.p[p.steps[0]]).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err =
            averaged_distribution_bruteforce(&fixtures::flip(0.5), 30, DEFAULT_BUDGET).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }

    #[test]
    fn symmetric_distribution_has_real_characteristic() {
        let w = averaged_distribution_bruteforce(&fixtures::flip(0.5), 4, DEFAULT_BUDGET).unwrap();
        let mut sym = w.clone();
        for (k, p) in w.entries() {
            let mk: Vec<i64> = k.iter().map(|v| -v).collect();
            let i = LatticeState {
                d: 1,
                states: 1,
                half: w.half,
                amp: vec![],
            }
            .site_index(&mk)
            .unwrap();
            sym.probs[i] = 0.5 * (p + w.get(&mk));
        }
        let z = characteristic_function_empirical(&sym, &[c(0.37, 0.0)]);
        assert!(z.im.abs() < 1e-14);
    }
}
