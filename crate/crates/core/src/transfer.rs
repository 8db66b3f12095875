//! The fibered one-step operator `M̂(k, p)` acting on
//! `l²(B_Γ × Ω; M_{2d}(ℂ))`, its adjoint, the transformed initial datum and the
//! averaged characteristic function obtained by exact torus quadrature.
//!
//! Momenta on the torus are parametrized by coordinates `t ∈ [0, 2π)^d` with
//! `p = Σ_j t_j p*_j`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::TiltedFamily;
use crate::linalg::{c, expi, spectral_norm, wdot, CMat, CVec, C64};
use crate::model::{Initial, WalkModel};
use crate::rng::master_rng;

/// Index map for fiber vectors, entry `(x, η, a, b)` at `((x F + η) s + a) s + b`.
#[derive(Clone, Copy, Debug)]
pub struct FiberLayout {
    pub cosets: usize,
    pub coins: usize,
    pub states: usize,
}

impl FiberLayout {
    pub fn of(model: &WalkModel) -> Self {
        Self {
            cosets: model.repr.num_cosets(),
            coins: model.num_coins(),
            states: model.states(),
        }
    }

    pub fn dim(&self) -> usize {
        self.cosets * self.coins * self.states * self.states
    }

    pub fn index(&self, x: usize, eta: usize, a: usize, b: usize) -> usize {
        ((x * self.coins + eta) * self.states + a) * self.states + b
    }

    pub fn unpack(&self, i: usize) -> (usize, usize, usize, usize) {
        let s = self.states;
        let b = i % s;
        let a = (i / s) % s;
        let eta = (i / (s * s)) % self.coins;
        let x = i / (s * s * self.coins);
        (x, eta, a, b)
    }
}

/// Inner-product weights `p(η)` per fiber coordinate.
pub fn fiber_weights(model: &WalkModel) -> Vec<f64> {
    let lay = FiberLayout::of(model);
    (0..lay.dim())
        .map(|i| model.coins.p[lay.unpack(i).1])
        .collect()
}

/// `δ₀ ⊗ Id`.
pub fn delta_identity(model: &WalkModel) -> CVec {
    let lay = FiberLayout::of(model);
    let mut v = CVec::zeros(lay.dim());
    for eta in 0..lay.coins {
        for a in 0..lay.states {
            v[lay.index(0, eta, a, a)] = c(1.0, 0.0);
        }
    }
    v
}

/// `δ₀ ⊗ P_τ`.
pub fn delta_projector(model: &WalkModel, tau: usize) -> CVec {
    let lay = FiberLayout::of(model);
    let mut v = CVec::zeros(lay.dim());
    for eta in 0..lay.coins {
        v[lay.index(0, eta, tau, tau)] = c(1.0, 0.0);
    }
    v
}

pub fn inner(model: &WalkModel, a: &CVec, b: &CVec) -> C64 {
    wdot(&fiber_weights(model), a, b)
}

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn neg(a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| -x).collect()
}

fn dotc(k: &[C64], z: &[i64]) -> C64 {
    k.iter().zip(z).map(|(a, &b)| a * b as f64).sum()
}

fn dotf(t: &[f64], z: &[f64]) -> f64 {
    t.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// `(M̂(k,p) Ψ)(x; η) = Σ_{τ,τ',ζ} Q(η,ζ) e^{ik·r(τ')} e^{ip·(r(τ)−r(τ'))}
///   P_τ C[σ_{x−r(τ)} η] Ψ(x − r(τ) + r(τ'); σ_{−r(τ')} ζ) C[σ_{−r(τ')} η]* P_τ'`.
pub fn apply_fiber(model: &WalkModel, k: &[C64], t: &[f64], psi: &CVec) -> CVec {
    let lay = FiberLayout::of(model);
    let rep = &model.repr;
    let r = &model.jump.r;
    let coins = &model.coins.coins;
    let q = &model.coins.back;
    let mut out = CVec::zeros(lay.dim());
    for (xi, x) in rep.representatives.iter().enumerate() {
        for eta in 0..lay.coins {
            for tau in 0..lay.states {
                for taup in 0..lay.states {
                    let phase = expi(dotc(k, &r[taup]))
                        * expi(c(
                            dotf(t, &rep.torus_frequencies(&sub(&r[tau], &r[taup]))),
                            0.0,
                        ));
                    let c1 = &coins[rep.act(&sub(x, &r[tau]), eta)];
                    let c2 = &coins[rep.act(&neg(&r[taup]), eta)];
                    let xp = rep.reduce(&add(&sub(x, &r[tau]), &r[taup]));
                    let mut acc = C64::default();
                    for zeta in 0..lay.coins {
                        let qz = q[eta][zeta];
                        if qz == 0.0 {
                            continue;
                        }
                        let zp = rep.act(&neg(&r[taup]), zeta);
                        let mut s = C64::default();
                        for cc in 0..lay.states {
                            for e in 0..lay.states {
                                s += c1[(tau, cc)]
                                    * psi[lay.index(xp, zp, cc, e)]
                                    * c2[(taup, e)].conj();
                            }
                        }
                        acc += s * qz;
                    }
                    out[lay.index(xi, eta, tau, taup)] += acc * phase;
                }
            }
        }
    }
    out
}

/// `(M̂(k,p)* Φ)(x; η) = Σ_{τ,τ',ζ} P(η,ζ) e^{−i k̄·r(τ')} e^{−ip·(r(τ)−r(τ'))}
///   C[σ_x ζ]* P_τ Φ(x + r(τ) − r(τ'); σ_{r(τ')} ζ) P_τ' C[ζ]`.
pub fn apply_fiber_adjoint(model: &WalkModel, k: &[C64], t: &[f64], phi: &CVec) -> CVec {
    let lay = FiberLayout::of(model);
    let rep = &model.repr;
    let r = &model.jump.r;
    let coins = &model.coins.coins;
    let pk = &model.coins.kernel;
    let kbar: Vec<C64> = k.iter().map(|z| z.conj()).collect();
    let mut out = CVec::zeros(lay.dim());
    for (xi, x) in rep.representatives.iter().enumerate() {
        for eta in 0..lay.coins {
            let mut block = CMat::zeros(lay.states, lay.states);
            for zeta in 0..lay.coins {
                let pz = pk[eta][zeta];
                if pz == 0.0 {
                    continue;
                }
                let cl = &coins[rep.act(x, zeta)];
                let cr = &coins[zeta];
                let mut inner = CMat::zeros(lay.states, lay.states);
                for tau in 0..lay.states {
                    for taup in 0..lay.states {
                        let phase = expi(-dotc(&kbar, &r[taup]))
                            * expi(c(
                                -dotf(t, &rep.torus_frequencies(&sub(&r[tau], &r[taup]))),
                                0.0,
                            ));
                        let xp = rep.reduce(&sub(&add(x, &r[tau]), &r[taup]));
                        let zp = rep.act(&r[taup], zeta);
                        inner[(tau, taup)] += phi[lay.index(xp, zp, tau, taup)] * phase;
                    }
                }
                block += (cl.adjoint() * inner * cr) * c(pz, 0.0);
            }
            for a in 0..lay.states {
                for b in 0..lay.states {
                    out[lay.index(xi, eta, a, b)] = block[(a, b)];
                }
            }
        }
    }
    out
}

fn columns(dim: usize, f: impl Fn(&CVec) -> CVec) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for j in 0..dim {
        let mut e = CVec::zeros(dim);
        e[j] = c(1.0, 0.0);
        m.set_column(j, &f(&e));
    }
    m
}

/// Dense `M̂(k, p)`, built column by column from the action on basis vectors.
#[derive(Clone, Debug)]
pub struct FiberOperator {
    pub k: Vec<C64>,
    pub t: Vec<f64>,
    pub matrix: CMat,
}

pub fn build_fiber_operator(model: &WalkModel, k: &[C64], t: &[f64]) -> FiberOperator {
    let dim = model.fiber_dim();
    FiberOperator {
        k: k.to_vec(),
        t: t.to_vec(),
        matrix: columns(dim, |e| apply_fiber(model, k, t, e)),
    }
}

pub fn build_fiber_adjoint(model: &WalkModel, k: &[C64], t: &[f64]) -> FiberOperator {
    let dim = model.fiber_dim();
    FiberOperator {
        k: k.to_vec(),
        t: t.to_vec(),
        matrix: columns(dim, |e| apply_fiber_adjoint(model, k, t, e)),
    }
}

/// The three factors `(Σ(k,p), S, Q̃)` with `M̂ = Σ S Q̃`.
pub fn fiber_factors(model: &WalkModel, k: &[C64], t: &[f64]) -> (CMat, CMat, CMat) {
    let lay = FiberLayout::of(model);
    let dim = lay.dim();
    let rep = &model.repr;
    let r = &model.jump.r;
    let coins = &model.coins.coins;
    let q = &model.coins.back;
    let mut qt = CMat::zeros(dim, dim);
    let mut s = CMat::zeros(dim, dim);
    let mut sig = CMat::zeros(dim, dim);
    for (xi, x) in rep.representatives.iter().enumerate() {
        for eta in 0..lay.coins {
            let cl = &coins[rep.act(x, eta)];
            let cr = &coins[eta];
            for a in 0..lay.states {
                for b in 0..lay.states {
                    let row = lay.index(xi, eta, a, b);
                    for zeta in 0..lay.coins {
                        qt[(row, lay.index(xi, zeta, a, b))] += c(q[eta][zeta], 0.0);
                    }
                    // (C_l Φ C_r*)_{ab} = Σ_{ce} C_l[a,c] Φ[c,e] conj(C_r[b,e])
                    for cc in 0..lay.states {
                        for e in 0..lay.states {
                            s[(row, lay.index(xi, eta, cc, e))] += cl[(a, cc)] * cr[(b, e)].conj();
                        }
                    }
                    let phase = expi(dotc(k, &r[b]))
                        * expi(c(dotf(t, &rep.torus_frequencies(&sub(&r[a], &r[b]))), 0.0));
                    let xp = rep.reduce(&add(&sub(x, &r[a]), &r[b]));
                    let ep = rep.act(&neg(&r[b]), eta);
                    sig[(row, lay.index(xp, ep, a, b))] += phase;
                }
            }
        }
    }
    (sig, s, qt)
}

/// `M̂` as a row-phased family: `M̂(k, t) = diag(e^{ik·r(b) + i t·P^T(r(a)−r(b))}) M̂(0, 0)`.
pub fn fiber_family(model: &WalkModel) -> TiltedFamily {
    let lay = FiberLayout::of(model);
    let d = model.d();
    let zero_k = vec![C64::default(); d];
    let zero_t = vec![0.0; d];
    let template = build_fiber_operator(model, &zero_k, &zero_t).matrix;
    let r = &model.jump.r;
    let rep = &model.repr;
    let mut k_coeff = Vec::with_capacity(lay.dim());
    let mut t_coeff = Vec::with_capacity(lay.dim());
    let mut class_key = Vec::with_capacity(lay.dim());
    for i in 0..lay.dim() {
        let (_, _, a, b) = lay.unpack(i);
        k_coeff.push(r[b].iter().map(|&v| v as f64).collect());
        t_coeff.push(rep.torus_frequencies(&sub(&r[a], &r[b])));
        let mut key = r[a].clone();
        key.extend_from_slice(&r[b]);
        class_key.push(key);
    }
    TiltedFamily {
        d,
        template,
        k_coeff,
        t_coeff,
        class_key,
        weights: fiber_weights(model),
        reference: delta_identity(model),
        torus_map: rep
            .gamma_basis
            .iter()
            .map(|g| g.iter().map(|&v| v as f64).collect())
            .collect(),
    }
}

/// `ρ̂₀(x₀; η) = Σ_{(a,b): a−b ≡ x₀ mod Γ} e^{ip·(a−b) + ik·b} ρ₀(a, b)`, constant in `η`.
pub fn fourier_initial(model: &WalkModel, k: &[C64], t: &[f64]) -> CVec {
    let lay = FiberLayout::of(model);
    let rep = &model.repr;
    let mut v = CVec::zeros(lay.dim());
    let mut put = |x0: usize, m: &CMat, z: C64| {
        for eta in 0..lay.coins {
            for a in 0..lay.states {
                for b in 0..lay.states {
                    v[lay.index(x0, eta, a, b)] += m[(a, b)] * z;
                }
            }
        }
    };
    match &model.initial {
        Initial::Vector(phi) => {
            let m = phi * phi.adjoint();
            put(0, &m, c(1.0, 0.0));
        }
        Initial::Kernel(entries) => {
            for e in entries {
                let diff = sub(&e.x, &e.y);
                let x0 = rep.reduce(&diff);
                let z = expi(c(dotf(t, &rep.torus_frequencies(&diff)), 0.0) + dotc(k, &e.y));
                put(x0, &e.m, z);
            }
        }
    }
    v
}

/// `ρ_Γ = max_{τ,τ',j} |p*_j · (r(τ) − r(τ'))|`.
pub fn rho_gamma(model: &WalkModel) -> f64 {
    let r = &model.jump.r;
    let mut m = 0.0_f64;
    for a in r {
        for b in r {
            for f in model.repr.torus_frequencies(&sub(a, b)) {
                m = m.max(f.abs());
            }
        }
    }
    m
}

/// `max_j |p*_j · (a − b)|` over the support of the initial kernel.
pub fn initial_spread(model: &WalkModel) -> f64 {
    match &model.initial {
        Initial::Vector(_) => 0.0,
        Initial::Kernel(entries) => entries
            .iter()
            .flat_map(|e| model.repr.torus_frequencies(&sub(&e.x, &e.y)))
            .fold(0.0, |a: f64, f| a.max(f.abs())),
    }
}

/// Least admissible grid size: the smallest `N > 2(n ρ_Γ + κ) + 1`.
pub fn min_grid_size(model: &WalkModel, n: usize) -> usize {
    let bound = 2.0 * (n as f64 * rho_gamma(model) + initial_spread(model)) + 1.0;
    (bound + 1e-9).floor() as usize + 1
}

/// Uniform `N^d` grid of torus coordinates.
pub fn torus_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let v = (idx % n) as f64 * h;
                    idx /= n;
                    v
                })
                .collect()
        })
        .collect()
}

/// `Φ_n(y) = Σ_η p(η) ∫ tr(M̂(y,p)^n ρ̂₀)(0; η) dp̃` by exact uniform quadrature.
pub fn averaged_characteristic_fk(
    model: &WalkModel,
    n: usize,
    y: &[C64],
    grid: usize,
) -> Result<C64> {
    let fam = fiber_family(model);
    averaged_characteristic_fk_with(model, &fam, n, y, grid)
}

pub fn averaged_characteristic_fk_with(
    model: &WalkModel,
    fam: &TiltedFamily,
    n: usize,
    y: &[C64],
    grid: usize,
) -> Result<C64> {
    let minimum = min_grid_size(model, n);
    if grid < minimum {
        return Err(Error::GridTooSmall {
            given: grid,
            minimum,
        });
    }
    if y.len() != model.d() {
        return Err(Error::InvalidInput(format!(
            "y has {} components, expected {}",
            y.len(),
            model.d()
        )));
    }
    let pts = torus_grid(model.d(), grid);
    let vals: Vec<C64> = pts
        .par_iter()
        .map(|t| {
            let m = fam.matrix(y, t);
            let mut v = fourier_initial(model, y, t);
            for _ in 0..n {
                v = &m * v;
            }
            wdot(&fam.weights, &fam.reference, &v)
        })
        .collect();
    let mut s = C64::default();
    for v in vals {
        s += v;
    }
    Ok(s / pts.len() as f64)
}

/// Largest weighted operator norm over random real `(k, t)`.
#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub samples: usize,
    pub max_norm: f64,
    pub flagged: bool,
}

/// Norm in the `p`-weighted inner product: `‖W^{1/2} M W^{−1/2}‖₂`.
pub fn weighted_norm(weights: &[f64], m: &CMat) -> f64 {
    let s = CMat::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, j)] * (weights[i] / weights[j]).sqrt()
    });
    spectral_norm(&s)
}

pub fn operator_norm_bound_check(model: &WalkModel, samples: usize, seed: u64) -> NormReport {
    use rand::Rng;
    let fam = fiber_family(model);
    let mut rng = master_rng(seed);
    let pi = std::f64::consts::PI;
    let pts: Vec<(Vec<C64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let k = (0..model.d())
                .map(|_| c(rng.random_range(-pi..pi), 0.0))
                .collect();
            let t = (0..model.d())
                .map(|_| rng.random_range(0.0..2.0 * pi))
                .collect();
            (k, t)
        })
        .collect();
    let norms: Vec<f64> = pts
        .par_iter()
        .map(|(k, t)| weighted_norm(&fam.weights, &fam.matrix(k, t)))
        .collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    NormReport {
        samples,
        max_norm,
        flagged: max_norm > 1.0 + 1e-10,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::max_abs;

    #[test]
    fn row_phased_build_matches_literal_rule() {
        let m = fixtures::swap_markov(0.7);
        let fam = fiber_family(&m);
        let k = [c(0.31, 0.0)];
        let t = [1.3];
        let a = build_fiber_operator(&m, &k, &t).matrix;
        assert!(max_abs(&(a - fam.matrix(&k, &t))) < 1e-13);
    }

    #[test]
    fn trivial_deterministic_channel() {
        let h = fixtures::hadamard();
        let m = fixtures::deterministic(h.clone());
        let k = 0.4;
        let p = 0.9;
        let op = build_fiber_operator(&m, &[c(k, 0.0)], &[p]).matrix;
        // Entry (a,b) <- Σ_{ce} e^{ik r(b)} e^{ip(r(a)−r(b))} H[a,c] conj(H[b,e]) Ψ[c,e]
        let r = [1.0, -1.0];
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    for e in 0..2 {
                        let want = expi(c(k * r[b] + p * (r[a] - r[b]), 0.0))
                            * h[(a, cc)]
                            * h[(b, e)].conj();
                        assert!((op[(a * 2 + b, cc * 2 + e)] - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn localized_initial_is_momentum_independent() {
        let m = fixtures::swap_markov(0.7);
        let a = fourier_initial(&m, &[c(0.2, 0.0)], &[0.5]);
        let b = fourier_initial(&m, &[c(-1.1, 0.3)], &[4.0]);
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn grid_minimum() {
        let m = fixtures::flip(0.5);
        assert_eq!(rho_gamma(&m), 2.0);
        assert_eq!(min_grid_size(&m, 3), 14);
        let err = averaged_characteristic_fk(&m, 3, &[c(0.1, 0.0)], 13).unwrap_err();
        assert!(matches!(err, Error::GridTooSmall { minimum: 14, .. }));
    }
}
