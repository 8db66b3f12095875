//! Coins drawn independently at every time step from a single law, the same
//! coin at every site. The averaged density matrix evolves under
//! `Q = E(C ⊗ C̄)` on `ℂ^{2d} ⊗ ℂ^{2d}` and the characteristic function is a
//! torus integral of `⟨Ψ₁ | M(Y_v)ⁿ χ₀⟩`, `M(Y) = D(Y) Q`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, FieldError, Result};
use crate::family::TiltedFamily;
use crate::lattice::SiteRepresentation;
use crate::linalg::{c, kron, spectral_norm, CMat, CVec, C64};
use crate::model::{CoinEnsemble, Initial, JumpFunction, WalkModel};
use crate::spectral::{
    averaged_diffusion, check_assumption_s, DiffusionResult, SReport, Spectral, DELTA_FLOOR,
};
use crate::transfer::torus_grid;

#[derive(Clone, Debug)]
pub struct TensorModel {
    pub jump: JumpFunction,
    pub coins: Vec<CMat>,
    pub probs: Vec<f64>,
    pub q: CMat,
    /// `φ₀ ⊗ φ̄₀`.
    pub chi0: CVec,
    /// `Σ_τ |τ ⊗ τ⟩`.
    pub psi1: CVec,
    pub phi0: CVec,
}

/// `Q = Σ prob · C ⊗ C̄`, index `τ·2d + τ'`.
pub fn build_tensor_q(coins: &[CMat], probs: &[f64]) -> Result<CMat> {
    let total: f64 = probs.iter().sum();
    if coins.len() != probs.len() || coins.is_empty() {
        return Err(Error::InvalidModel(vec![FieldError {
            field: "p".into(),
            message: format!("{} probabilities for {} coins", probs.len(), coins.len()),
        }]));
    }
    if (total - 1.0).abs() > 1e-12 || probs.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidModel(vec![FieldError {
            field: "p".into(),
            message: format!("probabilities must be nonnegative and sum to 1 (sum {total})"),
        }]));
    }
    let n = coins[0].nrows();
    let mut q = CMat::zeros(n * n, n * n);
    for (cm, &p) in coins.iter().zip(probs) {
        q += kron(cm, &cm.map(|z| z.conj())) * c(p, 0.0);
    }
    Ok(q)
}

impl TensorModel {
    pub fn new(jump: JumpFunction, coins: Vec<CMat>, probs: Vec<f64>, phi0: CVec) -> Result<Self> {
        let s = jump.states();
        let mut errs = Vec::new();
        for (i, cm) in coins.iter().enumerate() {
            if cm.nrows() != s || cm.ncols() != s {
                errs.push(FieldError {
                    field: format!("coins[{i}]"),
                    message: format!("expected {s}x{s}"),
                });
            }
        }
        if phi0.len() != s {
            errs.push(FieldError {
                field: "initial".into(),
                message: format!("expected length {s}"),
            });
        }
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        let q = build_tensor_q(&coins, &probs)?;
        let chi0 = kron(
            &CMat::from_column_slice(s, 1, phi0.as_slice()),
            &CMat::from_column_slice(s, 1, phi0.map(|z| z.conj()).as_slice()),
        )
        .column(0)
        .into_owned();
        let psi1 = CVec::from_fn(s * s, |i, _| {
            if i / s == i % s {
                c(1.0, 0.0)
            } else {
                C64::default()
            }
        });
        Ok(Self {
            jump,
            coins,
            probs,
            q,
            chi0,
            psi1,
            phi0,
        })
    }

    /// From an i.i.d. walk model with trivial site representation.
    pub fn from_walk(model: &WalkModel) -> Result<Self> {
        if !model.coins.is_rank_one(1e-12) {
            return Err(Error::Unsupported(
                "coin law is not independent in time".into(),
            ));
        }
        if !model.repr.is_trivial() {
            return Err(Error::Unsupported(
                "coins must be the same at every site".into(),
            ));
        }
        let Initial::Vector(phi0) = &model.initial else {
            return Err(Error::Unsupported(
                "tensor model needs a vector initial state".into(),
            ));
        };
        Self::new(
            model.jump.clone(),
            model.coins.coins.clone(),
            model.coins.p.clone(),
            phi0.clone(),
        )
    }

    /// The same law as a rank-one Markov kernel with trivial site representation.
    pub fn to_walk(&self) -> Result<WalkModel> {
        let d = self.jump.d;
        WalkModel::new(
            self.jump.clone(),
            CoinEnsemble::iid(self.coins.clone(), self.probs.clone())?,
            SiteRepresentation::trivial(d, self.coins.len()),
            Initial::Vector(self.phi0.clone()),
        )
    }

    pub fn d(&self) -> usize {
        self.jump.d
    }

    /// `r̄ = (1/2d) Σ_τ r(τ)`.
    pub fn drift(&self) -> Vec<f64> {
        let s = self.jump.states() as f64;
        (0..self.d())
            .map(|i| self.jump.r.iter().map(|r| r[i] as f64).sum::<f64>() / s)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q_norm(&self) -> f64 {
        spectral_norm(&self.q)
    }

    /// `N > 2nρ + 1`.
    pub fn min_grid_size(&self, n: usize) -> usize {
        2 * n * self.jump.rho() as usize + 2
    }
}

/// `M(k, v)` with row phase `e^{i k·r(τ) + i v·(r(τ') − r(τ))}`.
pub fn tensor_family(tm: &TensorModel) -> TiltedFamily {
    let s = tm.jump.states();
    let d = tm.d();
    let r = &tm.jump.r;
    let mut k_coeff = Vec::with_capacity(s * s);
    let mut t_coeff = Vec::with_capacity(s * s);
    let mut class_key = Vec::with_capacity(s * s);
    for a in 0..s {
        for b in 0..s {
            k_coeff.push(r[a].iter().map(|&v| v as f64).collect());
            t_coeff.push(
                r[a].iter()
                    .zip(&r[b])
                    .map(|(&x, &y)| (y - x) as f64)
                    .collect(),
            );
            class_key.push(r[a].iter().chain(&r[b]).cloned().collect());
        }
    }
    TiltedFamily {
        d,
        template: tm.q.clone(),
        k_coeff,
        t_coeff,
        class_key,
        weights: vec![1.0; s * s],
        reference: tm.psi1.clone(),
        torus_map: (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    }
}

/// `E Φ_n(y) = ∫ ⟨Ψ₁ | M(y, v)ⁿ χ₀⟩ dṽ` by the exact `N`-point rule.
pub fn averaged_char_uncorrelated(
    tm: &TensorModel,
    n: usize,
    y: &[C64],
    grid: usize,
) -> Result<C64> {
    let min = tm.min_grid_size(n);
    if grid < min {
        return Err(Error::GridTooSmall {
            given: grid,
            minimum: min,
        });
    }
    let fam = tensor_family(tm);
    let pts = torus_grid(tm.d(), grid);
    let terms: Vec<C64> = pts
        .par_iter()
        .map(|v| {
            let m = fam.matrix(y, v);
            let mut x = tm.chi0.clone();
            for _ in 0..n {
                x = &m * x;
            }
            tm.psi1.dotc(&x)
        })
        .collect();
    let sum: C64 = terms.iter().sum();
    Ok(sum / pts.len() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct UncorrelatedDiffusion {
    pub report: SReport,
    pub result: Option<DiffusionResult>,
}

/// Drift and diffusion matrix from the tensor family; `result` is `None`
/// when the gap condition fails.
pub fn uncorrelated_diffusion(tm: &TensorModel, grid: usize) -> Result<UncorrelatedDiffusion> {
    let spec = Spectral::for_family(tensor_family(tm));
    let report = check_assumption_s(&spec, grid, DELTA_FLOOR)?;
    let result = if report.passed {
        Some(averaged_diffusion(&spec, &tm.drift(), grid)?)
    } else {
        None
    };
    Ok(UncorrelatedDiffusion { report, result })
}
