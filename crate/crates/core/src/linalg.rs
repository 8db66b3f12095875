//! Dense complex linear algebra helpers on top of nalgebra.
//!
//! Eigenvalues come from the complex Schur form; eigenvectors are recovered by
//! triangular substitution on the Schur factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// `exp(i z)` for complex `z`.
pub fn expi(z: C64) -> C64 {
    (I * z).exp()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Kronecker product `a ⊗ b` with row index `i * b.nrows() + k`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::default() {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `‖U*U - I‖_max`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - identity(n)))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().fold(0.0_f64, |a, &b| a.max(b))
}

/// Number of singular values below `tol * max(1, σ_max)` plus the column deficit.
pub fn nullity(m: &CMat, tol: f64) -> usize {
    let (r, cols) = m.shape();
    if r == 0 {
        return cols;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b)).max(1.0);
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    cols - rank
}

/// Solve `a x = b` by LU, failing on a singular system.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

/// Weighted inner product `Σ w_i conj(a_i) b_i`.
pub fn wdot(w: &[f64], a: &CVec, b: &CVec) -> C64 {
    let mut s = C64::default();
    for i in 0..a.len() {
        s += a[i].conj() * b[i] * w[i];
    }
    s
}

pub fn wnorm(w: &[f64], a: &CVec) -> f64 {
    wdot(w, a, a).re.max(0.0).sqrt()
}

/// Eigen-decomposition of a general complex matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Right eigenvectors as columns, unit Euclidean norm.
    pub right: CMat,
    /// Left eigenvectors as columns (`w* A = λ w*`), unit Euclidean norm.
    pub left: CMat,
}

impl Eigen {
    /// Backward residual `‖A v - λ v‖` for eigenpair `j`.
    pub fn residual(&self, a: &CMat, j: usize) -> f64 {
        let v = self.right.column(j).into_owned();
        (a * &v - v * self.values[j]).norm()
    }
}

fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    if let Some(s) = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 1000 * (n + 1)) {
        return Ok(s.unpack());
    }
    // Highly structured inputs (permutation blocks) can stall the shifted QR
    // iteration; a fixed unitary change of basis breaks the structure.
    let v = scrambler(n);
    let b = v.adjoint() * a * &v;
    let s = nalgebra::linalg::Schur::try_new(b, f64::EPSILON, 1000 * (n + 1)).ok_or_else(|| {
        Error::Eigen(format!(
            "complex Schur iteration did not converge for\n{a:.6e}"
        ))
    })?;
    let (q, t) = s.unpack();
    Ok((v * q, t))
}

fn scrambler(n: usize) -> CMat {
    let mut s: u64 = 0x2545f4914f6cdd1d;
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    };
    let m = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
    m.qr().q()
}

/// Eigenvalues only.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Full eigen-decomposition with left and right eigenvectors.
pub fn eigen(a: &CMat) -> Result<Eigen> {
    let n = a.nrows();
    let (q, t) = schur(a)?;
    let scale = max_abs(&t).max(1.0);
    let small = f64::EPSILON * scale;
    let guard = |z: C64| {
        if z.norm() < small {
            C64::new(small, 0.0)
        } else {
            z
        }
    };
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut right = CMat::zeros(n, n);
    let mut left = CMat::zeros(n, n);
    for k in 0..n {
        let lam = values[k];
        let mut y = CVec::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::default();
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[l];
            }
            y[j] = -s / guard(t[(j, j)] - lam);
        }
        let v = &q * y;
        let nv = v.norm();
        right.set_column(k, &(v / C64::new(nv, 0.0)));

        // T* u = conj(λ) u, T* lower triangular.
        let mut u = CVec::zeros(n);
        u[k] = C64::new(1.0, 0.0);
        for j in (k + 1)..n {
            let mut s = C64::default();
            for l in k..j {
                s += t[(l, j)].conj() * u[l];
            }
            u[j] = -s / guard(t[(j, j)].conj() - lam.conj());
        }
        let w = &q * u;
        let nw = w.norm();
        left.set_column(k, &(w / C64::new(nw, 0.0)));
    }
    Ok(Eigen {
        values,
        right,
        left,
    })
}

/// `|⟨a, b⟩| / (‖a‖ ‖b‖)`.
pub fn overlap(a: &CVec, b: &CVec) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dotc(b).norm() / (na * nb)
}
