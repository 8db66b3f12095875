//! Row-phased operator families `M(k, t) = diag(e^{i k·c_row + i t·c'_row}) T`.
//!
//! Both the fibered transfer operator and the uncorrelated tensor matrix have
//! this shape. The spectral pipeline works on the family restricted to the
//! smallest subspace containing the reference vector and invariant under all
//! adjoints `M(k, t)*`.

use std::collections::BTreeMap;

use crate::linalg::{wdot, wnorm, CMat, CVec, C64, I};

#[derive(Clone, Debug)]
pub struct TiltedFamily {
    pub d: usize,
    /// `T = M(0, 0)`.
    pub template: CMat,
    /// Per-row coefficient of `k`.
    pub k_coeff: Vec<Vec<f64>>,
    /// Per-row coefficient of the torus coordinate `t`.
    pub t_coeff: Vec<Vec<f64>>,
    /// Integer label of the character carried by each row.
    pub class_key: Vec<Vec<i64>>,
    /// Diagonal metric of the inner product.
    pub weights: Vec<f64>,
    /// Vector fixed by `M(0, t)` and `M(0, t)*` for every `t`.
    pub reference: CVec,
    /// Rows `γ_i` turning a momentum shift into a torus shift, `t_i = γ_i · p`.
    pub torus_map: Vec<Vec<f64>>,
}

impl TiltedFamily {
    pub fn dim(&self) -> usize {
        self.template.nrows()
    }

    pub fn row_phase(&self, row: usize, k: &[C64], t: &[f64]) -> C64 {
        let mut z = C64::default();
        for (ki, ci) in k.iter().zip(&self.k_coeff[row]) {
            z += ki * *ci;
        }
        for (ti, ci) in t.iter().zip(&self.t_coeff[row]) {
            z += ti * ci;
        }
        (I * z).exp()
    }

    pub fn phases(&self, k: &[C64], t: &[f64]) -> Vec<C64> {
        (0..self.dim()).map(|r| self.row_phase(r, k, t)).collect()
    }

    pub fn matrix(&self, k: &[C64], t: &[f64]) -> CMat {
        let ph = self.phases(k, t);
        let mut m = self.template.clone();
        for (r, z) in ph.iter().enumerate() {
            for c in 0..m.ncols() {
                m[(r, c)] *= z;
            }
        }
        m
    }

    /// `∂_{k_i} M` at `k = 0`.
    pub fn k_derivative(&self, t: &[f64], i: usize) -> CMat {
        let zero = vec![C64::default(); self.d];
        let mut m = self.matrix(&zero, t);
        for r in 0..m.nrows() {
            let f = I * self.k_coeff[r][i];
            for c in 0..m.ncols() {
                m[(r, c)] *= f;
            }
        }
        m
    }

    /// `∂_{k_i} ∂_{k_j} M` at `k = 0`.
    pub fn k_second_derivative(&self, t: &[f64], i: usize, j: usize) -> CMat {
        let zero = vec![C64::default(); self.d];
        let mut m = self.matrix(&zero, t);
        for r in 0..m.nrows() {
            let f = -self.k_coeff[r][i] * self.k_coeff[r][j];
            for c in 0..m.ncols() {
                m[(r, c)] *= f;
            }
        }
        m
    }

    /// Adjoint in the weighted inner product: `W⁻¹ A* W`.
    pub fn adjoint(&self, a: &CMat) -> CMat {
        let w = &self.weights;
        CMat::from_fn(a.ncols(), a.nrows(), |i, j| {
            a[(j, i)].conj() * (w[j] / w[i])
        })
    }

    /// Torus point `t − G k` corresponding to the momentum `p − k`.
    pub fn shift_torus(&self, t: &[f64], k: &[f64]) -> Vec<f64> {
        self.torus_map
            .iter()
            .zip(t)
            .map(|(g, ti)| ti - g.iter().zip(k).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Weighted-orthonormal basis of the smallest subspace containing the
    /// reference vector and invariant under every `M(k, t)*`.
    pub fn cyclic_basis(&self, tol: f64) -> CMat {
        let n = self.dim();
        let w = &self.weights;
        let mut classes: BTreeMap<&Vec<i64>, Vec<usize>> = BTreeMap::new();
        for (r, key) in self.class_key.iter().enumerate() {
            classes.entry(key).or_default().push(r);
        }
        // Component operators A_c = W⁻¹ T* E_c W.
        let tstar = self.template.adjoint();
        let apply = |rows: &[usize], u: &CVec| -> CVec {
            let mut out = CVec::zeros(n);
            for &r in rows {
                let coef = u[r] * w[r];
                if coef == C64::default() {
                    continue;
                }
                for i in 0..n {
                    out[i] += tstar[(i, r)] * coef;
                }
            }
            for i in 0..n {
                out[i] /= w[i];
            }
            out
        };
        let mut basis: Vec<CVec> = Vec::new();
        let push = |basis: &mut Vec<CVec>, mut v: CVec| -> bool {
            let before = wnorm(w, &v);
            if before == 0.0 {
                return false;
            }
            for _ in 0..2 {
                for b in basis.iter() {
                    let h = wdot(w, b, &v);
                    v -= b * h;
                }
            }
            let after = wnorm(w, &v);
            if after <= tol * before.max(1.0) {
                return false;
            }
            basis.push(v / C64::new(after, 0.0));
            true
        };
        push(&mut basis, self.reference.clone());
        let mut next = 0;
        while next < basis.len() {
            let u = basis[next].clone();
            for rows in classes.values() {
                let v = apply(rows, &u);
                push(&mut basis, v);
            }
            next += 1;
        }
        let mut v = CMat::zeros(n, basis.len());
        for (j, b) in basis.iter().enumerate() {
            v.set_column(j, b);
        }
        v
    }

    /// Compression onto the cyclic subspace.
    pub fn restrict(&self, tol: f64) -> Restricted {
        let v = self.cyclic_basis(tol);
        self.restrict_to(v)
    }

    /// Compression onto the full space (identity basis scaled to be weighted-orthonormal).
    pub fn unrestricted(&self) -> Restricted {
        let n = self.dim();
        let v = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(1.0 / self.weights[i].sqrt(), 0.0)
            } else {
                C64::default()
            }
        });
        self.restrict_to(v)
    }

    fn restrict_to(&self, v: CMat) -> Restricted {
        let w = &self.weights;
        let left = CMat::from_fn(v.ncols(), v.nrows(), |i, j| v[(j, i)].conj() * w[j]);
        let right = &self.template * &v;
        let reference = &left * &self.reference;
        Restricted {
            family: self.clone(),
            basis: v,
            left,
            right,
            reference,
        }
    }
}

/// `B(k, t) = V* W M(k, t) V` for a weighted-orthonormal basis `V` of an
/// `M*`-invariant subspace.
#[derive(Clone, Debug)]
pub struct Restricted {
    pub family: TiltedFamily,
    pub basis: CMat,
    /// `V* W`.
    pub left: CMat,
    /// `T V`.
    pub right: CMat,
    /// Coordinates of the reference vector.
    pub reference: CVec,
}

impl Restricted {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn d(&self) -> usize {
        self.family.d
    }

    fn scaled(&self, f: impl Fn(usize) -> C64) -> CMat {
        let mut l = self.left.clone();
        for c in 0..l.ncols() {
            let z = f(c);
            for r in 0..l.nrows() {
                l[(r, c)] *= z;
            }
        }
        l * &self.right
    }

    pub fn matrix(&self, k: &[C64], t: &[f64]) -> CMat {
        let ph = self.family.phases(k, t);
        self.scaled(|r| ph[r])
    }

    pub fn k_derivative(&self, t: &[f64], i: usize) -> CMat {
        let zero = vec![C64::default(); self.d()];
        let ph = self.family.phases(&zero, t);
        self.scaled(|r| ph[r] * I * self.family.k_coeff[r][i])
    }

    pub fn k_second_derivative(&self, t: &[f64], i: usize, j: usize) -> CMat {
        let zero = vec![C64::default(); self.d()];
        let ph = self.family.phases(&zero, t);
        self.scaled(|r| ph[r] * (-self.family.k_coeff[r][i] * self.family.k_coeff[r][j]))
    }

    /// Coordinates `V* W x` of a full-space vector.
    pub fn project(&self, x: &CVec) -> CVec {
        &self.left * x
    }
}
