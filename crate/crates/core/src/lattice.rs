//! Site representations `x ↦ σ_x` of `Z^d` on the coin alphabet, their kernel
//! lattice `Γ`, a set of coset representatives and the dual lattice basis.

use std::collections::HashMap;

use num_rational::Rational64;
use serde::Serialize;

use crate::error::{Error, FieldError, Result};

/// A permutation of `0..n`, stored as its image table.
pub type Perm = Vec<usize>;

pub fn identity_perm(n: usize) -> Perm {
    (0..n).collect()
}

/// `(a ∘ b)(i) = a(b(i))`.
pub fn compose(a: &Perm, b: &Perm) -> Perm {
    b.iter().map(|&i| a[i]).collect()
}

pub fn inverse(a: &Perm) -> Perm {
    let mut inv = vec![0; a.len()];
    for (i, &j) in a.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

pub fn is_perm(a: &[usize]) -> bool {
    let mut seen = vec![false; a.len()];
    for &j in a {
        if j >= a.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Order of a permutation (lcm of its cycle lengths).
pub fn order(a: &Perm) -> usize {
    let n = a.len();
    let mut seen = vec![false; n];
    let mut ord = 1;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            i = a[i];
            len += 1;
        }
        ord = ord / gcd(ord, len) * len;
    }
    ord
}

pub fn power(a: &Perm, e: i64) -> Perm {
    let ord = order(a) as i64;
    let e = e.rem_euclid(ord);
    let mut out = identity_perm(a.len());
    for _ in 0..e {
        out = compose(a, &out);
    }
    out
}

/// A representation of `Z^d` by commuting permutations of the coin alphabet.
#[derive(Clone, Debug, Serialize)]
pub struct SiteRepresentation {
    pub alphabet: usize,
    pub generators: Vec<Perm>,
    pub orders: Vec<usize>,
    /// Rows are a basis `γ_1..γ_d` of `Γ = {x : σ_x = Id}` in lower-triangular form.
    pub gamma_basis: Vec<Vec<i64>>,
    /// Columns `p*_j` of the dual basis, stored as `dual[l][j]` (component `l` of `p*_j`).
    #[serde(skip)]
    pub dual: Vec<Vec<Rational64>>,
    /// Coset representatives `B_Γ`, the origin first.
    pub representatives: Vec<Vec<i64>>,
    #[serde(skip)]
    rep_sigma: Vec<Perm>,
    #[serde(skip)]
    coset_of: HashMap<Perm, usize>,
}

impl SiteRepresentation {
    pub fn trivial(d: usize, alphabet: usize) -> Self {
        Self::new(vec![identity_perm(alphabet); d], alphabet).expect("trivial representation")
    }

    pub fn new(generators: Vec<Perm>, alphabet: usize) -> Result<Self> {
        let d = generators.len();
        let mut errs = Vec::new();
        for (j, g) in generators.iter().enumerate() {
            if g.len() != alphabet || !is_perm(g) {
                errs.push(FieldError {
                    field: format!("sigma_generators[{j}]"),
                    message: format!("not a permutation of 0..{alphabet}"),
                });
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let a = compose(&generators[i], &generators[j]);
                let b = compose(&generators[j], &generators[i]);
                if a != b {
                    errs.push(FieldError {
                        field: format!("sigma_generators[{i}],[{j}]"),
                        message: "generators do not commute".into(),
                    });
                }
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        let orders: Vec<usize> = generators.iter().map(order).collect();
        let sigma = |x: &[i64]| -> Perm {
            let mut s = identity_perm(alphabet);
            for (g, &e) in generators.iter().zip(x) {
                s = compose(&power(g, e), &s);
            }
            s
        };
        let id = identity_perm(alphabet);

        // Lower-triangular basis: b_j has the least positive j-th coordinate among
        // kernel vectors supported on the first j+1 coordinates.
        let mut gamma_basis = Vec::with_capacity(d);
        for j in 0..d {
            let mut found = None;
            'm: for m in 1..=orders[j] as i64 {
                let prefix_count: usize = orders[..j].iter().product();
                for idx in 0..prefix_count {
                    let mut x = vec![0i64; d];
                    let mut r = idx;
                    for (i, xi) in x.iter_mut().enumerate().take(j) {
                        *xi = (r % orders[i]) as i64;
                        r /= orders[i];
                    }
                    x[j] = m;
                    if sigma(&x) == id {
                        found = Some(x);
                        break 'm;
                    }
                }
            }
            gamma_basis.push(found.expect("o_j e_j lies in the kernel"));
        }

        // Coset representatives from the box of generator orders.
        let box_size: usize = orders.iter().product();
        let mut representatives = Vec::new();
        let mut rep_sigma = Vec::new();
        let mut coset_of = HashMap::new();
        for idx in 0..box_size {
            let mut x = vec![0i64; d];
            let mut r = idx;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = (r % orders[i]) as i64;
                r /= orders[i];
            }
            let s = sigma(&x);
            if let std::collections::hash_map::Entry::Vacant(e) = coset_of.entry(s.clone()) {
                e.insert(representatives.len());
                representatives.push(x);
                rep_sigma.push(s);
            }
        }
        let index: i64 = (0..d).map(|j| gamma_basis[j][j]).product();
        if index as usize != representatives.len() {
            return Err(Error::Numerical(format!(
                "kernel lattice index {index} disagrees with {} cosets",
                representatives.len()
            )));
        }

        let dual = invert_integer(&gamma_basis)?;
        Ok(Self {
            alphabet,
            generators,
            orders,
            gamma_basis,
            dual,
            representatives,
            rep_sigma,
            coset_of,
        })
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn num_cosets(&self) -> usize {
        self.representatives.len()
    }

    /// `σ_x = g_1^{x_1} ∘ … ∘ g_d^{x_d}`.
    pub fn sigma_at(&self, x: &[i64]) -> Perm {
        let mut s = identity_perm(self.alphabet);
        for (g, &e) in self.generators.iter().zip(x) {
            s = compose(&power(g, e), &s);
        }
        s
    }

    /// `σ_x(η)`.
    pub fn act(&self, x: &[i64], eta: usize) -> usize {
        self.sigma_at(x)[eta]
    }

    /// Index in `B_Γ` of the coset of `x`.
    pub fn reduce(&self, x: &[i64]) -> usize {
        self.coset_of[&self.sigma_at(x)]
    }

    pub fn representative_sigma(&self, i: usize) -> &Perm {
        &self.rep_sigma[i]
    }

    /// Exact `p*_j · z`.
    pub fn dual_dot(&self, j: usize, z: &[i64]) -> Rational64 {
        let mut s = Rational64::from_integer(0);
        for (l, &zl) in z.iter().enumerate() {
            s += self.dual[l][j] * Rational64::from_integer(zl);
        }
        s
    }

    /// Torus frequencies `(p*_j · z)_j` as floats.
    pub fn torus_frequencies(&self, z: &[i64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let r = self.dual_dot(j, z);
                *r.numer() as f64 / *r.denom() as f64
            })
            .collect()
    }

    /// Momentum `p = Σ_j t_j p*_j` for torus coordinates `t`.
    pub fn momentum(&self, t: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|l| {
                (0..d)
                    .map(|j| {
                        let r = self.dual[l][j];
                        t[j] * (*r.numer() as f64 / *r.denom() as f64)
                    })
                    .sum()
            })
            .collect()
    }

    /// Torus coordinates `t_i = γ_i · p` of a momentum.
    pub fn torus_coordinates(&self, p: &[f64]) -> Vec<f64> {
        self.gamma_basis
            .iter()
            .map(|g| g.iter().zip(p).map(|(&a, &b)| a as f64 * b).sum())
            .collect()
    }

    /// Maximal entry of `G · P - I` in exact arithmetic (zero for a true dual pair).
    pub fn duality_defect(&self) -> Rational64 {
        let d = self.dim();
        let mut worst = Rational64::from_integer(0);
        for i in 0..d {
            for j in 0..d {
                let v = self.dual_dot(j, &self.gamma_basis[i]);
                let target = Rational64::from_integer((i == j) as i64);
                let diff = if v > target { v - target } else { target - v };
                if diff > worst {
                    worst = diff;
                }
            }
        }
        worst
    }

    /// Whether every generator is the identity.
    pub fn is_trivial(&self) -> bool {
        self.generators
            .iter()
            .all(|g| g.iter().enumerate().all(|(i, &j)| i == j))
    }
}

fn invert_integer(rows: &[Vec<i64>]) -> Result<Vec<Vec<Rational64>>> {
    let d = rows.len();
    let mut a: Vec<Vec<Rational64>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| Rational64::from_integer(v)).collect())
        .collect();
    let mut inv: Vec<Vec<Rational64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| Rational64::from_integer((i == j) as i64))
                .collect()
        })
        .collect();
    let zero = Rational64::from_integer(0);
    for col in 0..d {
        let piv = (col..d)
            .find(|&r| a[r][col] != zero)
            .ok_or_else(|| Error::Numerical("kernel lattice basis is singular".into()))?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..d {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..d {
            if r != col && a[r][col] != zero {
                let f = a[r][col];
                for j in 0..d {
                    let t = a[col][j];
                    a[r][j] -= f * t;
                    let t = inv[col][j];
                    inv[r][j] -= f * t;
                }
            }
        }
    }
    Ok(inv)
}
