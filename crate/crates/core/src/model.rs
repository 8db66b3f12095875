//! Walk instances: jump function, coin ensemble with its Markov chain, site
//! representation and initial condition, plus the structural checks on them.

use serde::Serialize;

use crate::error::{Error, FieldError, Result};
use crate::lattice::SiteRepresentation;
use crate::linalg::{c, max_abs, nullity, unitarity_residual, CMat, CVec, C64};

pub const TOL: f64 = 1e-12;

/// `r : I_± → Z^d`, stored in the order `+1, −1, +2, −2, …`.
#[derive(Clone, Debug, Serialize)]
pub struct JumpFunction {
    pub d: usize,
    pub r: Vec<Vec<i64>>,
}

impl JumpFunction {
    pub fn new(d: usize, r: Vec<Vec<i64>>) -> Result<Self> {
        let mut errs = Vec::new();
        if d == 0 {
            errs.push(fe("d", "lattice dimension must be positive"));
        }
        if r.len() != 2 * d {
            errs.push(fe(
                "jump",
                &format!("expected {} vectors, found {}", 2 * d, r.len()),
            ));
        }
        for (i, v) in r.iter().enumerate() {
            if v.len() != d {
                errs.push(fe(
                    &format!("jump[{i}]"),
                    &format!("expected length {d}, found {}", v.len()),
                ));
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        Ok(Self { d, r })
    }

    /// Nearest-neighbour jumps `r(±j) = ±e_j`.
    pub fn nearest_neighbour(d: usize) -> Self {
        let mut r = Vec::with_capacity(2 * d);
        for j in 0..d {
            let mut e = vec![0; d];
            e[j] = 1;
            r.push(e.clone());
            e[j] = -1;
            r.push(e);
        }
        Self { d, r }
    }

    /// Number of internal states `2d`.
    pub fn states(&self) -> usize {
        2 * self.d
    }

    /// `ρ = max_τ ‖r(τ)‖_∞`.
    pub fn rho(&self) -> i64 {
        self.r
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Label `±j` of internal state index `i`.
    pub fn label(i: usize) -> i64 {
        let j = (i / 2 + 1) as i64;
        if i.is_multiple_of(2) {
            j
        } else {
            -j
        }
    }
}

/// Finite coin set driven by a stationary Markov chain.
#[derive(Clone, Debug)]
pub struct CoinEnsemble {
    pub coins: Vec<CMat>,
    pub p: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    /// Backward kernel `Q(ζ,η) = p(η) P(η,ζ) / p(ζ)`.
    pub back: Vec<Vec<f64>>,
}

impl CoinEnsemble {
    pub fn new(coins: Vec<CMat>, p: Vec<f64>, kernel: Vec<Vec<f64>>) -> Result<Self> {
        let f = coins.len();
        let mut errs = Vec::new();
        if f == 0 {
            errs.push(fe("coins", "at least one coin is required"));
        }
        let n = coins.first().map(|m| m.nrows()).unwrap_or(0);
        for (i, m) in coins.iter().enumerate() {
            if m.nrows() != m.ncols() {
                errs.push(fe(&format!("coins[{i}]"), "matrix is not square"));
            } else if m.nrows() != n {
                errs.push(fe(&format!("coins[{i}]"), "coins have different sizes"));
            }
        }
        if p.len() != f {
            errs.push(fe("p", &format!("expected length {f}, found {}", p.len())));
        }
        if kernel.len() != f {
            errs.push(fe(
                "P",
                &format!("expected {f} rows, found {}", kernel.len()),
            ));
        }
        for (i, row) in kernel.iter().enumerate() {
            if row.len() != f {
                errs.push(fe(
                    &format!("P[{i}]"),
                    &format!("expected length {f}, found {}", row.len()),
                ));
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        let back = (0..f)
            .map(|z| {
                (0..f)
                    .map(|e| {
                        if p[z] > 0.0 {
                            p[e] * kernel[e][z] / p[z]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            coins,
            p,
            kernel,
            back,
        })
    }

    /// Independent coins: `P(η,ζ) = p(ζ)`.
    pub fn iid(coins: Vec<CMat>, p: Vec<f64>) -> Result<Self> {
        let kernel = vec![p.clone(); p.len()];
        Self::new(coins, p, kernel)
    }

    pub fn len(&self) -> usize {
        self.coins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coins.is_empty()
    }

    pub fn coin_dim(&self) -> usize {
        self.coins[0].nrows()
    }

    /// Whether every row of `P` equals `p` (independent sequence).
    pub fn is_rank_one(&self, tol: f64) -> bool {
        self.kernel
            .iter()
            .all(|row| row.iter().zip(&self.p).all(|(a, b)| (a - b).abs() <= tol))
    }
}

/// One entry `ρ₀(x, y)` of a finitely supported density kernel.
#[derive(Clone, Debug)]
pub struct KernelEntry {
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub m: CMat,
}

#[derive(Clone, Debug)]
pub enum Initial {
    /// Coin vector `φ₀` localized at the origin.
    Vector(CVec),
    /// Finitely supported density kernel.
    Kernel(Vec<KernelEntry>),
}

#[derive(Clone, Debug)]
pub struct WalkModel {
    pub jump: JumpFunction,
    pub coins: CoinEnsemble,
    pub repr: SiteRepresentation,
    pub initial: Initial,
}

impl WalkModel {
    pub fn new(
        jump: JumpFunction,
        coins: CoinEnsemble,
        repr: SiteRepresentation,
        initial: Initial,
    ) -> Result<Self> {
        let mut errs = Vec::new();
        let s = jump.states();
        if coins.coin_dim() != s {
            errs.push(fe(
                "coins",
                &format!("coins must be {s}x{s} for d = {}", jump.d),
            ));
        }
        if repr.dim() != jump.d {
            errs.push(fe(
                "sigma_generators",
                &format!("expected {} generators, found {}", jump.d, repr.dim()),
            ));
        }
        if repr.alphabet != coins.len() {
            errs.push(fe(
                "sigma_generators",
                "generators must permute the coin indices",
            ));
        }
        match &initial {
            Initial::Vector(v) => {
                if v.len() != s {
                    errs.push(fe(
                        "initial.vector",
                        &format!("expected length {s}, found {}", v.len()),
                    ));
                }
            }
            Initial::Kernel(entries) => {
                if entries.is_empty() {
                    errs.push(fe("initial.kernel", "kernel has no entries"));
                }
                for (i, e) in entries.iter().enumerate() {
                    if e.x.len() != jump.d || e.y.len() != jump.d {
                        errs.push(fe(
                            &format!("initial.kernel[{i}]"),
                            "site has wrong dimension",
                        ));
                    }
                    if e.m.nrows() != s || e.m.ncols() != s {
                        errs.push(fe(
                            &format!("initial.kernel[{i}].matrix"),
                            &format!("expected {s}x{s}"),
                        ));
                    }
                }
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidModel(errs));
        }
        Ok(Self {
            jump,
            coins,
            repr,
            initial,
        })
    }

    pub fn d(&self) -> usize {
        self.jump.d
    }

    pub fn states(&self) -> usize {
        self.jump.states()
    }

    pub fn num_coins(&self) -> usize {
        self.coins.len()
    }

    /// Mean jump `r̄ = (1/2d) Σ_τ r(τ)`.
    pub fn drift(&self) -> Vec<f64> {
        let s = self.states() as f64;
        (0..self.d())
            .map(|i| self.jump.r.iter().map(|v| v[i] as f64).sum::<f64>() / s)
            .collect()
    }

    /// Dimension `|B_Γ| · F · (2d)²` of a fiber.
    pub fn fiber_dim(&self) -> usize {
        let s = self.states();
        self.repr.num_cosets() * self.num_coins() * s * s
    }

    /// Support radius of the initial condition in the max norm.
    pub fn initial_radius(&self) -> i64 {
        match &self.initial {
            Initial::Vector(_) => 0,
            Initial::Kernel(entries) => entries
                .iter()
                .flat_map(|e| e.x.iter().chain(e.y.iter()).map(|v| v.abs()))
                .max()
                .unwrap_or(0),
        }
    }

    /// Same model with a different initial condition.
    pub fn with_initial(&self, initial: Initial) -> Result<Self> {
        Self::new(
            self.jump.clone(),
            self.coins.clone(),
            self.repr.clone(),
            initial,
        )
    }
}

fn fe(field: &str, message: &str) -> FieldError {
    FieldError {
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// One named invariant check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    fn le(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Evaluates every structural invariant of a model.
pub fn validate_model(model: &WalkModel) -> ValidationReport {
    let ce = &model.coins;
    let f = ce.len();
    let mut checks = Vec::new();

    let rho = model.jump.rho();
    checks.push(Check {
        name: "jump.finite_range".into(),
        passed: rho > 0,
        residual: rho as f64,
        tolerance: 0.0,
    });
    for (i, m) in ce.coins.iter().enumerate() {
        checks.push(Check::le(
            &format!("coins[{i}].unitary"),
            unitarity_residual(m),
            TOL,
        ));
    }
    let pmin = ce.p.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "p.positive".into(),
        passed: pmin > 0.0,
        residual: pmin,
        tolerance: 0.0,
    });
    let psum: f64 = ce.p.iter().sum();
    checks.push(Check::le("p.normalized", (psum - 1.0).abs(), TOL));
    let neg = ce.kernel.iter().flatten().fold(0.0_f64, |a, &v| a.max(-v));
    checks.push(Check::le("P.nonnegative", neg, 0.0));
    let row = ce
        .kernel
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::le("P.stochastic", row, TOL));
    let stat = (0..f)
        .map(|z| ((0..f).map(|e| ce.p[e] * ce.kernel[e][z]).sum::<f64>() - ce.p[z]).abs())
        .fold(0.0, f64::max);
    checks.push(Check::le("P.stationary", stat, TOL));
    let qrow = ce
        .back
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::le("Q.stochastic", qrow, TOL));

    let mut meas = 0.0_f64;
    let mut kinv = 0.0_f64;
    for g in &model.repr.generators {
        for a in 0..f {
            meas = meas.max((ce.p[g[a]] - ce.p[a]).abs());
            for b in 0..f {
                kinv = kinv.max((ce.kernel[g[a]][g[b]] - ce.kernel[a][b]).abs());
            }
        }
    }
    checks.push(Check::le("sigma.measure_preserving", meas, TOL));
    checks.push(Check::le("sigma.kernel_invariant", kinv, TOL));
    let dual = model.repr.duality_defect();
    checks.push(Check::le(
        "gamma.duality",
        (*dual.numer() as f64 / *dual.denom() as f64).abs(),
        0.0,
    ));

    match &model.initial {
        Initial::Vector(v) => {
            checks.push(Check::le("initial.normalized", (v.norm() - 1.0).abs(), TOL));
        }
        Initial::Kernel(entries) => {
            let (herm, trace, minev) = kernel_diagnostics(model, entries);
            checks.push(Check::le("initial.kernel_self_adjoint", herm, TOL));
            checks.push(Check::le("initial.kernel_trace", (trace - 1.0).abs(), TOL));
            checks.push(Check::le("initial.kernel_psd", (-minev).max(0.0), 1e-10));
        }
    }
    ValidationReport { checks }
}

/// Dense matrix of a kernel on its support, with the ordered list of sites.
pub fn kernel_matrix(model: &WalkModel, entries: &[KernelEntry]) -> (Vec<Vec<i64>>, CMat) {
    let mut sites: Vec<Vec<i64>> = Vec::new();
    for e in entries {
        for s in [&e.x, &e.y] {
            if !sites.contains(s) {
                sites.push(s.clone());
            }
        }
    }
    sites.sort();
    let s = model.states();
    let mut m = CMat::zeros(sites.len() * s, sites.len() * s);
    for e in entries {
        let i = sites.iter().position(|v| v == &e.x).unwrap();
        let j = sites.iter().position(|v| v == &e.y).unwrap();
        for a in 0..s {
            for b in 0..s {
                m[(i * s + a, j * s + b)] += e.m[(a, b)];
            }
        }
    }
    (sites, m)
}

fn kernel_diagnostics(model: &WalkModel, entries: &[KernelEntry]) -> (f64, f64, f64) {
    let (_, m) = kernel_matrix(model, entries);
    let herm = max_abs(&(&m - m.adjoint()));
    let trace = m.trace().re;
    let h = (&m + m.adjoint()) * c(0.5, 0.0);
    let minev = h
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (herm, trace, minev)
}

/// Dimension of the commutant of the coin set and whether it is trivial.
pub fn check_trivial_commutant(coins: &CoinEnsemble) -> (bool, usize) {
    let n = coins.coin_dim();
    let mut sys = CMat::zeros(coins.len() * n * n, n * n);
    for (ci, cm) in coins.coins.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let row = ci * n * n + i * n + j;
                // (A C - C A)_{ij} in the unknowns A_{kl}, index k*n+l
                for k in 0..n {
                    sys[(row, i * n + k)] += cm[(k, j)];
                    sys[(row, k * n + j)] -= cm[(i, k)];
                }
            }
        }
    }
    let dim = nullity(&sys, 1e-10);
    (dim == 1, dim)
}

/// The three sufficient conditions certifying a simple peripheral eigenvalue.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    /// `r(τ) − r(τ') ∈ Γ` for all pairs.
    pub jumps_in_period_lattice: bool,
    /// `P(η, ζ) = p(ζ)`.
    pub independent_kernel: bool,
    pub trivial_commutant: bool,
    pub commutant_dim: usize,
    pub certified: bool,
}

pub fn check_certificate_conditions(model: &WalkModel) -> CertificateReport {
    let r = &model.jump.r;
    let mut in_gamma = true;
    for a in r {
        for b in r {
            let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            for j in 0..model.d() {
                if !model.repr.dual_dot(j, &diff).is_integer() {
                    in_gamma = false;
                }
            }
        }
    }
    let independent = model.coins.is_rank_one(TOL);
    let (trivial, dim) = check_trivial_commutant(&model.coins);
    CertificateReport {
        jumps_in_period_lattice: in_gamma,
        independent_kernel: independent,
        trivial_commutant: trivial,
        commutant_dim: dim,
        certified: in_gamma && independent && trivial,
    }
}

/// `|a_τ|²` for a localized initial vector.
pub fn initial_weights(v: &CVec) -> Vec<f64> {
    v.iter().map(|z| z.norm_sqr()).collect()
}

pub fn basis_vector(n: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[i] = C64::new(1.0, 0.0);
    v
}
