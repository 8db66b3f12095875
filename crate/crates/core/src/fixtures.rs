//! Small reference models used throughout the tests and the CLI self-checks.

use crate::lattice::SiteRepresentation;
use crate::linalg::{c, CMat, C64};
use crate::model::{basis_vector, CoinEnsemble, Initial, JumpFunction, WalkModel};

pub fn identity2() -> CMat {
    CMat::identity(2, 2)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn hadamard() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_row_slice(2, 2, &[c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)])
}

/// Real rotation by `theta`.
pub fn rotation(theta: f64) -> CMat {
    let (s, co) = theta.sin_cos();
    CMat::from_row_slice(2, 2, &[c(co, 0.), c(-s, 0.), c(s, 0.), c(co, 0.)])
}

/// Generic `U(2)` element `e^{iα} [[e^{iβ} cos θ, −e^{−iγ} sin θ], [e^{iγ} sin θ, e^{−iβ} cos θ]]`.
pub fn u2(alpha: f64, beta: f64, gamma: f64, theta: f64) -> CMat {
    let ph = C64::from_polar(1.0, alpha);
    let (s, co) = theta.sin_cos();
    CMat::from_row_slice(
        2,
        2,
        &[
            ph * C64::from_polar(co, beta),
            -ph * C64::from_polar(s, -gamma),
            ph * C64::from_polar(s, gamma),
            ph * C64::from_polar(co, -beta),
        ],
    )
}

/// `|Ω| = 1` nearest-neighbour walk in one dimension started in `|+1⟩`.
pub fn deterministic(coin: CMat) -> WalkModel {
    WalkModel::new(
        JumpFunction::nearest_neighbour(1),
        CoinEnsemble::iid(vec![coin], vec![1.0]).unwrap(),
        SiteRepresentation::trivial(1, 1),
        Initial::Vector(basis_vector(2, 0)),
    )
    .unwrap()
}

/// Independent `{I, X}` coins with `P(I) = q`, started in `|+1⟩`.
pub fn flip(q: f64) -> WalkModel {
    WalkModel::new(
        JumpFunction::nearest_neighbour(1),
        CoinEnsemble::iid(vec![identity2(), pauli_x()], vec![q, 1.0 - q]).unwrap(),
        SiteRepresentation::trivial(1, 2),
        Initial::Vector(basis_vector(2, 0)),
    )
    .unwrap()
}

/// Independent `{X, Z}` coins with `P(X) = q`.
pub fn pauli_xz(q: f64) -> WalkModel {
    WalkModel::new(
        JumpFunction::nearest_neighbour(1),
        CoinEnsemble::iid(vec![pauli_x(), pauli_z()], vec![q, 1.0 - q]).unwrap(),
        SiteRepresentation::trivial(1, 2),
        Initial::Vector(basis_vector(2, 0)),
    )
    .unwrap()
}

/// Two coins with a sticky symmetric chain and the swap site action (`Γ = 2Z`).
pub fn swap_markov(stay: f64) -> WalkModel {
    let phi = CMat::from_column_slice(2, 1, &[c(0.6, 0.), c(0., 0.8)])
        .column(0)
        .into_owned();
    WalkModel::new(
        JumpFunction::nearest_neighbour(1),
        CoinEnsemble::new(
            vec![hadamard(), u2(0.3, 0.7, -0.4, 0.9)],
            vec![0.5, 0.5],
            vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]],
        )
        .unwrap(),
        SiteRepresentation::new(vec![vec![1, 0]], 2).unwrap(),
        Initial::Vector(phi),
    )
    .unwrap()
}

/// Three coins, doubly stochastic non-reversible chain, trivial site action.
pub fn three_coin_markov() -> WalkModel {
    let t = 1.0 / 3.0;
    WalkModel::new(
        JumpFunction::nearest_neighbour(1),
        CoinEnsemble::new(
            vec![hadamard(), pauli_x(), u2(0.1, -0.5, 1.2, 0.4)],
            vec![t, t, t],
            vec![
                vec![0.5, 0.3, 0.2],
                vec![0.2, 0.5, 0.3],
                vec![0.3, 0.2, 0.5],
            ],
        )
        .unwrap(),
        SiteRepresentation::trivial(1, 3),
        Initial::Vector(basis_vector(2, 1)),
    )
    .unwrap()
}
