//! Seeding contract.
//!
//! Every random quantity is drawn from ChaCha8. A master seed `s` gives the
//! generator `ChaCha8Rng::seed_from_u64(s)`; trial `t` of a Monte Carlo run uses
//! the same key with the stream counter set to `t`. Streams are independent and
//! a trial can be replayed from `(s, t)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn master_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(seed: u64, trial: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(trial);
    r
}

/// Index drawn from a finite distribution by inversion.
pub fn categorical<R: rand::Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w / total;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
