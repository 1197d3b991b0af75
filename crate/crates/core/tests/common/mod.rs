//! Simulators shared by the acceptance checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const BURN_IN: usize = 100;

/// AR(1) with unit innovation variance, burned in from zero.
pub fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..BURN_IN + n {
        let e: f64 = StandardNormal.sample(&mut rng);
        y = phi * y + e;
        if t >= BURN_IN {
            out.push(y);
        }
    }
    out
}

/// Purely seasonal AR: y_t = sphi * y_{t-s} + e_t.
pub fn seasonal_ar(sphi: f64, s: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; s];
    let mut out = Vec::with_capacity(n);
    for t in 0..BURN_IN + n {
        let e: f64 = StandardNormal.sample(&mut rng);
        let value = sphi * y[t % s] + e;
        y[t % s] = value;
        if t >= BURN_IN {
            out.push(value);
        }
    }
    out
}

/// Driftless random walk from zero.
pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let e: f64 = StandardNormal.sample(&mut rng);
        y += e;
        out.push(y);
    }
    out
}
