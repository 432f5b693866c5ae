#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajdiff::NlpProblem;

/// Uniform point strictly inside finite bounds (5% clear of each side);
/// unbounded coordinates are drawn from `[-free, free]`.
pub fn interior_point<P: NlpProblem>(nlp: &P, free: f64, rng: &mut impl Rng) -> Vec<f64> {
    nlp.lower_bounds()
        .iter()
        .zip(nlp.upper_bounds())
        .map(|(&lo, &hi)| {
            let (a, b) = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => (lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)),
                (true, false) => (lo + 0.05, lo + free),
                (false, true) => (hi - free, hi - 0.05),
                (false, false) => (-free, free),
            };
            rng.random_range(a..b)
        })
        .collect()
}

pub fn vector(len: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1.0)
}
