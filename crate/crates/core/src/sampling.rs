//! Seeded generators of random inputs for property runs and experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval_space::StepFunction;

/// Deterministic generator used everywhere a seed is accepted.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A step function with up to `max_cells` cells at arbitrary real breakpoints
/// and values in `[-amplitude, amplitude]`.
pub fn random_step<R: Rng>(rng: &mut R, max_cells: usize, amplitude: f64) -> StepFunction {
    let cells = rng.gen_range(1..=max_cells.max(1));
    let mut cuts: Vec<f64> = (1..cells).map(|_| rng.gen_range(0.001..0.999)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let mut bps = Vec::with_capacity(cuts.len() + 2);
    bps.push(0.0);
    bps.extend(cuts);
    bps.push(1.0);
    let values = (1..bps.len())
        .map(|_| rng.gen_range(-amplitude..=amplitude))
        .collect();
    StepFunction::new(bps, values).expect("generated breakpoints are valid")
}

/// A step function on the dyadic cells of `level` with values in
/// `[-amplitude, amplitude]`.
pub fn random_dyadic_step<R: Rng>(rng: &mut R, level: u32, amplitude: f64) -> StepFunction {
    let values = (0..1usize << level)
        .map(|_| rng.gen_range(-amplitude..=amplitude))
        .collect();
    StepFunction::from_dyadic(level, values).expect("dyadic level within budget")
}

/// A random point of `K = {0 <= f <= 2, E[f] = 1}`.
///
/// Built as `1 + u` where `u` takes values `v` and `-v` on the two halves of
/// each base cell, so `E[f] = 1` holds without any projection step.
pub fn random_k_point<R: Rng>(rng: &mut R, max_base_cells: usize) -> StepFunction {
    let base = rng.gen_range(1..=max_base_cells.max(1));
    let mut cuts: Vec<f64> = (1..base).map(|_| rng.gen_range(0.01..0.99)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let mut edges = vec![0.0];
    edges.extend(cuts);
    edges.push(1.0);
    let mut bps = vec![0.0];
    let mut values = Vec::new();
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let v: f64 = rng.gen_range(-1.0..=1.0);
        let mut pair = [1.0 + v, 1.0 - v];
        pair.shuffle(rng);
        bps.push(mid);
        bps.push(w[1]);
        values.extend(pair);
    }
    StepFunction::new(bps, values).expect("generated breakpoints are valid")
}

/// A dyadic step function with `||zeta||_q = radius`.
pub fn random_dual_density<R: Rng>(rng: &mut R, level: u32, q: f64, radius: f64) -> StepFunction {
    loop {
        let z = random_dyadic_step(rng, level, 1.0);
        let norm = z.lp_norm(q).expect("q >= 1");
        if norm > 1e-3 {
            return z.scale(radius / norm);
        }
    }
}
