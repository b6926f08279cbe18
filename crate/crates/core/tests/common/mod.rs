//! Independent oracles and random inputs shared by the integration tests.
//!
//! The oracles read only raw breakpoints, values and atoms and recompute
//! every quantity by a midpoint Riemann sum or a direct cell sum, without
//! going through the library's overlay, pairing or norm code.
#![allow(dead_code)]

use horolab::rbar_measures::{AtomicMeasure, Eta, RandomMeasureField};
use horolab::StepFunction;
use rand::Rng;

pub const RIEMANN_SAMPLES: usize = 1 << 20;

/// `(1/n) sum_i term(cells at x_i)` with `x_i = (i + 1/2)/n`; `cells[j]` is
/// the index of the cell of `sources[j]` containing `x_i`.
pub fn midpoint_mean(n: usize, sources: &[&[f64]], mut term: impl FnMut(&[usize]) -> f64) -> f64 {
    let mut idx = vec![0usize; sources.len()];
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        for (k, bps) in sources.iter().enumerate() {
            while idx[k] + 2 < bps.len() && bps[idx[k] + 1] <= x {
                idx[k] += 1;
            }
        }
        // compensated summation
        let y = term(&idx) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum / n as f64
}

pub fn eta(e: &Eta, s: f64) -> f64 {
    match e {
        Eta::Finite(r) => (s - r).abs() - r.abs(),
        Eta::PlusInfinity => -s,
        Eta::MinusInfinity => s,
    }
}

fn atoms(mu: &AtomicMeasure) -> Vec<(Eta, f64)> {
    mu.atoms().collect()
}

pub fn riemann_internal(g: &StepFunction, p: f64, f: &StepFunction) -> f64 {
    let (gv, fv) = (g.values(), f.values());
    let dist = midpoint_mean(RIEMANN_SAMPLES, &[g.breakpoints(), f.breakpoints()], |c| {
        (fv[c[1]] - gv[c[0]]).abs().powf(p)
    });
    let norm = midpoint_mean(RIEMANN_SAMPLES, &[g.breakpoints()], |c| gv[c[0]].abs().powf(p));
    dist.powf(1.0 / p) - norm.powf(1.0 / p)
}

pub fn riemann_l1(xi: &RandomMeasureField, f: &StepFunction) -> f64 {
    let cells: Vec<Vec<(Eta, f64)>> = xi.cell_measures().iter().map(atoms).collect();
    let fv = f.values();
    midpoint_mean(RIEMANN_SAMPLES, &[xi.breakpoints(), f.breakpoints()], |c| {
        cells[c[0]].iter().map(|(e, w)| w * eta(e, fv[c[1]])).sum()
    })
}

pub fn riemann_lp_finite(xi: &RandomMeasureField, c: f64, p: f64, f: &StepFunction) -> f64 {
    let cells: Vec<Vec<(f64, f64)>> = xi
        .cell_measures()
        .iter()
        .map(|m| {
            atoms(m)
                .into_iter()
                .map(|(e, w)| match e {
                    Eta::Finite(r) => (r, w),
                    _ => panic!("field must live on the real line"),
                })
                .collect()
        })
        .collect();
    let fv = f.values();
    let spread = midpoint_mean(RIEMANN_SAMPLES, &[xi.breakpoints(), f.breakpoints()], |k| {
        cells[k[0]].iter().map(|(r, w)| w * (fv[k[1]] - r).abs().powf(p)).sum()
    });
    let moment = midpoint_mean(RIEMANN_SAMPLES, &[xi.breakpoints()], |k| {
        cells[k[0]].iter().map(|(r, w)| w * r.abs().powf(p)).sum()
    });
    (spread - moment + c.powf(p)).powf(1.0 / p) - c
}

pub fn riemann_lp_linear(zeta: &StepFunction, f: &StepFunction) -> f64 {
    let (zv, fv) = (zeta.values(), f.values());
    -midpoint_mean(RIEMANN_SAMPLES, &[zeta.breakpoints(), f.breakpoints()], |c| {
        zv[c[0]] * fv[c[1]]
    })
}

/// `sum_cells (hi - lo) phi(value)`, straight from the raw representation.
pub fn cell_integral(f: &StepFunction, phi: impl Fn(f64) -> f64) -> f64 {
    let b = f.breakpoints();
    f.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| (b[i + 1] - b[i]) * phi(v))
        .sum()
}

/// Value of `f` at `x` by a linear scan of the raw cells.
pub fn point_value(f: &StepFunction, x: f64) -> f64 {
    let b = f.breakpoints();
    let i = (0..f.values().len()).find(|&i| x < b[i + 1]).unwrap_or(f.values().len() - 1);
    f.values()[i]
}

pub fn random_dyadic<R: Rng>(rng: &mut R, max_level: u32, amp: f64) -> StepFunction {
    let level = rng.gen_range(0..=max_level);
    let values = (0..1usize << level).map(|_| rng.gen_range(-amp..=amp)).collect();
    StepFunction::from_dyadic(level, values).unwrap()
}

pub fn random_measure<R: Rng>(rng: &mut R, with_infinity: bool) -> AtomicMeasure {
    let k = rng.gen_range(1..=3);
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms: Vec<(Eta, f64)> = raw
        .iter()
        .map(|w| (Eta::Finite(rng.gen_range(-3.0..3.0)), w / total))
        .collect();
    if with_infinity && rng.gen_bool(0.5) {
        atoms[0].0 = if rng.gen_bool(0.5) { Eta::PlusInfinity } else { Eta::MinusInfinity };
    }
    // restore unit mass after rounding
    let rest: f64 = atoms[1..].iter().map(|a| a.1).sum();
    atoms[0].1 = 1.0 - rest;
    AtomicMeasure::new(atoms).unwrap()
}

/// A field constant on the dyadic cells of a random level `<= max_level`.
pub fn random_field<R: Rng>(rng: &mut R, max_level: u32, with_infinity: bool) -> RandomMeasureField {
    let level = rng.gen_range(0..=max_level);
    let cells = 1usize << level;
    let bps: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    let measures = (0..cells).map(|_| random_measure(rng, with_infinity)).collect();
    RandomMeasureField::new(bps, measures).unwrap()
}
