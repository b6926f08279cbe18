//! Alspach's fixed-point-free isometry on
//! `K = {f in L_1 : 0 <= f <= 2, E[f] = 1}`.
//!
//! `F(f)(w) = min{2, 2 f(2w)}` on `[0, 1/2]` and `max{0, 2 f(2w - 1) - 2}` on
//! `(1/2, 1]`. The orbit of `1` is `1 + r_n`, whose internal functionals
//! converge to `h(f) = E[|f|/2 + (|f - 2| - 2)/2]`; `h` vanishes on `K`, which
//! is what rules out fixed points of the form `2 * 1_A`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::eval_internal;
use crate::interval_space::{check_resolution, max_dyadic_depth, StepFunction};
use crate::limits_lab::TestFunction;
use crate::report::{ConvergenceReport, ConvergenceRow};
use crate::sampling::{random_k_point, seeded};

/// Tolerance on `E[f] = 1` for members of `K`.
pub const K_MEAN_EPS: f64 = 1e-12;

/// Largest depth searched exhaustively by [`fixed_point_certificate`].
pub const EXHAUSTIVE_DEPTH: u32 = 4;

/// A step function in `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunction", into = "StepFunction")]
pub struct KPoint(StepFunction);

impl TryFrom<StepFunction> for KPoint {
    type Error = Error;
    fn try_from(f: StepFunction) -> Result<Self> {
        KPoint::new(f)
    }
}

impl From<KPoint> for StepFunction {
    fn from(k: KPoint) -> Self {
        k.0
    }
}

impl KPoint {
    pub fn new(f: StepFunction) -> Result<Self> {
        if f.min_value() < 0.0 || f.max_value() > 2.0 {
            return Err(Error::Domain(format!(
                "values span [{}, {}], outside [0, 2]",
                f.min_value(),
                f.max_value()
            )));
        }
        let mean = f.expectation();
        if (mean - 1.0).abs() > K_MEAN_EPS {
            return Err(Error::Domain(format!("expectation {mean} differs from 1")));
        }
        Ok(Self(f))
    }

    pub fn one() -> Self {
        Self(StepFunction::constant(1.0))
    }

    pub fn as_step(&self) -> &StepFunction {
        &self.0
    }
}

fn apply_map(f: &StepFunction) -> Result<StepFunction> {
    let mut segs = Vec::with_capacity(2 * f.num_cells());
    for (lo, v) in f.affine_pullback(0.0, 0.5, 0.0, 1.0) {
        segs.push((lo, (2.0 * v).min(2.0)));
    }
    for (lo, v) in f.affine_pullback(0.5, 1.0, 0.0, 1.0) {
        segs.push((lo, (2.0 * v - 2.0).max(0.0)));
    }
    check_resolution("Alspach image", segs.len() + 1)?;
    Ok(StepFunction::from_segments(segs))
}

/// `F(f)`, on the breakpoints `{b/2} u {1/2 + b/2}`.
pub fn alspach_map(f: &KPoint) -> Result<KPoint> {
    Ok(KPoint(apply_map(&f.0)?))
}

/// `F^n(1)`, equal to `1 + r_n`.
pub fn orbit_from_one(n: u32) -> Result<StepFunction> {
    let depth = max_dyadic_depth();
    if n > depth {
        return Err(Error::Resolution {
            what: "Alspach orbit".into(),
            needed: (1usize << n.min(63)) + 1,
            limit: (1usize << depth) + 1,
        });
    }
    let mut f = StepFunction::constant(1.0);
    for _ in 0..n {
        f = apply_map(&f)?;
    }
    Ok(f)
}

/// `| ||F f - F g||_1 - ||f - g||_1 |`.
pub fn verify_isometry(f: &KPoint, g: &KPoint) -> Result<f64> {
    let before = f.0.lp_distance(&g.0, 1.0)?;
    let after = alspach_map(f)?.0.lp_distance(&alspach_map(g)?.0, 1.0)?;
    Ok((after - before).abs())
}

/// `h(f) = E[|f|/2 + (|f - 2| - 2)/2]`.
pub fn alspach_limit_functional(f: &StepFunction) -> f64 {
    f.map(|v| 0.5 * v.abs() + 0.5 * ((v - 2.0).abs() - 2.0))
        .expectation()
}

/// `|h_{g_n}(f) - h(f)|` along the orbit of `1`, for `n = 1..=n_max`.
pub fn alspach_convergence(n_max: u32, tests: &[TestFunction]) -> Result<ConvergenceReport> {
    let mut rows = Vec::new();
    let mut g = StepFunction::constant(1.0);
    for n in 1..=n_max {
        g = apply_map(&g)?;
        for t in tests {
            let h_n = eval_internal(&g, 1.0, &t.f)?;
            let h_limit = alspach_limit_functional(&t.f);
            rows.push(ConvergenceRow {
                experiment: "alspach".into(),
                n: n as u64,
                test_id: t.id.clone(),
                h_n,
                h_limit,
                abs_err: (h_n - h_limit).abs(),
            });
        }
    }
    Ok(ConvergenceReport::new(rows))
}

/// A cell on which a candidate and its image differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    pub image_value: f64,
}

/// Checks on one candidate `f = 2 * 1_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    /// Indices of the dyadic cells making up `A`.
    pub cells: Vec<usize>,
    /// `||f - 1||_1`.
    pub dist_to_one: f64,
    /// `||F f - f||_1`.
    pub fixed_point_gap: f64,
    pub disagreement: Option<Disagreement>,
    /// `h(f)`.
    pub h_value: f64,
    /// `h_f(f) = -||f||_1`.
    pub internal_value: f64,
    /// `h(f) - h_f(f)`.
    pub obstruction: f64,
}

impl CandidateCheck {
    pub fn certified(&self) -> bool {
        self.disagreement.is_some()
            && (self.dist_to_one - 1.0).abs() <= 1e-12
            && (self.obstruction - 1.0).abs() <= 1e-12
    }
}

/// Orbit displacements `||F^{k+1} f - F^k f||_1` from one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementCheck {
    pub start: String,
    pub displacements: Vec<f64>,
    /// `max - min` of the displacements.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCertificate {
    pub depth: u32,
    pub exhaustive: bool,
    /// `C(2^m, 2^{m-1})`.
    pub candidates_total: u64,
    pub candidates: Vec<CandidateCheck>,
    pub displacement: Vec<DisplacementCheck>,
    pub min_displacement: f64,
    pub max_displacement_spread: f64,
    pub certified: bool,
}

/// Saturates at `u64::MAX`.
fn binomial(n: u64, k: u64) -> u64 {
    let c = (0..k as u128).try_fold(1u128, |acc, i| acc.checked_mul(n as u128 - i).map(|x| x / (i + 1)));
    c.and_then(|c| u64::try_from(c).ok()).unwrap_or(u64::MAX)
}

fn check_candidate(depth: u32, cells: Vec<usize>) -> Result<CandidateCheck> {
    let mut values = vec![0.0; 1 << depth];
    for &c in &cells {
        values[c] = 2.0;
    }
    let f = StepFunction::from_dyadic(depth, values)?;
    let image = apply_map(&f)?;
    let fine = f.zip_with(&image, |a, b| a - b);
    let disagreement = fine
        .cells()
        .find(|&(_, _, d)| d != 0.0)
        .map(|(lo, hi, _)| {
            let mid = 0.5 * (lo + hi);
            Disagreement {
                lo,
                hi,
                value: f.eval(mid),
                image_value: image.eval(mid),
            }
        });
    let h_value = alspach_limit_functional(&f);
    let internal_value = eval_internal(&f, 1.0, &f)?;
    Ok(CandidateCheck {
        cells,
        dist_to_one: f.lp_distance(&StepFunction::constant(1.0), 1.0)?,
        fixed_point_gap: fine.lp_norm(1.0)?,
        disagreement,
        h_value,
        internal_value,
        obstruction: h_value - internal_value,
    })
}

fn displacement(start: String, f: &StepFunction, steps: usize) -> Result<DisplacementCheck> {
    let mut cur = f.clone();
    let mut displacements = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = apply_map(&cur)?;
        displacements.push(next.lp_distance(&cur, 1.0)?);
        cur = next;
    }
    let lo = displacements.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = displacements.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DisplacementCheck {
        start,
        displacements,
        spread: hi - lo,
    })
}

const DISPLACEMENT_STEPS: usize = 6;
const RANDOM_STARTS: usize = 8;

fn assemble(
    depth: u32,
    exhaustive: bool,
    subsets: Vec<Vec<usize>>,
    seed: u64,
) -> Result<FixedPointCertificate> {
    let candidates: Vec<CandidateCheck> = subsets
        .into_par_iter()
        .map(|cells| check_candidate(depth, cells))
        .collect::<Result<_>>()?;

    let mut starts: Vec<(String, StepFunction)> = vec![("one".into(), StepFunction::constant(1.0))];
    if let Some(c) = candidates.first() {
        let mut v = vec![0.0; 1 << depth];
        c.cells.iter().for_each(|&i| v[i] = 2.0);
        starts.push((format!("candidate{:?}", c.cells), StepFunction::from_dyadic(depth, v)?));
    }
    let mut rng = seeded(seed);
    for i in 0..RANDOM_STARTS {
        starts.push((format!("random{i}"), random_k_point(&mut rng, 4)));
    }
    let displacement: Vec<DisplacementCheck> = starts
        .into_par_iter()
        .map(|(name, f)| displacement(name, &f, DISPLACEMENT_STEPS))
        .collect::<Result<_>>()?;

    let min_displacement = displacement
        .iter()
        .flat_map(|d| d.displacements.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let max_displacement_spread = displacement.iter().map(|d| d.spread).fold(0.0, f64::max);
    let certified = candidates.iter().all(CandidateCheck::certified)
        && min_displacement > 0.0
        && max_displacement_spread <= 1e-12;
    Ok(FixedPointCertificate {
        depth,
        exhaustive,
        candidates_total: binomial(1 << depth, 1 << (depth - 1)),
        candidates,
        displacement,
        min_displacement,
        max_displacement_spread,
        certified,
    })
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 {
        return Err(Error::Contract("candidate depth starts at 1".into()));
    }
    Ok(())
}

/// Checks every `2 * 1_A` with `A` a union of half of the dyadic cells of
/// `depth`, for `1 <= depth <= 4`. The random starts of the displacement
/// check are drawn from `seed`.
pub fn fixed_point_certificate(depth: u32, seed: u64) -> Result<FixedPointCertificate> {
    check_depth(depth)?;
    if depth > EXHAUSTIVE_DEPTH {
        return Err(Error::Budget(format!(
            "exhaustive search is limited to depth {EXHAUSTIVE_DEPTH}, asked for {depth}; \
             use the sampled certificate"
        )));
    }
    let cells = 1u32 << depth;
    let subsets = (0u32..1 << cells)
        .filter(|m| m.count_ones() == cells / 2)
        .map(|m| (0..cells as usize).filter(|&i| m >> i & 1 == 1).collect())
        .collect();
    assemble(depth, true, subsets, seed)
}

/// As [`fixed_point_certificate`] on `samples` random candidates; the report
/// is flagged non-exhaustive.
pub fn sampled_fixed_point_certificate(
    depth: u32,
    samples: usize,
    seed: u64,
) -> Result<FixedPointCertificate> {
    check_depth(depth)?;
    if depth + DISPLACEMENT_STEPS as u32 > max_dyadic_depth() {
        return Err(Error::Budget(format!("depth {depth} exceeds the resolution budget")));
    }
    log::warn!("depth {depth}: checking {samples} sampled candidates, not all of them");
    let mut rng = seeded(seed);
    let cells = 1usize << depth;
    let mut idx: Vec<usize> = (0..cells).collect();
    let subsets = (0..samples)
        .map(|_| {
            idx.shuffle(&mut rng);
            let mut a = idx[..cells / 2].to_vec();
            a.sort_unstable();
            a
        })
        .collect();
    assemble(depth, false, subsets, seed)
}
