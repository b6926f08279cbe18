//! Piecewise-constant functions on `[0, 1]` with Lebesgue measure.
//!
//! Every function in the library is a [`StepFunction`]: finitely many cells
//! `[b_i, b_{i+1})` with one real value each. Integrals, norms and pairings are
//! finite sums over cells, so they are exact up to floating point rounding.
//! Endpoint conventions are irrelevant because single points are null sets.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Breakpoints closer than this are treated as one point.
pub const BREAKPOINT_EPS: f64 = 1e-14;

/// Default cap on the number of breakpoints a single function may carry.
pub const DEFAULT_MAX_BREAKPOINTS: usize = 1 << 22;

/// Environment variable overriding [`DEFAULT_MAX_BREAKPOINTS`].
pub const MAX_BREAKPOINTS_ENV: &str = "HOROLAB_MAX_BREAKPOINTS";

/// Resolution budget: the maximum breakpoint count of any constructed function.
pub fn max_breakpoints() -> usize {
    std::env::var(MAX_BREAKPOINTS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 2)
        .unwrap_or(DEFAULT_MAX_BREAKPOINTS)
}

/// Largest `n` such that a level-`n` dyadic function fits the resolution budget.
pub fn max_dyadic_depth() -> u32 {
    let cap = max_breakpoints();
    let mut depth = 0;
    while depth < 62 && (1usize << (depth + 1)) < cap {
        depth += 1;
    }
    depth
}

pub(crate) fn check_resolution(what: &str, breakpoints: usize) -> Result<()> {
    let limit = max_breakpoints();
    if breakpoints > limit {
        return Err(Error::Resolution {
            what: what.to_string(),
            needed: breakpoints,
            limit,
        });
    }
    Ok(())
}

/// Validates a breakpoint vector: `0 = b_0 < b_1 < ... < b_k = 1`, all finite.
pub(crate) fn validate_breakpoints(breakpoints: &[f64]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidBreakpoints(format!(
            "need at least two breakpoints, got {}",
            breakpoints.len()
        )));
    }
    if breakpoints[0] != 0.0 || breakpoints[breakpoints.len() - 1] != 1.0 {
        return Err(Error::InvalidBreakpoints(format!(
            "must start at 0 and end at 1, got [{}, {}]",
            breakpoints[0],
            breakpoints[breakpoints.len() - 1]
        )));
    }
    for (i, w) in breakpoints.windows(2).enumerate() {
        if !w[1].is_finite() || w[1] <= w[0] {
            return Err(Error::InvalidBreakpoints(format!(
                "not strictly increasing at index {}: {} then {}",
                i + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

/// One cell of the common refinement of two breakpoint sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub lo: f64,
    pub hi: f64,
    /// Cell index in the first breakpoint set.
    pub left: usize,
    /// Cell index in the second breakpoint set.
    pub right: usize,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Walks two valid breakpoint sets in lockstep and returns their common
/// refinement. Segments shorter than [`BREAKPOINT_EPS`] are absorbed into the
/// following one.
pub(crate) fn overlay(a: &[f64], b: &[f64]) -> Vec<Segment> {
    let (na, nb) = (a.len() - 1, b.len() - 1);
    let mut out = Vec::with_capacity(na + nb);
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0;
    while i < na && j < nb {
        let (ha, hb) = (a[i + 1], b[j + 1]);
        let hi = ha.min(hb);
        if hi - lo > BREAKPOINT_EPS {
            out.push(Segment {
                lo,
                hi,
                left: i,
                right: j,
            });
            lo = hi;
        }
        if ha - hi <= BREAKPOINT_EPS {
            i += 1;
        }
        if hb - hi <= BREAKPOINT_EPS {
            j += 1;
        }
    }
    match out.last_mut() {
        Some(last) => last.hi = 1.0,
        None => out.push(Segment {
            lo: 0.0,
            hi: 1.0,
            left: 0,
            right: 0,
        }),
    }
    out
}

/// Union of several breakpoint sets with [`BREAKPOINT_EPS`] dedup.
pub(crate) fn union_breakpoints<'a>(sets: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc: Vec<f64> = vec![0.0, 1.0];
    for set in sets {
        let segs = overlay(&acc, set);
        acc = std::iter::once(0.0).chain(segs.iter().map(|s| s.hi)).collect();
    }
    acc
}

/// A real function on `[0, 1]` that is constant on finitely many cells.
///
/// Functions built through [`StepFunction::new`] and the arithmetic helpers are
/// kept in canonical form: no cell shorter than [`BREAKPOINT_EPS`] and no two
/// neighbouring cells with the same value. [`merge_refine`] is the one place
/// that deliberately produces non-canonical representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepFunction")]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawStepFunction> for StepFunction {
    type Error = Error;

    fn try_from(raw: RawStepFunction) -> Result<Self> {
        StepFunction::new(raw.breakpoints, raw.values)
    }
}

impl StepFunction {
    /// Builds a function from breakpoints and per-cell values, then normalizes.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidBreakpoints(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value {} of cell {}", values[i], i)));
        }
        check_resolution("step function", breakpoints.len())?;
        Ok(Self::from_raw(breakpoints, values).normalize())
    }

    /// Trusted constructor; callers guarantee the invariants.
    pub(crate) fn from_raw(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(breakpoints.len(), values.len() + 1);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            breakpoints,
            values,
        }
    }

    /// Builds a canonical function from segments carrying values.
    pub(crate) fn from_segments(cells: impl IntoIterator<Item = (f64, f64)>) -> Self {
        // (upper breakpoint, value) pairs, lower breakpoint of the first is 0.
        let mut bps = vec![0.0];
        let mut vals = Vec::new();
        for (hi, v) in cells {
            bps.push(hi);
            vals.push(v);
        }
        Self::from_raw(bps, vals).normalize()
    }

    /// # Panics
    /// If `c` is not finite.
    pub fn constant(c: f64) -> Self {
        assert!(c.is_finite(), "constant step function needs a finite value");
        Self::from_raw(vec![0.0, 1.0], vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Indicator of the interval with endpoints `lo < hi` inside `[0, 1]`.
    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        IntervalSet::new(vec![(lo, hi)]).map(|s| s.indicator())
    }

    /// Function with `values.len() = 2^level` values on the dyadic cells.
    pub fn from_dyadic(level: u32, values: Vec<f64>) -> Result<Self> {
        if level > max_dyadic_depth() {
            return Err(Error::Resolution {
                what: format!("dyadic level {level}"),
                needed: (1usize << level.min(62)) + 1,
                limit: max_breakpoints(),
            });
        }
        let cells = 1usize << level;
        if values.len() != cells {
            return Err(Error::InvalidBreakpoints(format!(
                "dyadic level {level} needs {cells} values, got {}",
                values.len()
            )));
        }
        let bps = dyadic_breakpoints(level);
        Self::new(bps, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(lo, hi, value)` over cells.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }

    /// Point evaluation; cells are taken half-open `[b_i, b_{i+1})`, and `1`
    /// belongs to the last cell.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        let cell = idx.saturating_sub(1).min(self.values.len() - 1);
        self.values[cell]
    }

    /// `E[f]`, the integral over `[0, 1]`.
    pub fn expectation(&self) -> f64 {
        compensated_sum(self.cells().map(|(lo, hi, v)| v * (hi - lo)))
    }

    /// The `L_p` norm `(E|f|^p)^{1/p}` for finite `p >= 1`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let scale = self.sup_norm();
        if scale == 0.0 {
            return Ok(0.0);
        }
        if p == 1.0 {
            return Ok(compensated_sum(self.cells().map(|(lo, hi, v)| v.abs() * (hi - lo))));
        }
        let sum = compensated_sum(self.cells().map(|(lo, hi, v)| (v.abs() / scale).powf(p) * (hi - lo)));
        Ok(scale * sum.powf(1.0 / p))
    }

    /// Essential supremum of `|f|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Merges equal neighbours and drops cells shorter than [`BREAKPOINT_EPS`].
    pub fn normalize(&self) -> Self {
        let mut bps = Vec::with_capacity(self.breakpoints.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.values.len());
        bps.push(0.0);
        for (_, hi, v) in self.cells() {
            let last = *bps.last().unwrap();
            if hi - last <= BREAKPOINT_EPS {
                continue;
            }
            if vals.last() == Some(&v) {
                *bps.last_mut().unwrap() = hi;
                continue;
            }
            vals.push(v);
            bps.push(hi);
        }
        if vals.is_empty() {
            // Degenerate input: every cell below tolerance. Keep the last value.
            return Self::from_raw(vec![0.0, 1.0], vec![*self.values.last().unwrap()]);
        }
        *bps.last_mut().unwrap() = 1.0;
        Self::from_raw(bps, vals)
    }

    /// Smallest `m` such that every breakpoint is a multiple of `2^-m`, if
    /// one exists within [`max_dyadic_depth`].
    pub fn dyadic_level(&self) -> Option<u32> {
        (0..=max_dyadic_depth()).find(|&m| {
            let scale = (1u64 << m) as f64;
            self.breakpoints.iter().all(|b| (b * scale).fract() == 0.0)
        })
    }

    pub fn is_canonical(&self) -> bool {
        self.breakpoints
            .windows(2)
            .all(|w| w[1] - w[0] > BREAKPOINT_EPS)
            && self.values.windows(2).all(|w| w[0] != w[1])
    }

    /// Applies `op` cellwise.
    ///
    /// # Panics
    /// If `op` produces a non-finite value.
    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| op(v)).collect();
        assert!(
            values.iter().all(|v| v.is_finite()),
            "step function map produced a non-finite value"
        );
        Self::from_raw(self.breakpoints.clone(), values).normalize()
    }

    /// Combines two functions pointwise on their common refinement.
    ///
    /// # Panics
    /// If `op` produces a non-finite value.
    pub fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        let segs = overlay(&self.breakpoints, &other.breakpoints);
        let out = Self::from_segments(
            segs.iter()
                .map(|s| (s.hi, op(self.values[s.left], other.values[s.right]))),
        );
        assert!(
            out.values.iter().all(|v| v.is_finite()),
            "step function combination produced a non-finite value"
        );
        out
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// Pointwise product `f * g`.
    pub fn product(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn pointwise_min(&self, other: &Self) -> Self {
        self.zip_with(other, f64::min)
    }

    pub fn pointwise_max(&self, other: &Self) -> Self {
        self.zip_with(other, f64::max)
    }

    /// `E[f g]` without materializing the product.
    pub fn inner(&self, other: &Self) -> f64 {
        compensated_sum(
            overlay(&self.breakpoints, &other.breakpoints)
                .iter()
                .map(|s| self.values[s.left] * other.values[s.right] * s.len()),
        )
    }

    /// `||f - g||_p` without materializing the difference.
    pub fn lp_distance(&self, other: &Self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let segs = overlay(&self.breakpoints, &other.breakpoints);
        let diff = |s: &Segment| (self.values[s.left] - other.values[s.right]).abs();
        let scale = segs.iter().map(diff).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(0.0);
        }
        if p == 1.0 {
            return Ok(compensated_sum(segs.iter().map(|s| diff(s) * s.len())));
        }
        let sum = compensated_sum(segs.iter().map(|s| (diff(s) / scale).powf(p) * s.len()));
        Ok(scale * sum.powf(1.0 / p))
    }

    /// Largest pointwise gap `sup |f - g|`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        overlay(&self.breakpoints, &other.breakpoints)
            .iter()
            .map(|s| (self.values[s.left] - other.values[s.right]).abs())
            .fold(0.0, f64::max)
    }

    /// `f(a(w))` for `w` in `[lo, hi]`, where `a` is the affine bijection of
    /// `[lo, hi]` onto the image interval sending `lo` to `img_lo` and `hi` to
    /// `img_hi` (decreasing when `img_hi < img_lo`). Returned as
    /// `(upper breakpoint, value)` pairs for [`StepFunction::from_segments`].
    pub(crate) fn affine_pullback(
        &self,
        lo: f64,
        hi: f64,
        img_lo: f64,
        img_hi: f64,
    ) -> Vec<(f64, f64)> {
        let (a, b) = (img_lo.min(img_hi), img_lo.max(img_hi));
        let bps = &self.breakpoints;
        // cells meeting (a, b)
        let first = bps.partition_point(|&x| x <= a + BREAKPOINT_EPS).saturating_sub(1);
        let last = bps
            .partition_point(|&x| x < b - BREAKPOINT_EPS)
            .clamp(first + 1, self.values.len());
        let scale = (hi - lo) / (img_hi - img_lo);
        let to_domain = |y: f64| lo + (y - img_lo) * scale;
        let mut out = Vec::with_capacity(last - first);
        if img_lo <= img_hi {
            for i in first..last {
                out.push((to_domain(bps[i + 1].min(b)), self.values[i]));
            }
        } else {
            for i in (first..last).rev() {
                out.push((to_domain(bps[i].max(a)), self.values[i]));
            }
        }
        if let Some(end) = out.last_mut() {
            end.0 = hi;
        }
        out
    }
}

/// Neumaier-compensated sum; cell sums over fine partitions stay accurate to
/// a few ulps of the result.
pub(crate) fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
    }
    sum + comp
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

pub(crate) fn dyadic_breakpoints(level: u32) -> Vec<f64> {
    let cells = 1usize << level;
    let h = (cells as f64).recip();
    (0..=cells).map(|i| i as f64 * h).collect()
}

impl Add for &StepFunction {
    type Output = StepFunction;
    fn add(self, rhs: &StepFunction) -> StepFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &StepFunction {
    type Output = StepFunction;
    fn sub(self, rhs: &StepFunction) -> StepFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &StepFunction {
    type Output = StepFunction;
    fn mul(self, a: f64) -> StepFunction {
        self.scale(a)
    }
}

impl Neg for &StepFunction {
    type Output = StepFunction;
    fn neg(self) -> StepFunction {
        self.map(|v| -v)
    }
}

/// Restates `f` and `g` on the union of their breakpoints.
///
/// The outputs are generally not canonical; pointwise values are unchanged.
pub fn merge_refine(f: &StepFunction, g: &StepFunction) -> (StepFunction, StepFunction) {
    let segs = overlay(&f.breakpoints, &g.breakpoints);
    let bps: Vec<f64> = std::iter::once(0.0).chain(segs.iter().map(|s| s.hi)).collect();
    let fv = segs.iter().map(|s| f.values[s.left]).collect();
    let gv = segs.iter().map(|s| g.values[s.right]).collect();
    (
        StepFunction::from_raw(bps.clone(), fv),
        StepFunction::from_raw(bps, gv),
    )
}

/// The Rademacher function `r_n(w) = sgn(sin(2^n pi w))`: `+1` on even and
/// `-1` on odd dyadic cells of level `n`.
pub fn rademacher(n: u32) -> Result<StepFunction> {
    if n == 0 {
        return Err(Error::Contract("Rademacher index starts at 1".into()));
    }
    let depth = max_dyadic_depth();
    if n > depth {
        return Err(Error::Resolution {
            what: format!("Rademacher function r_{n}"),
            needed: (1usize << n.min(62)) + 1,
            limit: max_breakpoints(),
        });
    }
    let cells = 1usize << n;
    let values = (0..cells)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    Ok(StepFunction::from_raw(dyadic_breakpoints(n), values))
}

/// A finite partition of `[0, 1]` into intervals of positive length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Partition {
    type Error = Error;
    fn try_from(bps: Vec<f64>) -> Result<Self> {
        Partition::new(bps)
    }
}

impl From<Partition> for Vec<f64> {
    fn from(p: Partition) -> Vec<f64> {
        p.breakpoints
    }
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        if let Some(w) = breakpoints.windows(2).find(|w| w[1] - w[0] <= BREAKPOINT_EPS) {
            return Err(Error::InvalidBreakpoints(format!(
                "partition cell [{}, {}] has no length",
                w[0], w[1]
            )));
        }
        check_resolution("partition", breakpoints.len())?;
        Ok(Self { breakpoints })
    }

    pub fn trivial() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
        }
    }

    /// `k` equal cells.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidBreakpoints("partition needs a cell".into()));
        }
        check_resolution("uniform partition", k + 1)?;
        let mut bps: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        bps[k] = 1.0;
        Ok(Self { breakpoints: bps })
    }

    /// The `2^level` dyadic cells.
    pub fn dyadic(level: u32) -> Result<Self> {
        if level > max_dyadic_depth() {
            return Err(Error::Resolution {
                what: format!("dyadic partition of level {level}"),
                needed: (1usize << level.min(62)) + 1,
                limit: max_breakpoints(),
            });
        }
        Ok(Self {
            breakpoints: dyadic_breakpoints(level),
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of cells, `|gamma|`.
    pub fn size(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    /// True when every cell of `self` lies inside a cell of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        coarser.breakpoints.iter().all(|&b| {
            let i = self.breakpoints.partition_point(|&x| x < b - BREAKPOINT_EPS);
            i < self.breakpoints.len() && (self.breakpoints[i] - b).abs() <= BREAKPOINT_EPS
        })
    }

    /// True when `f` is constant on every cell.
    pub fn is_aligned_with(&self, f: &StepFunction) -> bool {
        let as_partition = Partition {
            breakpoints: f.breakpoints.clone(),
        };
        self.refines(&as_partition)
    }
}

/// A finite union of intervals in `[0, 1]`, standing in for a measurable set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for IntervalSet {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        IntervalSet::new(v)
    }
}

impl From<IntervalSet> for Vec<(f64, f64)> {
    fn from(s: IntervalSet) -> Self {
        s.intervals
    }
}

impl IntervalSet {
    /// Sorts and merges the given intervals; each needs `0 <= lo < hi <= 1`.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::InvalidBreakpoints(format!(
                    "interval [{lo}, {hi}] is not a nonempty subinterval of [0, 1]"
                )));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + BREAKPOINT_EPS => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn empty() -> Self {
        Self { intervals: vec![] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Lebesgue measure of the set.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn indicator(&self) -> StepFunction {
        let mut cells = Vec::with_capacity(2 * self.intervals.len() + 1);
        for &(lo, hi) in &self.intervals {
            cells.push((lo, 0.0));
            cells.push((hi, 1.0));
        }
        cells.push((1.0, 0.0));
        StepFunction::from_segments(cells)
    }
}
