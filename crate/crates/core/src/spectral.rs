//! Affine nonexpansive iterations `F_g(f) = T f + g` on `L_p`, their escape
//! rate, and the ergodic-limit residuals attached to it.
//!
//! `F_g^n(0) = sum_{k<n} T^k g` is computed exactly. The escape rate
//! `tau = lim ||F_g^n(0)||_p / n` is estimated by the subadditive infimum,
//! and for `tau > 0` the direction `g* = v_N / ||v_N||_p` of the ergodic
//! averages `v_n = F_g^n(0) / n` yields the dual element
//! `zeta = sgn(g*) |g*|^{p-1}` whose functional `-E[f zeta]` should satisfy
//! `E[F_g^n(0) zeta] / n -> tau`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_space::{
    check_exponent, check_resolution, overlay, IntervalSet, Partition, StepFunction,
    BREAKPOINT_EPS,
};
use crate::limits_lab::default_test_suite;

/// Tolerance on the weights of a convex combination and on measure preservation.
const STRUCTURE_EPS: f64 = 1e-12;

/// One affine branch of an interval map: `[lo, hi]` onto the image interval,
/// with `lo -> img_lo` and `hi -> img_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineBranch {
    pub lo: f64,
    pub hi: f64,
    pub img_lo: f64,
    pub img_hi: f64,
}

/// A piecewise-affine map of `[0, 1]` preserving Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AffineBranch>", into = "Vec<AffineBranch>")]
pub struct IntervalMap {
    branches: Vec<AffineBranch>,
}

impl TryFrom<Vec<AffineBranch>> for IntervalMap {
    type Error = Error;
    fn try_from(b: Vec<AffineBranch>) -> Result<Self> {
        IntervalMap::new(b)
    }
}

impl From<IntervalMap> for Vec<AffineBranch> {
    fn from(m: IntervalMap) -> Self {
        m.branches
    }
}

impl IntervalMap {
    /// Checks that the branches tile `[0, 1]` in order, have images inside
    /// `[0, 1]`, and push Lebesgue measure forward to itself.
    pub fn new(branches: Vec<AffineBranch>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Contract(msg));
        if branches.is_empty() {
            return bad("an interval map needs at least one branch".into());
        }
        let mut at = 0.0;
        let mut density = StepFunction::zero();
        for br in &branches {
            let vals = [br.lo, br.hi, br.img_lo, br.img_hi];
            if vals.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
                return bad(format!("branch {br:?} leaves [0, 1]"));
            }
            if (br.lo - at).abs() > BREAKPOINT_EPS || br.hi - br.lo <= BREAKPOINT_EPS {
                return bad(format!("branch {br:?} does not continue the tiling at {at}"));
            }
            let width = (br.img_hi - br.img_lo).abs();
            if width <= BREAKPOINT_EPS {
                return bad(format!("branch {br:?} collapses its domain"));
            }
            let image = IntervalSet::new(vec![(br.img_lo.min(br.img_hi), br.img_lo.max(br.img_hi))])?;
            density = &density + &image.indicator().scale((br.hi - br.lo) / width);
            at = br.hi;
        }
        if (at - 1.0).abs() > BREAKPOINT_EPS {
            return bad(format!("branches end at {at}, not 1"));
        }
        let gap = density.sup_distance(&StepFunction::constant(1.0));
        if gap > STRUCTURE_EPS {
            return bad(format!("map does not preserve Lebesgue measure (density off by {gap})"));
        }
        Ok(Self { branches })
    }

    /// `w -> 2w mod 1`.
    pub fn doubling() -> Self {
        Self {
            branches: vec![
                AffineBranch { lo: 0.0, hi: 0.5, img_lo: 0.0, img_hi: 1.0 },
                AffineBranch { lo: 0.5, hi: 1.0, img_lo: 0.0, img_hi: 1.0 },
            ],
        }
    }

    /// Translates dyadic cell `i` of `level` onto cell `perm[i]`.
    pub fn dyadic_exchange(level: u32, perm: &[usize]) -> Result<Self> {
        let cells = 1usize << level;
        let mut seen = vec![false; cells];
        if perm.len() != cells || !perm.iter().all(|&j| j < cells && !std::mem::replace(&mut seen[j], true)) {
            return Err(Error::Contract(format!(
                "expected a permutation of 0..{cells}, got {perm:?}"
            )));
        }
        let h = (cells as f64).recip();
        let branches = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| AffineBranch {
                lo: i as f64 * h,
                hi: (i + 1) as f64 * h,
                img_lo: j as f64 * h,
                img_hi: (j + 1) as f64 * h,
            })
            .collect();
        Ok(Self { branches })
    }

    pub fn branches(&self) -> &[AffineBranch] {
        &self.branches
    }

    /// `f o phi`.
    pub fn compose(&self, f: &StepFunction) -> Result<StepFunction> {
        let mut segs = Vec::new();
        for br in &self.branches {
            segs.extend(f.affine_pullback(br.lo, br.hi, br.img_lo, br.img_hi));
        }
        check_resolution("Koopman image", segs.len() + 1)?;
        Ok(StepFunction::from_segments(segs))
    }
}

/// Linear operators on `L_p` with `||T f||_p <= ||f||_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonexpansiveOperator {
    Scale { lambda: f64 },
    Koopman { map: IntervalMap },
    CondExp { partition: Partition },
    ConvexCombo { parts: Vec<(f64, NonexpansiveOperator)> },
}

impl NonexpansiveOperator {
    pub fn scale(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda.abs() > 1.0 {
            return Err(Error::Contract(format!("scale factor {lambda} is not in [-1, 1]")));
        }
        Ok(Self::Scale { lambda })
    }

    pub fn identity() -> Self {
        Self::Scale { lambda: 1.0 }
    }

    pub fn doubling() -> Self {
        Self::Koopman {
            map: IntervalMap::doubling(),
        }
    }

    pub fn cond_exp(partition: Partition) -> Self {
        Self::CondExp { partition }
    }

    pub fn convex_combo(parts: Vec<(f64, NonexpansiveOperator)>) -> Result<Self> {
        if parts.is_empty() || parts.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract("convex weights must be nonnegative".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > STRUCTURE_EPS {
            return Err(Error::Contract(format!("convex weights sum to {total}")));
        }
        Ok(Self::ConvexCombo { parts })
    }

    pub fn apply(&self, f: &StepFunction) -> Result<StepFunction> {
        match self {
            Self::Scale { lambda } => Ok(f.scale(*lambda)),
            Self::Koopman { map } => map.compose(f),
            Self::CondExp { partition } => Ok(cond_exp(partition, f)),
            Self::ConvexCombo { parts } => {
                let mut acc = StepFunction::zero();
                for (w, op) in parts {
                    acc = &acc + &op.apply(f)?.scale(*w);
                    check_resolution("convex combination", acc.breakpoints().len())?;
                }
                Ok(acc)
            }
        }
    }
}

fn cond_exp(partition: &Partition, f: &StepFunction) -> StepFunction {
    let bps = partition.breakpoints();
    let mut sums = vec![0.0; partition.size()];
    for seg in overlay(bps, f.breakpoints()) {
        sums[seg.left] += seg.len() * f.values()[seg.right];
    }
    StepFunction::from_segments(
        partition
            .cells()
            .zip(sums)
            .map(|((lo, hi), s)| (hi, s / (hi - lo))),
    )
}

impl fmt::Display for NonexpansiveOperator {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scale { lambda } => write!(out, "scale:{lambda}"),
            Self::Koopman { map } if *map == IntervalMap::doubling() => write!(out, "doubling"),
            Self::Koopman { map } => write!(out, "koopman[{} branches]", map.branches.len()),
            Self::CondExp { partition } => match dyadic_level(partition) {
                Some(k) => write!(out, "condexp:{k}"),
                None => write!(out, "condexp[{} cells]", partition.size()),
            },
            Self::ConvexCombo { parts } => {
                write!(out, "mix:")?;
                for (i, (w, op)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(out, "+")?;
                    }
                    write!(out, "{w}*{op}")?;
                }
                Ok(())
            }
        }
    }
}

fn dyadic_level(p: &Partition) -> Option<u32> {
    let size = p.size();
    if !size.is_power_of_two() {
        return None;
    }
    let level = size.trailing_zeros();
    (Partition::dyadic(level).ok()? == *p).then_some(level)
}

/// Parses `identity`, `scale:L`, `doubling`, `exchange:K:P0,P1,...`,
/// `condexp:K` and `mix:W*OP+W*OP+...` (no nested `mix`).
impl FromStr for NonexpansiveOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Contract(format!("cannot parse operator {s:?}"));
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("mix:") {
            let parts = rest
                .split('+')
                .map(|item| {
                    let (w, op) = item.split_once('*').ok_or_else(bad)?;
                    let w: f64 = w.trim().parse().map_err(|_| bad())?;
                    if op.trim_start().starts_with("mix:") {
                        return Err(bad());
                    }
                    Ok((w, op.parse()?))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::convex_combo(parts);
        }
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "identity" if arg.is_empty() => Ok(Self::identity()),
            "doubling" if arg.is_empty() => Ok(Self::doubling()),
            "scale" => Self::scale(arg.parse().map_err(|_| bad())?),
            "condexp" => Ok(Self::cond_exp(Partition::dyadic(
                arg.parse().map_err(|_| bad())?,
            )?)),
            "exchange" => {
                let (level, perm) = arg.split_once(':').ok_or_else(bad)?;
                let level: u32 = level.parse().map_err(|_| bad())?;
                let perm = perm
                    .split(',')
                    .map(|x| x.trim().parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Koopman {
                    map: IntervalMap::dyadic_exchange(level, &perm)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// `F_g^n(0) = sum_{k<n} T^k g`.
pub fn iterate_affine(op: &NonexpansiveOperator, g: &StepFunction, n: u64) -> Result<StepFunction> {
    let mut x = StepFunction::zero();
    for _ in 0..n {
        x = &op.apply(&x)? + g;
    }
    Ok(x)
}

/// Worst violations of the operator contract on a probe suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeContract {
    /// `max (||T f||_p - ||f||_p)`.
    pub norm_excess: f64,
    /// `max sup |T(a f + b h) - a T f - b T h|` over probe pairs.
    pub linearity_defect: f64,
}

impl ProbeContract {
    pub fn holds(&self) -> bool {
        self.norm_excess <= 1e-9 && self.linearity_defect <= 1e-12
    }
}

/// Evaluates the operator contract on the default test suite of
/// [`crate::limits_lab`].
pub fn probe_contract(op: &NonexpansiveOperator, p: f64) -> Result<ProbeContract> {
    check_exponent(p)?;
    let probes: Vec<StepFunction> = default_test_suite().into_iter().map(|t| t.f).collect();
    let images: Vec<StepFunction> = probes.iter().map(|f| op.apply(f)).collect::<Result<_>>()?;
    let mut norm_excess = f64::NEG_INFINITY;
    for (f, tf) in probes.iter().zip(&images) {
        norm_excess = norm_excess.max(tf.lp_norm(p)? - f.lp_norm(p)?);
    }
    let (a, b) = (0.7, -1.3);
    let mut linearity_defect: f64 = 0.0;
    for i in 0..probes.len() {
        for j in i..probes.len() {
            let mixed = &probes[i].scale(a) + &probes[j].scale(b);
            let lhs = op.apply(&mixed)?;
            let rhs = &images[i].scale(a) + &images[j].scale(b);
            linearity_defect = linearity_defect.max(lhs.sup_distance(&rhs));
        }
    }
    Ok(ProbeContract {
        norm_excess,
        linearity_defect,
    })
}

/// One row of the bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: u64,
    /// `a_n = ||F^n(0)||_p`.
    pub a_n: f64,
    /// `a_n / n = ||v_n||_p`.
    pub ratio: f64,
    /// `a_{2n}/(2n) - a_n/n`, when `2n` was computed.
    pub richardson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeRate {
    /// `min_n a_n / n`, an upper bound on `tau` by subadditivity.
    pub tau_upper: f64,
    /// `a_N / N` at the largest computed `N`.
    pub tau_last: f64,
    /// Rows at `n = 1, 2, 4, ...` and at `n_max`.
    pub table: Vec<BoundRow>,
    /// `max (a_{m+n} - a_m - a_n)` over all `m + n <= n_max`.
    pub max_subadditivity_excess: f64,
}

/// `n = 1, 2, 4, ...` up to `n_max`, plus `n_max` itself.
pub fn bound_schedule(n_max: u64) -> Vec<u64> {
    let mut s: Vec<u64> = std::iter::successors(Some(1u64), |&n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect();
    if s.last() != Some(&n_max) {
        s.push(n_max);
    }
    s
}

struct Orbit {
    /// `a[n] = ||F^n(0)||_p`, with `a[0] = 0`.
    norms: Vec<f64>,
    /// `(n, F^n(0))` on the bound schedule.
    kept: Vec<(u64, StepFunction)>,
}

fn run_orbit(op: &NonexpansiveOperator, g: &StepFunction, p: f64, n_max: u64) -> Result<Orbit> {
    check_exponent(p)?;
    if n_max < 4 {
        return Err(Error::Contract(format!("n_max must be at least 4, got {n_max}")));
    }
    let schedule = bound_schedule(n_max);
    let mut norms = vec![0.0];
    let mut kept = Vec::with_capacity(schedule.len());
    let mut x = StepFunction::zero();
    for n in 1..=n_max {
        x = &op.apply(&x)? + g;
        norms.push(x.lp_norm(p)?);
        if schedule.binary_search(&n).is_ok() {
            kept.push((n, x.clone()));
        }
    }
    Ok(Orbit { norms, kept })
}

fn escape_from_orbit(orbit: &Orbit) -> EscapeRate {
    let a = &orbit.norms;
    let n_max = a.len() - 1;
    let ratio = |n: usize| a[n] / n as f64;
    let tau_upper = (1..=n_max).map(ratio).fold(f64::INFINITY, f64::min);
    let table = orbit
        .kept
        .iter()
        .map(|&(n, _)| {
            let n = n as usize;
            BoundRow {
                n: n as u64,
                a_n: a[n],
                ratio: ratio(n),
                richardson: (2 * n <= n_max).then(|| ratio(2 * n) - ratio(n)),
            }
        })
        .collect();
    let max_subadditivity_excess = (1..=n_max)
        .into_par_iter()
        .map(|m| {
            (1..=n_max - m)
                .map(|n| a[m + n] - a[m] - a[n])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    EscapeRate {
        tau_upper,
        tau_last: ratio(n_max),
        table,
        max_subadditivity_excess,
    }
}

/// Escape rate of `F_g` on `L_p` from the orbit `F_g^n(0)`, `n <= n_max`.
pub fn escape_rate(
    op: &NonexpansiveOperator,
    g: &StepFunction,
    p: f64,
    n_max: u64,
) -> Result<EscapeRate> {
    Ok(escape_from_orbit(&run_orbit(op, g, p, n_max)?))
}

/// Residuals of the ergodic limit at one `n` of the bound schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub n: u64,
    /// `||v_n||_p`.
    pub v_norm: f64,
    /// `||v_n - tau g*||_p`.
    pub r1: Option<f64>,
    /// `|E[F^n(0) zeta] / n - tau|`.
    pub r2: Option<f64>,
    /// `||v_n + tau g*||_p`, which tends to `2 tau`.
    pub plus_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub operator: String,
    pub p: f64,
    pub n_max: u64,
    /// Equal to `escape.tau_upper`.
    pub tau: f64,
    pub escape: EscapeRate,
    pub g_star: Option<StepFunction>,
    pub zeta: Option<StepFunction>,
    /// `||zeta||_{p/(p-1)}`.
    pub zeta_dual_norm: Option<f64>,
    /// `E[g* zeta]`.
    pub pairing: Option<f64>,
    pub residuals: Vec<ResidualRow>,
    /// `r1` nonincreasing along the schedule.
    pub r1_monotone: Option<bool>,
    pub notice: Option<String>,
}

/// Runs the orbit and evaluates the ergodic-limit residuals.
///
/// When `tau <= zero_tol` no direction is formed; the report then carries a
/// notice and the rows show `||v_n||_p` only.
pub fn ergodic_limit_check(
    op: &NonexpansiveOperator,
    g: &StepFunction,
    p: f64,
    n_max: u64,
    zero_tol: f64,
) -> Result<SpectralReport> {
    if p == 1.0 {
        return Err(Error::UnsupportedBranch(p));
    }
    check_exponent(p)?;
    let q = p / (p - 1.0);
    let orbit = run_orbit(op, g, p, n_max)?;
    let escape = escape_from_orbit(&orbit);
    let tau = escape.tau_upper;

    let direction = if tau > zero_tol {
        let (big_n, x) = orbit.kept.last().expect("schedule is nonempty");
        let v = x.scale(1.0 / *big_n as f64);
        let g_star = v.scale(1.0 / v.lp_norm(p)?);
        let zeta = g_star.map(|t| t.signum() * t.abs().powf(p - 1.0));
        Some((g_star, zeta))
    } else {
        None
    };

    let residuals: Vec<ResidualRow> = orbit
        .kept
        .par_iter()
        .map(|(n, x)| {
            let nf = *n as f64;
            let v = x.scale(1.0 / nf);
            let v_norm = orbit.norms[*n as usize] / nf;
            let (r1, r2, plus_norm) = match &direction {
                Some((g_star, zeta)) => {
                    let tg = g_star.scale(tau);
                    (
                        Some(v.lp_distance(&tg, p)?),
                        Some((x.inner(zeta) / nf - tau).abs()),
                        Some((&v + &tg).lp_norm(p)?),
                    )
                }
                None => (None, None, None),
            };
            Ok(ResidualRow {
                n: *n,
                v_norm,
                r1,
                r2,
                plus_norm,
            })
        })
        .collect::<Result<_>>()?;

    let r1_monotone = direction.as_ref().map(|_| {
        residuals
            .windows(2)
            .all(|w| w[1].r1.unwrap() <= w[0].r1.unwrap() + 1e-12)
    });
    let notice = direction.is_none().then(|| {
        format!(
            "degenerate direction: tau = {tau:e} <= {zero_tol:e}, no g*/zeta formed; \
             rows report ||v_n||_p only"
        )
    });
    let (g_star, zeta) = match direction {
        Some((gs, z)) => (Some(gs), Some(z)),
        None => (None, None),
    };
    let zeta_dual_norm = zeta.as_ref().map(|z| z.lp_norm(q)).transpose()?;
    let pairing = match (&g_star, &zeta) {
        (Some(gs), Some(z)) => Some(gs.inner(z)),
        _ => None,
    };
    Ok(SpectralReport {
        operator: op.to_string(),
        p,
        n_max,
        tau,
        escape,
        g_star,
        zeta,
        zeta_dual_norm,
        pairing,
        residuals,
        r1_monotone,
        notice,
    })
}
