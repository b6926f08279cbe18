//! Convergence experiments for sequences of internal metric functionals.
//!
//! Each [`ExampleSequence`] generates `g_n` exactly and knows the metric
//! functional that `h_{g_n}` converges to. [`run_convergence`] tabulates
//! `h_{g_n}(f)` against the limit on a suite of test functions.
//!
//! Also here: the partition net realizing a constant atomic random measure as
//! a limit of internal functionals ([`converse_net`]), and the witness sequence
//! realizing a linear functional `-E[f zeta]` on `L_p` ([`lp_witness_sequence`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{conjugate_exponent, eval_internal, MetricFunctional, CONSTRAINT_EPS};
use crate::interval_space::{
    check_resolution, rademacher, IntervalSet, Partition, StepFunction,
};
use crate::rbar_measures::{AtomicMeasure, Eta, RandomMeasureField};
use crate::report::{ConvergenceReport, ConvergenceRow};

/// Largest denominator accepted for mixture weights in [`converse_net`].
pub const MAX_WEIGHT_DENOMINATOR: u64 = 1 << 20;

// Distinct fractions with denominators <= 2^20 are at least 2^-40 apart,
// far above this.
const RATIONAL_TOL: f64 = 4.0 * f64::EPSILON;

/// A named test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub f: StepFunction,
}

impl TestFunction {
    pub fn new(id: impl Into<String>, f: StepFunction) -> Self {
        Self { id: id.into(), f }
    }
}

/// Midpoint samples of the two-tooth sawtooth `w -> 2 frac(2w)` on the
/// dyadic cells of `level`. Takes values in `(0, 2)` with mean 1, so it lies
/// in `K`.
pub fn sawtooth_step(level: u32) -> Result<StepFunction> {
    let cells = 1usize << level;
    let values = (0..cells)
        .map(|i| {
            let mid = (i as f64 + 0.5) / cells as f64;
            2.0 * (2.0 * mid).fract()
        })
        .collect();
    StepFunction::from_dyadic(level, values)
}

/// `{0, 1, r_1, r_2, 2 * 1_[0,1/2], sawtooth at level 4}`.
pub fn default_test_suite() -> Vec<TestFunction> {
    vec![
        TestFunction::new("zero", StepFunction::zero()),
        TestFunction::new("one", StepFunction::constant(1.0)),
        TestFunction::new("r1", rademacher(1).expect("r_1")),
        TestFunction::new("r2", rademacher(2).expect("r_2")),
        TestFunction::new(
            "two_left_half",
            StepFunction::indicator(0.0, 0.5).expect("interval").scale(2.0),
        ),
        TestFunction::new("sawtooth4", sawtooth_step(4).expect("level 4")),
    ]
}

/// `n = 2, 4, 8, ...` up to `n_max`.
pub fn doubling_schedule(n_max: u64) -> Vec<u64> {
    std::iter::successors(Some(2u64), |&n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect()
}

fn check_index(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Contract("sequence index starts at 1".into()));
    }
    Ok(())
}

/// `-height on [1/2 - 1/(n+1), 1/2]` and `+height on (1/2, 1/2 + 1/(n+1)]`.
fn two_spikes(n: u64, height: f64) -> Result<StepFunction> {
    check_index(n)?;
    let w = 1.0 / (n as f64 + 1.0);
    Ok(StepFunction::from_segments([
        (0.5 - w, 0.0),
        (0.5, -height),
        (0.5 + w, height),
        (1.0, 0.0),
    ]))
}

/// `g_n = -n^2 1_{A_n} + n^2 1_{B_n}`; unbounded in `L_1` yet `h_{g_n} -> h_0`.
pub fn spike_sequence(n: u64) -> Result<StepFunction> {
    let nf = n as f64;
    two_spikes(n, nf * nf)
}

/// `g_n = -n 1_{A_n} + n 1_{B_n}`; bounded by 2 in `L_1`.
pub fn bounded_spike_sequence(n: u64) -> Result<StepFunction> {
    two_spikes(n, n as f64)
}

/// `g_n = n 1_A + g 1_{Omega \ A}`.
pub fn escape_sequence(a: &IntervalSet, g: &StepFunction, n: u64) -> Result<StepFunction> {
    if a.measure() <= 0.0 {
        return Err(Error::Contract("the escape set needs positive measure".into()));
    }
    let ind = a.indicator();
    Ok(ind.zip_with(g, |i, gv| if i > 0.5 { n as f64 } else { gv }))
}

/// `1_A delta_{+inf} + 1_{Omega \ A} delta_{eta_g}`.
pub fn escape_limit_field(a: &IntervalSet, g: &StepFunction) -> Result<RandomMeasureField> {
    RandomMeasureField::two_set_field(a, &IntervalSet::empty(), g)
}

/// The constant field `1/2 delta_{eta_-1} + 1/2 delta_{eta_+1}`.
pub fn rademacher_limit_field() -> RandomMeasureField {
    let mu = AtomicMeasure::new([(Eta::Finite(-1.0), 0.5), (Eta::Finite(1.0), 0.5)])
        .expect("valid weights");
    RandomMeasureField::constant(mu).expect("probability measure")
}

/// Tabulates `h_{r_n}(f)` for `n = 1..=n_max` against the mixture limit.
///
/// For `f` constant on the dyadic cells of level `m`, rows with `n > m`
/// agree with the limit up to rounding.
pub fn rademacher_limit_check(n_max: u32, tests: &[TestFunction]) -> Result<ConvergenceReport> {
    let schedule: Vec<u64> = (1..=n_max as u64).collect();
    run_convergence(&ExampleSequence::Rademacher, tests, &schedule)
}

/// Best rational approximation `a / b` of `x` with `b <= max_den`.
fn best_rational(x: f64, max_den: u64) -> (u64, u64) {
    // continued fraction convergents with a final semiconvergent
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    loop {
        let a = r.floor();
        if a > u64::MAX as f64 / 2.0 {
            break;
        }
        let a = a as u64;
        let q2 = a.saturating_mul(q1).saturating_add(q0);
        if q2 > max_den {
            let k = (max_den - q0) / q1.max(1);
            let (ps, qs) = (k * p1 + p0, k * q1 + q0);
            if q1 > 0 && (x - ps as f64 / qs as f64).abs() < (x - p1 as f64 / q1 as f64).abs() {
                return (ps, qs);
            }
            break;
        }
        let p2 = a * p1 + p0;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    (p1, q1.max(1))
}

/// Rounds the weights of a probability measure to multiples of
/// `1 / MAX_WEIGHT_DENOMINATOR` summing to one, by largest remainders.
///
/// Returns the rounded measure and the total variation of the perturbation.
pub fn rationalize_mixture(mixture: &AtomicMeasure) -> Result<(AtomicMeasure, f64)> {
    if !mixture.is_probability() {
        return Err(Error::Contract("mixture must be a probability measure".into()));
    }
    let den = MAX_WEIGHT_DENOMINATOR as f64;
    let atoms: Vec<(Eta, f64)> = mixture.atoms().collect();
    let mut counts: Vec<u64> = atoms.iter().map(|(_, w)| (w * den).floor() as u64).collect();
    let mut short = MAX_WEIGHT_DENOMINATOR.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = atoms[i].1 * den - counts[i] as f64;
        let rj = atoms[j].1 * den - counts[j] as f64;
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().cycle().take(atoms.len() * 2) {
        if short == 0 {
            break;
        }
        counts[i] += 1;
        short -= 1;
    }
    let rounded: Vec<(Eta, f64)> = atoms
        .iter()
        .zip(&counts)
        .map(|(&(e, _), &c)| (e, c as f64 / den))
        .collect();
    let perturbation: f64 = atoms
        .iter()
        .zip(&rounded)
        .map(|(a, b)| (a.1 - b.1).abs())
        .sum();
    if perturbation > 0.0 {
        log::warn!("mixture weights rounded to denominator 2^20, total variation {perturbation:e}");
    }
    Ok((AtomicMeasure::new(rounded)?, perturbation))
}

/// The partition-net element `g_gamma` for a constant mixture
/// `sum_k theta_k delta_{eta^(k)}`.
///
/// Each cell of `gamma` is split left to right, in atom order, into sub-cells
/// of relative length `theta_k`. On sub-cell `k` the function takes `r_k` for
/// a finite atom and `+|gamma|` / `-|gamma|` for the points at infinity.
pub fn converse_net(mixture: &AtomicMeasure, gamma: &Partition) -> Result<StepFunction> {
    if !mixture.is_probability() {
        return Err(Error::Contract("mixture must be a probability measure".into()));
    }
    let mut fractions = Vec::with_capacity(mixture.len());
    for (eta, w) in mixture.atoms() {
        let (a, b) = best_rational(w, MAX_WEIGHT_DENOMINATOR);
        if (w - a as f64 / b as f64).abs() > RATIONAL_TOL {
            return Err(Error::UnsupportedWeights {
                max_denominator: MAX_WEIGHT_DENOMINATOR,
                detail: format!("weight {w} of atom {eta:?}; round with rationalize_mixture"),
            });
        }
        fractions.push((eta, a as f64 / b as f64));
    }
    let size = gamma.size() as f64;
    check_resolution("partition net", gamma.size() * fractions.len() + 1)?;
    let value = |eta: Eta| match eta {
        Eta::Finite(r) => r,
        Eta::PlusInfinity => size,
        Eta::MinusInfinity => -size,
    };
    let mut cells = Vec::with_capacity(gamma.size() * fractions.len());
    for (lo, hi) in gamma.cells() {
        let width = hi - lo;
        let mut cum = 0.0;
        for (k, &(eta, theta)) in fractions.iter().enumerate() {
            cum += theta;
            let upper = if k + 1 == fractions.len() {
                hi
            } else {
                lo + cum * width
            };
            cells.push((upper, value(eta)));
        }
    }
    Ok(StepFunction::from_segments(cells))
}

/// Intermediate objects of the witness construction for step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessStep {
    /// Unit-norm modification of `zeta` in `L_q`.
    pub zeta_n: StepFunction,
    /// Norming element of `zeta_n`: `||g~||_p = 1`, `E[g~ zeta_n] = 1`.
    pub g_tilde: StepFunction,
    /// `n * g~`.
    pub g_n: StepFunction,
}

/// Builds `zeta_n`, its norming element and `g_n = n g~_n`, with
/// `A_n = [0, 1 - 1/(n+1)]`.
pub fn lp_witness_step(zeta: &StepFunction, p: f64, n: u64) -> Result<WitnessStep> {
    check_index(n)?;
    let q = conjugate_exponent(p)?;
    let norm = zeta.lp_norm(q)?;
    if norm > 1.0 + CONSTRAINT_EPS {
        return Err(Error::Contract(format!(
            "zeta must lie in the unit ball of L_{q}, has norm {norm}"
        )));
    }
    let deficit = (1.0 - norm.powf(q)).max(0.0);
    let tail = 1.0 / (n as f64 + 1.0);
    let outside = StepFunction::indicator(1.0 - tail, 1.0)?;
    let zeta_n = zeta.zip_with(&outside, |z, o| {
        if o > 0.5 {
            (deficit / tail + z.abs().powf(q)).powf(1.0 / q)
        } else {
            z
        }
    });
    let g_tilde = zeta_n.map(|z| z.signum() * z.abs().powf(q - 1.0));
    let g_n = g_tilde.scale(n as f64);
    Ok(WitnessStep {
        zeta_n,
        g_tilde,
        g_n,
    })
}

/// `g_n` of the witness sequence, whose internal functionals converge to
/// `f -> -E[f zeta]` on `L_p`.
pub fn lp_witness_sequence(zeta: &StepFunction, p: f64, n: u64) -> Result<StepFunction> {
    lp_witness_step(zeta, p, n).map(|w| w.g_n)
}

/// Whether `zeta_n = zeta` for every `n`: unit norm in `L_q` and `zeta >= 0`
/// on `[1/2, 1]`, the largest tail `Omega \ A_1`.
///
/// Only then is `|h_{g_n}(f) + E[f zeta]| = ||f - n g~||_p - n + E[f zeta]`
/// nonincreasing in `n` (its derivative in `n` is `E[zeta_t g~] - 1 <= 0`).
/// Otherwise the tail correction contributes a term of order `n^{-1/p}`
/// with the opposite sign and the error need not be monotone.
pub fn witness_tail_is_exact(zeta: &StepFunction, p: f64) -> Result<bool> {
    let q = conjugate_exponent(p)?;
    let tail_nonneg = zeta.cells().all(|(_, hi, v)| hi <= 0.5 || v >= 0.0);
    Ok(tail_nonneg && (zeta.lp_norm(q)? - 1.0).abs() <= CONSTRAINT_EPS)
}

/// The sequences with a known metric-functional limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum ExampleSequence {
    Spike,
    BoundedSpike,
    EscapeOnSet { set: IntervalSet, anchor: StepFunction },
    Rademacher,
    /// Indexed by `n = |gamma|` over uniform partitions.
    ConverseNet { mixture: AtomicMeasure },
    LpWitness { zeta: StepFunction, p: f64 },
}

impl ExampleSequence {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Spike => "spike",
            Self::BoundedSpike => "bounded-spike",
            Self::EscapeOnSet { .. } => "escape",
            Self::Rademacher => "rademacher",
            Self::ConverseNet { .. } => "converse-net",
            Self::LpWitness { .. } => "lp-witness",
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            Self::LpWitness { p, .. } => *p,
            _ => 1.0,
        }
    }

    pub fn generate(&self, n: u64) -> Result<StepFunction> {
        match self {
            Self::Spike => spike_sequence(n),
            Self::BoundedSpike => bounded_spike_sequence(n),
            Self::EscapeOnSet { set, anchor } => escape_sequence(set, anchor, n),
            Self::Rademacher => {
                check_index(n)?;
                let depth = u32::try_from(n).unwrap_or(u32::MAX);
                rademacher(depth)
            }
            Self::ConverseNet { mixture } => {
                check_index(n)?;
                converse_net(mixture, &Partition::uniform(n as usize)?)
            }
            Self::LpWitness { zeta, p } => lp_witness_sequence(zeta, *p, n),
        }
    }

    /// The field representing the limit, for the `L_1` sequences.
    pub fn limit_field(&self) -> Result<Option<RandomMeasureField>> {
        Ok(match self {
            Self::Spike | Self::BoundedSpike => Some(RandomMeasureField::constant(
                AtomicMeasure::dirac(Eta::Finite(0.0)),
            )?),
            Self::EscapeOnSet { set, anchor } => Some(escape_limit_field(set, anchor)?),
            Self::Rademacher => Some(rademacher_limit_field()),
            Self::ConverseNet { mixture } => Some(RandomMeasureField::constant(mixture.clone())?),
            Self::LpWitness { .. } => None,
        })
    }

    /// The metric functional `lim h_{g_n}`.
    pub fn limit(&self) -> Result<MetricFunctional> {
        match self {
            Self::LpWitness { zeta, p } => MetricFunctional::lp_linear(zeta.clone(), *p),
            _ => MetricFunctional::l1_form(
                self.limit_field()?
                    .expect("every L1 sequence has a limit field"),
            ),
        }
    }
}

/// Evaluates `h_{g_n}` and the limit on every `(n, test)` pair.
///
/// Rows are computed in parallel and sorted afterwards, so the report does
/// not depend on scheduling.
pub fn run_convergence(
    seq: &ExampleSequence,
    tests: &[TestFunction],
    schedule: &[u64],
) -> Result<ConvergenceReport> {
    let limit = seq.limit()?;
    run_convergence_against(seq, &limit, tests, schedule)
}

/// As [`run_convergence`] with an explicitly supplied limit functional.
pub fn run_convergence_against(
    seq: &ExampleSequence,
    limit: &MetricFunctional,
    tests: &[TestFunction],
    schedule: &[u64],
) -> Result<ConvergenceReport> {
    let p = seq.p();
    let limits: Vec<f64> = tests
        .iter()
        .map(|t| limit.eval(&t.f))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<ConvergenceRow>> = schedule
        .par_iter()
        .map(|&n| {
            let g = seq.generate(n)?;
            tests
                .iter()
                .zip(&limits)
                .map(|(t, &h_limit)| {
                    let h_n = eval_internal(&g, p, &t.f)?;
                    Ok(ConvergenceRow {
                        experiment: seq.id().to_string(),
                        n,
                        test_id: t.id.clone(),
                        h_n,
                        h_limit,
                        abs_err: (h_n - h_limit).abs(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceReport::new(rows.into_iter().flatten().collect()))
}

/// Boundedness of a sequence next to the mass its limit field puts at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub experiment: String,
    /// `max ||g_n||_1` over the schedule.
    pub max_l1_norm: f64,
    /// `||g_n||_1` at the last scheduled `n`.
    pub last_l1_norm: f64,
    pub mass_at_infinity: f64,
}

/// Reports `sup ||g_n||_1` along `schedule` and the limit field's mass at
/// infinity, for an `L_1` sequence.
pub fn tightness(seq: &ExampleSequence, schedule: &[u64]) -> Result<Tightness> {
    let field = seq
        .limit_field()?
        .ok_or_else(|| Error::Contract(format!("{} has no L1 limit field", seq.id())))?;
    let norms: Vec<f64> = schedule
        .iter()
        .map(|&n| seq.generate(n)?.lp_norm(1.0))
        .collect::<Result<_>>()?;
    Ok(Tightness {
        experiment: seq.id().to_string(),
        max_l1_norm: norms.iter().copied().fold(0.0, f64::max),
        last_l1_norm: norms.last().copied().unwrap_or(0.0),
        mass_at_infinity: field.mass_at_infinity(),
    })
}
