//! The compactified real line and finite atomic measures on it.
//!
//! A point [`Eta`] of the compactified line is one of the 1-Lipschitz functions
//! `s -> |s - r| - |r|` or one of the two points at infinity `s -> -s`,
//! `s -> s`. A [`RandomMeasureField`] assigns an [`AtomicMeasure`] on these
//! points to every cell of a partition of `[0, 1]`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_space::{
    compensated_sum, overlay, union_breakpoints, validate_breakpoints, Partition, StepFunction, BREAKPOINT_EPS,
};

/// Two finite atoms closer than this are merged.
pub const ATOM_MERGE_EPS: f64 = 1e-12;

/// Tolerance on `|total_mass - 1|` for a probability measure.
pub const PROBABILITY_EPS: f64 = 1e-12;

/// A point of the compactified real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EtaRepr", into = "EtaRepr")]
pub enum Eta {
    /// `s -> |s - r| - |r|`
    Finite(f64),
    /// `s -> -s`
    PlusInfinity,
    /// `s -> s`
    MinusInfinity,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "tag")]
enum EtaRepr {
    #[serde(rename = "finite")]
    Finite { r: f64 },
    #[serde(rename = "+inf")]
    PlusInf,
    #[serde(rename = "-inf")]
    MinusInf,
}

impl TryFrom<EtaRepr> for Eta {
    type Error = Error;
    fn try_from(r: EtaRepr) -> Result<Self> {
        match r {
            EtaRepr::Finite { r } => Eta::finite(r),
            EtaRepr::PlusInf => Ok(Eta::PlusInfinity),
            EtaRepr::MinusInf => Ok(Eta::MinusInfinity),
        }
    }
}

impl From<Eta> for EtaRepr {
    fn from(e: Eta) -> Self {
        match e {
            Eta::Finite(r) => EtaRepr::Finite { r },
            Eta::PlusInfinity => EtaRepr::PlusInf,
            Eta::MinusInfinity => EtaRepr::MinusInf,
        }
    }
}

impl Eta {
    pub fn finite(r: f64) -> Result<Self> {
        if r.is_finite() {
            Ok(Eta::Finite(r))
        } else {
            Err(Error::NonFinite(format!("finite atom location {r}")))
        }
    }

    pub fn is_infinite(&self) -> bool {
        !matches!(self, Eta::Finite(_))
    }

    /// Location of a finite atom.
    pub fn location(&self) -> Option<f64> {
        match *self {
            Eta::Finite(r) => Some(r),
            _ => None,
        }
    }

    /// Evaluates the point as a function of `s`.
    pub fn eval(&self, s: f64) -> f64 {
        eta_eval(*self, s)
    }

    fn order(&self, other: &Eta) -> Ordering {
        fn rank(e: &Eta) -> u8 {
            match e {
                Eta::MinusInfinity => 0,
                Eta::Finite(_) => 1,
                Eta::PlusInfinity => 2,
            }
        }
        match (self, other) {
            (Eta::Finite(a), Eta::Finite(b)) => a.total_cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    fn merges_with(&self, other: &Eta) -> bool {
        match (self, other) {
            (Eta::Finite(a), Eta::Finite(b)) => (a - b).abs() <= ATOM_MERGE_EPS,
            _ => self == other,
        }
    }
}

/// `eta(s)`: `|s - r| - |r|` for a finite atom, `-s` at `+inf`, `s` at `-inf`.
pub fn eta_eval(e: Eta, s: f64) -> f64 {
    match e {
        Eta::Finite(r) => (s - r).abs() - r.abs(),
        Eta::PlusInfinity => -s,
        Eta::MinusInfinity => s,
    }
}

/// A finite nonnegative combination of Dirac masses on the compactified line.
///
/// Atoms are kept sorted (`-inf`, finite ascending, `+inf`), merged within
/// [`ATOM_MERGE_EPS`], and zero weights are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct AtomicMeasure {
    atoms: Vec<Eta>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<Eta>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for AtomicMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        if r.atoms.len() != r.weights.len() {
            return Err(Error::Contract(format!(
                "{} atoms but {} weights",
                r.atoms.len(),
                r.weights.len()
            )));
        }
        AtomicMeasure::new(r.atoms.into_iter().zip(r.weights))
    }
}

impl From<AtomicMeasure> for MeasureRepr {
    fn from(m: AtomicMeasure) -> Self {
        MeasureRepr {
            atoms: m.atoms,
            weights: m.weights,
        }
    }
}

impl AtomicMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (Eta, f64)>) -> Result<Self> {
        let mut pairs: Vec<(Eta, f64)> = Vec::new();
        for (eta, w) in atoms {
            if let Eta::Finite(r) = eta {
                if !r.is_finite() {
                    return Err(Error::NonFinite(format!("atom location {r}")));
                }
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Contract(format!(
                    "atom weight must be finite and nonnegative, got {w}"
                )));
            }
            if w > 0.0 {
                pairs.push((eta, w));
            }
        }
        Ok(Self::from_pairs(pairs))
    }

    fn from_pairs(mut pairs: Vec<(Eta, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.order(&b.0));
        let mut atoms: Vec<Eta> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (eta, w) in pairs {
            match atoms.last() {
                Some(last) if last.merges_with(&eta) => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(eta);
                    weights.push(w);
                }
            }
        }
        Self { atoms, weights }
    }

    /// `delta_eta`.
    pub fn dirac(eta: Eta) -> Self {
        Self {
            atoms: vec![eta],
            weights: vec![1.0],
        }
    }

    /// Convex combination `sum_i w_i mu_i`; weights must be nonnegative.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a AtomicMeasure)>) -> Self {
        let mut pairs = Vec::new();
        for (w, mu) in parts {
            debug_assert!(w >= 0.0);
            if w > 0.0 {
                pairs.extend(mu.atoms().map(|(e, x)| (e, w * x)));
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (Eta, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= PROBABILITY_EPS
    }

    /// Mass carried by the two points at infinity.
    pub fn mass_at_infinity(&self) -> f64 {
        self.atoms()
            .filter(|(e, _)| e.is_infinite())
            .fold(0.0, |acc, (_, w)| acc + w)
    }

    /// `int phi d mu` as a finite sum.
    pub fn integrate(&self, phi: impl Fn(&Eta) -> f64) -> Result<f64> {
        let mut total = 0.0;
        for (eta, w) in self.atoms() {
            let v = phi(&eta);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("{eta:?}")));
            }
            total += w * v;
        }
        Ok(total)
    }

    /// `int |r|^p d mu` over the finite atoms.
    pub fn finite_moment(&self, p: f64) -> f64 {
        self.atoms()
            .filter_map(|(e, w)| e.location().map(|r| w * r.abs().powf(p)))
            .sum()
    }
}

/// Context handed to field pairings: the cell and the value of the auxiliary
/// step function on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellContext {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// A field `omega -> xi_omega` of atomic measures, constant on each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct RandomMeasureField {
    breakpoints: Vec<f64>,
    cell_measures: Vec<AtomicMeasure>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    breakpoints: Vec<f64>,
    cell_measures: Vec<AtomicMeasure>,
}

impl TryFrom<FieldRepr> for RandomMeasureField {
    type Error = Error;
    fn try_from(r: FieldRepr) -> Result<Self> {
        RandomMeasureField::new(r.breakpoints, r.cell_measures)
    }
}

impl From<RandomMeasureField> for FieldRepr {
    fn from(f: RandomMeasureField) -> Self {
        FieldRepr {
            breakpoints: f.breakpoints,
            cell_measures: f.cell_measures,
        }
    }
}

impl RandomMeasureField {
    /// A random measure: every cell carries a probability measure.
    pub fn new(breakpoints: Vec<f64>, cell_measures: Vec<AtomicMeasure>) -> Result<Self> {
        let field = Self::with_any_mass(breakpoints, cell_measures)?;
        if let Some((i, m)) = field
            .cell_measures
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_probability())
        {
            return Err(Error::Contract(format!(
                "cell {i} carries total mass {}, expected 1",
                m.total_mass()
            )));
        }
        Ok(field)
    }

    /// A field of nonnegative measures of arbitrary mass. Operations that need
    /// a random measure check [`RandomMeasureField::is_random_measure`].
    pub fn with_any_mass(breakpoints: Vec<f64>, cell_measures: Vec<AtomicMeasure>) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        if cell_measures.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidBreakpoints(format!(
                "{} breakpoints need {} cell measures, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                cell_measures.len()
            )));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[1] - w[0] <= BREAKPOINT_EPS) {
            return Err(Error::InvalidBreakpoints(format!(
                "field cell [{}, {}] has no length",
                w[0], w[1]
            )));
        }
        Ok(Self {
            breakpoints,
            cell_measures,
        })
    }

    /// The constant field `omega -> mu`.
    pub fn constant(mu: AtomicMeasure) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![mu])
    }

    /// `omega -> delta_{eta_{g(omega)}}`.
    pub fn dirac_field(g: &StepFunction) -> Self {
        Self {
            breakpoints: g.breakpoints().to_vec(),
            cell_measures: g
                .values()
                .iter()
                .map(|&v| AtomicMeasure::dirac(Eta::Finite(v)))
                .collect(),
        }
    }

    /// Builds a field on the common refinement of `sources`, choosing the
    /// measure of each cell from the source values on it.
    pub fn tabulate(
        sources: &[&StepFunction],
        mut build: impl FnMut(&[f64]) -> AtomicMeasure,
    ) -> Result<Self> {
        let bps = union_breakpoints(sources.iter().map(|f| f.breakpoints()));
        let mut vals = vec![0.0; sources.len()];
        let measures = bps
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                for (slot, f) in vals.iter_mut().zip(sources) {
                    *slot = f.eval(mid);
                }
                build(&vals)
            })
            .collect();
        Self::new(bps, measures)
    }

    /// `1_A delta_{+inf} + 1_B delta_{-inf} + 1_{rest} delta_{eta_g}` for
    /// disjoint interval unions `A`, `B`.
    pub fn two_set_field(
        a: &crate::interval_space::IntervalSet,
        b: &crate::interval_space::IntervalSet,
        g: &StepFunction,
    ) -> Result<Self> {
        let (ia, ib) = (a.indicator(), b.indicator());
        if ia.inner(&ib) > BREAKPOINT_EPS {
            return Err(Error::Contract("the sets A and B must be disjoint".into()));
        }
        Self::tabulate(&[&ia, &ib, g], |v| {
            if v[0] > 0.5 {
                AtomicMeasure::dirac(Eta::PlusInfinity)
            } else if v[1] > 0.5 {
                AtomicMeasure::dirac(Eta::MinusInfinity)
            } else {
                AtomicMeasure::dirac(Eta::Finite(v[2]))
            }
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cell_measures(&self) -> &[AtomicMeasure] {
        &self.cell_measures
    }

    /// Iterates `(lo, hi, measure)`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, &AtomicMeasure)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.cell_measures)
            .map(|(w, m)| (w[0], w[1], m))
    }

    /// The measure at `omega` (cells half-open, `1` in the last cell).
    pub fn measure_at(&self, omega: f64) -> &AtomicMeasure {
        let idx = self.breakpoints.partition_point(|&b| b <= omega);
        &self.cell_measures[idx.saturating_sub(1).min(self.cell_measures.len() - 1)]
    }

    pub fn is_random_measure(&self) -> bool {
        self.cell_measures.iter().all(AtomicMeasure::is_probability)
    }

    /// `E[xi({+inf, -inf})]`.
    pub fn mass_at_infinity(&self) -> f64 {
        self.cells()
            .map(|(lo, hi, m)| (hi - lo) * m.mass_at_infinity())
            .fold(0.0, |acc, t| acc + t)
    }

    /// True when no cell puts mass at the points at infinity.
    pub fn is_on_real_line(&self) -> bool {
        self.cell_measures.iter().all(|m| m.mass_at_infinity() == 0.0)
    }

    /// `E[int |r|^p d xi(r)]` over finite atoms.
    pub fn moment(&self, p: f64) -> f64 {
        compensated_sum(self.cells().map(|(lo, hi, m)| (hi - lo) * m.finite_moment(p)))
    }

    /// The length-weighted average of the field over each cell of `partition`.
    pub fn coarsen(&self, partition: &Partition) -> Self {
        let segs = overlay(partition.breakpoints(), &self.breakpoints);
        let mut measures = Vec::with_capacity(partition.size());
        let mut start = 0;
        for (cell, (lo, hi)) in partition.cells().enumerate() {
            let width = hi - lo;
            let mut end = start;
            while end < segs.len() && segs[end].left == cell {
                end += 1;
            }
            let parts = segs[start..end]
                .iter()
                .map(|s| (s.len() / width, &self.cell_measures[s.right]));
            measures.push(AtomicMeasure::mixture(parts));
            start = end;
        }
        Self {
            breakpoints: partition.breakpoints().to_vec(),
            cell_measures: measures,
        }
    }

    /// `E[int psi(omega, eta) d xi_omega(eta)]`, where `psi` sees the cell and
    /// the value of `context` on it.
    pub fn pairing(
        &self,
        context: &StepFunction,
        psi: impl Fn(&CellContext, &Eta) -> f64,
    ) -> Result<f64> {
        let mut terms = Vec::new();
        for s in overlay(&self.breakpoints, context.breakpoints()) {
            let ctx = CellContext {
                lo: s.lo,
                hi: s.hi,
                value: context.values()[s.right],
            };
            let inner = self.cell_measures[s.left]
                .integrate(|e| psi(&ctx, e))
                .map_err(|_| {
                    Error::Evaluation(format!("pairing on cell [{}, {}]", s.lo, s.hi))
                })?;
            terms.push(s.len() * inner);
        }
        Ok(compensated_sum(terms))
    }
}

/// Free-function form of [`RandomMeasureField::dirac_field`].
pub fn dirac_field(g: &StepFunction) -> RandomMeasureField {
    RandomMeasureField::dirac_field(g)
}

/// Free-function form of [`RandomMeasureField::coarsen`].
pub fn coarsen(xi: &RandomMeasureField, partition: &Partition) -> RandomMeasureField {
    xi.coarsen(partition)
}

/// Free-function form of [`RandomMeasureField::mass_at_infinity`].
pub fn mass_at_infinity(xi: &RandomMeasureField) -> f64 {
    xi.mass_at_infinity()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_space::{rademacher, IntervalSet};

    fn half_half(a: f64, b: f64) -> AtomicMeasure {
        AtomicMeasure::new([(Eta::Finite(a), 0.5), (Eta::Finite(b), 0.5)]).unwrap()
    }

    #[test]
    fn eta_eval_examples() {
        for s in [-3.0, 0.0, 2.5] {
            assert_eq!(eta_eval(Eta::Finite(0.0), s), s.abs());
        }
        assert_eq!(eta_eval(Eta::PlusInfinity, 3.0), -3.0);
        assert_eq!(eta_eval(Eta::MinusInfinity, 3.0), 3.0);
        assert_eq!(eta_eval(Eta::Finite(2.0), 3.0), -1.0);
    }

    #[test]
    fn eta_json() {
        assert_eq!(
            serde_json::to_string(&Eta::Finite(1.5)).unwrap(),
            r#"{"tag":"finite","r":1.5}"#
        );
        assert_eq!(serde_json::to_string(&Eta::PlusInfinity).unwrap(), r#"{"tag":"+inf"}"#);
        assert_eq!(serde_json::to_string(&Eta::MinusInfinity).unwrap(), r#"{"tag":"-inf"}"#);
        let e: Eta = serde_json::from_str(r#"{"tag":"-inf"}"#).unwrap();
        assert_eq!(e, Eta::MinusInfinity);
        assert!(Eta::finite(f64::INFINITY).is_err());
    }

    #[test]
    fn integrate_examples() {
        let d0 = AtomicMeasure::dirac(Eta::Finite(0.0));
        assert_eq!(d0.integrate(|e| eta_eval(*e, 5.0)).unwrap(), 5.0);
        let mu = half_half(-1.0, 1.0);
        // every eta_r vanishes at the basepoint s = 0
        assert_eq!(mu.integrate(|e| eta_eval(*e, 0.0)).unwrap(), 0.0);
        let dist = |e: &Eta| (0.0 - e.location().unwrap()).abs();
        assert_eq!(mu.integrate(dist).unwrap(), 1.0);
        assert_eq!(mu.integrate(|_| 1.0).unwrap(), 1.0);
        assert!(matches!(
            mu.integrate(|_| f64::NAN),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn atoms_merge_and_sort() {
        let mu = AtomicMeasure::new([
            (Eta::PlusInfinity, 0.25),
            (Eta::Finite(1.0), 0.25),
            (Eta::Finite(1.0 + 5e-13), 0.25),
            (Eta::MinusInfinity, 0.25),
            (Eta::Finite(3.0), 0.0),
        ])
        .unwrap();
        let atoms: Vec<_> = mu.atoms().collect();
        assert_eq!(
            atoms,
            vec![
                (Eta::MinusInfinity, 0.25),
                (Eta::Finite(1.0), 0.5),
                (Eta::PlusInfinity, 0.25)
            ]
        );
        assert!(mu.is_probability());
        assert_eq!(mu.mass_at_infinity(), 0.5);
        assert!(AtomicMeasure::new([(Eta::Finite(0.0), -0.1)]).is_err());
    }

    #[test]
    fn mass_at_infinity_examples() {
        let g = rademacher(3).unwrap();
        assert_eq!(dirac_field(&g).mass_at_infinity(), 0.0);
        let plus = RandomMeasureField::constant(AtomicMeasure::dirac(Eta::PlusInfinity)).unwrap();
        assert_eq!(plus.mass_at_infinity(), 1.0);
        let a = IntervalSet::new(vec![(0.1, 0.4)]).unwrap();
        let field = RandomMeasureField::two_set_field(&a, &IntervalSet::empty(), &g).unwrap();
        assert!((field.mass_at_infinity() - 0.3).abs() < 1e-15);
        assert!(!field.is_on_real_line());
    }

    #[test]
    fn dirac_field_examples() {
        let z = dirac_field(&StepFunction::zero());
        assert_eq!(z.cell_measures(), &[AtomicMeasure::dirac(Eta::Finite(0.0))]);
        let r = dirac_field(&rademacher(1).unwrap());
        assert_eq!(r.measure_at(0.2), &AtomicMeasure::dirac(Eta::Finite(1.0)));
        assert_eq!(r.measure_at(0.7), &AtomicMeasure::dirac(Eta::Finite(-1.0)));
        assert!(r.is_random_measure() && r.is_on_real_line());
    }

    #[test]
    fn coarsen_examples() {
        let mu = half_half(0.0, 2.0);
        let c = RandomMeasureField::constant(mu.clone()).unwrap();
        let out = c.coarsen(&Partition::dyadic(2).unwrap());
        assert!(out.cell_measures().iter().all(|m| m == &mu));

        let r = dirac_field(&rademacher(1).unwrap());
        let avg = r.coarsen(&Partition::trivial());
        assert_eq!(avg.cell_measures(), &[half_half(-1.0, 1.0)]);
        assert!(avg.is_random_measure());
    }

    #[test]
    fn pairing_examples() {
        let g = rademacher(2).unwrap();
        let f = StepFunction::new(vec![0.0, 0.3, 1.0], vec![2.0, -1.0]).unwrap();
        let xi = dirac_field(&g);
        assert!((xi.pairing(&f, |_, _| 1.0).unwrap() - 1.0).abs() < 1e-15);
        let v = xi.pairing(&f, |c, e| eta_eval(*e, c.value)).unwrap();
        let direct = f.lp_distance(&g, 1.0).unwrap() - g.lp_norm(1.0).unwrap();
        assert!((v - direct).abs() < 1e-15);

        let mu = half_half(-1.0, 3.0);
        let c = RandomMeasureField::constant(mu.clone()).unwrap();
        let psi = |e: &Eta| eta_eval(*e, 0.7) * 2.0;
        let lhs = c.pairing(&StepFunction::zero(), |_, e| psi(e)).unwrap();
        assert!((lhs - mu.integrate(psi).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn field_validation() {
        let half = AtomicMeasure::new([(Eta::Finite(0.0), 0.5)]).unwrap();
        assert!(RandomMeasureField::new(vec![0.0, 1.0], vec![half.clone()]).is_err());
        let sub = RandomMeasureField::with_any_mass(vec![0.0, 1.0], vec![half]).unwrap();
        assert!(!sub.is_random_measure());
        assert!(RandomMeasureField::new(vec![0.0, 0.5, 1.0], vec![]).is_err());
    }

    #[test]
    fn field_json_round_trip() {
        let a = IntervalSet::new(vec![(0.0, 0.25)]).unwrap();
        let b = IntervalSet::new(vec![(0.75, 1.0)]).unwrap();
        let field =
            RandomMeasureField::two_set_field(&a, &b, &rademacher(1).unwrap()).unwrap();
        let s = serde_json::to_string(&field).unwrap();
        let back: RandomMeasureField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, field);
    }
}
