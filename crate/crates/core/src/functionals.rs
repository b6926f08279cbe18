//! Metric functionals on `L_p([0, 1])`.
//!
//! Four forms are representable:
//!
//! * internal: `h_g(f) = ||f - g||_p - ||g||_p`;
//! * `L_1` random-measure form: `h(f) = E[int eta(f) d xi(eta)]`;
//! * `L_p` bounded form (`p > 1`):
//!   `h(f) = (E[int |f - r|^p d xi] - E[int |r|^p d xi] + c^p)^{1/p} - c`
//!   with `xi` on the real line and `c^p >= E[int |r|^p d xi]`;
//! * `L_p` linear form (`p > 1`): `h(f) = -E[f zeta]` with `||zeta||_q <= 1`.
//!
//! The same functional can have several encodings: on `L_1` the zero functional
//! is `L1Form` with `xi = 1/2 delta_{+inf} + 1/2 delta_{-inf}`, and for `p > 1`
//! it is `LpLinear(0)`. `Internal` never encodes it. Equality of
//! functionals is therefore only ever checked on probe sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_space::{check_exponent, StepFunction};
use crate::rbar_measures::{eta_eval, Eta, RandomMeasureField};

/// Slack allowed on the moment constraint and the dual unit ball.
pub const CONSTRAINT_EPS: f64 = 1e-12;

/// Conjugate exponent `p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    check_strict_exponent(p)?;
    Ok(p / (p - 1.0))
}

fn check_strict_exponent(p: f64) -> Result<()> {
    check_exponent(p)?;
    if p == 1.0 {
        return Err(Error::UnsupportedBranch(p));
    }
    Ok(())
}

/// `||f - g||_p - ||g||_p`.
pub fn eval_internal(g: &StepFunction, p: f64, f: &StepFunction) -> Result<f64> {
    Ok(f.lp_distance(g, p)? - g.lp_norm(p)?)
}

/// `E[int eta(f(omega)) d xi_omega(eta)]`.
pub fn eval_l1(xi: &RandomMeasureField, f: &StepFunction) -> Result<f64> {
    if !xi.is_random_measure() {
        return Err(Error::Contract(
            "the L1 form needs a probability measure on every cell".into(),
        ));
    }
    xi.pairing(f, |ctx, e| eta_eval(*e, ctx.value))
}

/// `E[int |f - r|^p d xi(r)]` over finite atoms.
fn shifted_moment(xi: &RandomMeasureField, p: f64, f: &StepFunction) -> Result<f64> {
    xi.pairing(f, |ctx, e| match e {
        Eta::Finite(r) => (ctx.value - r).abs().powf(p),
        _ => 0.0,
    })
}

/// Bounded-branch evaluation given the precomputed moment.
fn finite_branch_value(shifted: f64, moment: f64, c: f64, p: f64) -> f64 {
    let d = shifted - moment;
    if c == 0.0 {
        return d.max(0.0).powf(1.0 / p);
    }
    // (d + c^p)^{1/p} - c = c * ((1 + d / c^p)^{1/p} - 1), kept accurate for
    // small |d| / c^p
    let ratio = (d / c.powf(p)).max(-1.0);
    c * (ratio.ln_1p() / p).exp_m1()
}

/// `(E[int |f - r|^p d xi] - E[int |r|^p d xi] + c^p)^{1/p} - c`.
pub fn eval_lp_finite(xi: &RandomMeasureField, c: f64, p: f64, f: &StepFunction) -> Result<f64> {
    let h = LpFinite::new(xi.clone(), c, p)?;
    h.eval(f)
}

/// `-E[f zeta]`.
pub fn eval_lp_linear(zeta: &StepFunction, p: f64, f: &StepFunction) -> Result<f64> {
    let h = LpLinear::new(zeta.clone(), p)?;
    Ok(h.eval(f))
}

/// The internal functional `h_g` on `L_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InternalRepr")]
pub struct Internal {
    pub g: StepFunction,
    pub p: f64,
}

#[derive(Deserialize)]
struct InternalRepr {
    g: StepFunction,
    p: f64,
}

impl TryFrom<InternalRepr> for Internal {
    type Error = Error;
    fn try_from(r: InternalRepr) -> Result<Self> {
        Internal::new(r.g, r.p)
    }
}

impl Internal {
    pub fn new(g: StepFunction, p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self { g, p })
    }

    pub fn eval(&self, f: &StepFunction) -> Result<f64> {
        eval_internal(&self.g, self.p, f)
    }
}

/// The `L_1` functional represented by a random measure on the compactified line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "L1FormRepr")]
pub struct L1Form {
    xi: RandomMeasureField,
}

#[derive(Deserialize)]
struct L1FormRepr {
    xi: RandomMeasureField,
}

impl TryFrom<L1FormRepr> for L1Form {
    type Error = Error;
    fn try_from(r: L1FormRepr) -> Result<Self> {
        L1Form::new(r.xi)
    }
}

impl L1Form {
    pub fn new(xi: RandomMeasureField) -> Result<Self> {
        if !xi.is_random_measure() {
            return Err(Error::Contract(
                "the L1 form needs a probability measure on every cell".into(),
            ));
        }
        Ok(Self { xi })
    }

    pub fn field(&self) -> &RandomMeasureField {
        &self.xi
    }

    pub fn eval(&self, f: &StepFunction) -> Result<f64> {
        eval_l1(&self.xi, f)
    }
}

/// The bounded `L_p` form with parameter `c`. The moment
/// `E[int |r|^p d xi]` is computed once at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LpFiniteRepr")]
pub struct LpFinite {
    xi: RandomMeasureField,
    c: f64,
    p: f64,
    #[serde(skip_serializing)]
    moment: f64,
}

#[derive(Deserialize)]
struct LpFiniteRepr {
    xi: RandomMeasureField,
    c: f64,
    p: f64,
}

impl TryFrom<LpFiniteRepr> for LpFinite {
    type Error = Error;
    fn try_from(r: LpFiniteRepr) -> Result<Self> {
        LpFinite::new(r.xi, r.c, r.p)
    }
}

impl LpFinite {
    pub fn new(xi: RandomMeasureField, c: f64, p: f64) -> Result<Self> {
        check_strict_exponent(p)?;
        if !xi.is_random_measure() {
            return Err(Error::Contract(
                "the bounded Lp form needs a probability measure on every cell".into(),
            ));
        }
        let at_infinity = xi.mass_at_infinity();
        if !xi.is_on_real_line() {
            return Err(Error::NotOnRealLine(at_infinity));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Contract(format!("c must be finite and >= 0, got {c}")));
        }
        let moment = xi.moment(p);
        let c_pow = c.powf(p);
        // relative slack so that c = ||g||_p passes for large g
        if c_pow < moment - CONSTRAINT_EPS * moment.max(1.0) {
            return Err(Error::ConstraintViolation { c_pow, moment });
        }
        Ok(Self { xi, c, p, moment })
    }

    pub fn field(&self) -> &RandomMeasureField {
        &self.xi
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Cached `E[int |r|^p d xi]`.
    pub fn moment(&self) -> f64 {
        self.moment
    }

    pub fn eval(&self, f: &StepFunction) -> Result<f64> {
        let shifted = shifted_moment(&self.xi, self.p, f)?;
        Ok(finite_branch_value(shifted, self.moment, self.c, self.p))
    }
}

/// The linear `L_p` form `f -> -E[f zeta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LpLinearRepr")]
pub struct LpLinear {
    zeta: StepFunction,
    p: f64,
}

#[derive(Deserialize)]
struct LpLinearRepr {
    zeta: StepFunction,
    p: f64,
}

impl TryFrom<LpLinearRepr> for LpLinear {
    type Error = Error;
    fn try_from(r: LpLinearRepr) -> Result<Self> {
        LpLinear::new(r.zeta, r.p)
    }
}

impl LpLinear {
    pub fn new(zeta: StepFunction, p: f64) -> Result<Self> {
        let q = conjugate_exponent(p)?;
        let norm = zeta.lp_norm(q)?;
        if norm > 1.0 + CONSTRAINT_EPS {
            return Err(Error::Contract(format!(
                "zeta must lie in the unit ball of L_{q}, has norm {norm}"
            )));
        }
        Ok(Self { zeta, p })
    }

    pub fn zeta(&self) -> &StepFunction {
        &self.zeta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, f: &StepFunction) -> f64 {
        -f.inner(&self.zeta)
    }
}

/// A metric functional in one of the four representable forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MetricFunctional {
    Internal(Internal),
    L1Form(L1Form),
    LpFinite(LpFinite),
    LpLinear(LpLinear),
}

impl MetricFunctional {
    pub fn internal(g: StepFunction, p: f64) -> Result<Self> {
        Internal::new(g, p).map(Self::Internal)
    }

    pub fn l1_form(xi: RandomMeasureField) -> Result<Self> {
        L1Form::new(xi).map(Self::L1Form)
    }

    pub fn lp_finite(xi: RandomMeasureField, c: f64, p: f64) -> Result<Self> {
        LpFinite::new(xi, c, p).map(Self::LpFinite)
    }

    pub fn lp_linear(zeta: StepFunction, p: f64) -> Result<Self> {
        LpLinear::new(zeta, p).map(Self::LpLinear)
    }

    /// Short variant tag, as used in JSON.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Internal(_) => "internal",
            Self::L1Form(_) => "l1_form",
            Self::LpFinite(_) => "lp_finite",
            Self::LpLinear(_) => "lp_linear",
        }
    }

    /// The exponent of the space the functional lives on.
    pub fn p(&self) -> f64 {
        match self {
            Self::Internal(h) => h.p,
            Self::L1Form(_) => 1.0,
            Self::LpFinite(h) => h.p,
            Self::LpLinear(h) => h.p,
        }
    }

    pub fn eval(&self, f: &StepFunction) -> Result<f64> {
        match self {
            Self::Internal(h) => h.eval(f),
            Self::L1Form(h) => h.eval(f),
            Self::LpFinite(h) => h.eval(f),
            Self::LpLinear(h) => Ok(h.eval(f)),
        }
    }
}

/// Largest excess `|h(f) - h(f')| - ||f - f'||_p` over the given pairs.
///
/// A metric functional is 1-Lipschitz, so the result should not exceed
/// rounding noise. An empty pair list gives `-inf`.
pub fn lipschitz_probe(
    h: &MetricFunctional,
    pairs: &[(StepFunction, StepFunction)],
) -> Result<f64> {
    let p = h.p();
    let mut worst = f64::NEG_INFINITY;
    for (f, f2) in pairs {
        let gap = (h.eval(f)? - h.eval(f2)?).abs() - f.lp_distance(f2, p)?;
        worst = worst.max(gap);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_space::{rademacher, IntervalSet};
    use crate::rbar_measures::{dirac_field, AtomicMeasure};

    fn spike3() -> StepFunction {
        StepFunction::new(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![0.0, -9.0, 9.0, 0.0]).unwrap()
    }

    fn half_half(a: f64, b: f64) -> RandomMeasureField {
        RandomMeasureField::constant(
            AtomicMeasure::new([(Eta::Finite(a), 0.5), (Eta::Finite(b), 0.5)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_functional_encodings() {
        let f = spike3();
        let ends = AtomicMeasure::new([(Eta::PlusInfinity, 0.5), (Eta::MinusInfinity, 0.5)]).unwrap();
        let l1 = MetricFunctional::l1_form(RandomMeasureField::constant(ends).unwrap()).unwrap();
        assert_eq!(l1.eval(&f).unwrap(), 0.0);
        let lin = MetricFunctional::lp_linear(StepFunction::zero(), 2.0).unwrap();
        assert_eq!(lin.eval(&f).unwrap(), 0.0);
        assert!(eval_internal(&StepFunction::zero(), 1.0, &f).unwrap() > 0.0);
    }

    #[test]
    fn internal_examples() {
        let g = spike3();
        assert_eq!(eval_internal(&g, 1.0, &StepFunction::zero()).unwrap(), 0.0);
        assert_eq!(eval_internal(&g, 2.0, &g).unwrap(), -g.lp_norm(2.0).unwrap());
        let one = StepFunction::constant(1.0);
        assert!((eval_internal(&g, 1.0, &one).unwrap() - 0.5).abs() < 1e-15);
        assert!(eval_internal(&g, 0.9, &one).is_err());
    }

    #[test]
    fn l1_examples() {
        let g = rademacher(3).unwrap();
        let f = StepFunction::new(vec![0.0, 0.3, 1.0], vec![2.0, -0.5]).unwrap();
        let a = eval_l1(&dirac_field(&g), &f).unwrap();
        let b = eval_internal(&g, 1.0, &f).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(eval_l1(&half_half(-1.0, 1.0), &StepFunction::zero()).unwrap(), 0.0);
    }

    #[test]
    fn two_set_closed_form() {
        let a = IntervalSet::new(vec![(0.0, 0.2)]).unwrap();
        let b = IntervalSet::new(vec![(0.6, 0.7)]).unwrap();
        let g = rademacher(2).unwrap();
        let xi = RandomMeasureField::two_set_field(&a, &b, &g).unwrap();
        let f = StepFunction::new(vec![0.0, 0.1, 0.65, 1.0], vec![3.0, -1.0, 0.5]).unwrap();
        let (ia, ib) = (a.indicator(), b.indicator());
        let rest = &(&StepFunction::constant(1.0) - &ia) - &ib;
        let closed = -ia.inner(&f)
            + ib.inner(&f)
            + rest.inner(&(&(&f - &g).abs() - &g.abs()));
        assert!((eval_l1(&xi, &f).unwrap() - closed).abs() < 1e-15);
    }

    #[test]
    fn l1_rejects_non_probability() {
        let half = AtomicMeasure::new([(Eta::Finite(0.0), 0.5)]).unwrap();
        let sub = RandomMeasureField::with_any_mass(vec![0.0, 1.0], vec![half]).unwrap();
        assert!(matches!(
            eval_l1(&sub, &StepFunction::zero()),
            Err(Error::Contract(_))
        ));
        assert!(L1Form::new(sub).is_err());
    }

    #[test]
    fn lp_finite_examples() {
        let g = spike3();
        for p in [1.5, 2.0, 3.0] {
            let c = g.lp_norm(p).unwrap();
            let xi = dirac_field(&g);
            assert!(eval_lp_finite(&xi, c, p, &StepFunction::zero()).unwrap().abs() < 1e-12);
            let f = rademacher(1).unwrap();
            let a = eval_lp_finite(&xi, c, p, &f).unwrap();
            let b = eval_internal(&g, p, &f).unwrap();
            assert!((a - b).abs() < 1e-9, "p = {p}: {a} vs {b}");
        }
        let xi = half_half(-1.0, 1.0);
        for s in [-2.0, 0.0, 0.3, 5.0] {
            let v = eval_lp_finite(&xi, 1.0, 2.0, &StepFunction::constant(s)).unwrap();
            assert!((v - ((s * s + 1.0_f64).sqrt() - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn lp_finite_errors() {
        let xi = half_half(-1.0, 1.0);
        assert!(matches!(
            LpFinite::new(xi.clone(), 0.5, 2.0),
            Err(Error::ConstraintViolation { .. })
        ));
        // equality is allowed
        assert!(LpFinite::new(xi.clone(), 1.0, 2.0).is_ok());
        assert!(matches!(
            LpFinite::new(xi, 1.0, 1.0),
            Err(Error::UnsupportedBranch(_))
        ));
        let plus = RandomMeasureField::constant(AtomicMeasure::dirac(Eta::PlusInfinity)).unwrap();
        assert!(matches!(
            LpFinite::new(plus, 1.0, 2.0),
            Err(Error::NotOnRealLine(m)) if m == 1.0
        ));
    }

    #[test]
    fn lp_linear_examples() {
        let f = rademacher(2).unwrap().scale(3.0);
        assert_eq!(eval_lp_linear(&StepFunction::zero(), 2.0, &f).unwrap(), 0.0);
        let one = StepFunction::constant(1.0);
        let g = StepFunction::new(vec![0.0, 0.4, 1.0], vec![2.0, -1.0]).unwrap();
        assert_eq!(eval_lp_linear(&one, 3.0, &g).unwrap(), -g.expectation());
        assert!(matches!(
            eval_lp_linear(&one.scale(1.1), 2.0, &g),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn lipschitz_probe_examples() {
        let g = spike3();
        let h = MetricFunctional::internal(g, 1.0).unwrap();
        let pairs = vec![
            (StepFunction::zero(), rademacher(1).unwrap()),
            (StepFunction::constant(3.0), rademacher(4).unwrap().scale(7.0)),
        ];
        assert!(lipschitz_probe(&h, &pairs).unwrap() <= 1e-12);
        let lin = MetricFunctional::lp_linear(rademacher(1).unwrap(), 2.0).unwrap();
        assert!(lipschitz_probe(&lin, &pairs).unwrap() <= 1e-9);
    }

    #[test]
    fn functional_json() {
        let h = MetricFunctional::lp_finite(half_half(-1.0, 1.0), 1.0, 2.0).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert!(s.starts_with(r#"{"variant":"lp_finite""#), "{s}");
        assert!(!s.contains("moment"));
        let back: MetricFunctional = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);

        let bad = r#"{"variant":"lp_linear","zeta":{"breakpoints":[0,1],"values":[2]},"p":2}"#;
        assert!(serde_json::from_str::<MetricFunctional>(bad).is_err());
        let bad = r#"{"variant":"internal","g":{"breakpoints":[0,1],"values":[2]},"p":0.5}"#;
        assert!(serde_json::from_str::<MetricFunctional>(bad).is_err());
    }
}
