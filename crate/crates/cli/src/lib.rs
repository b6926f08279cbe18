//! Experiment runner behind the `horolab` binary.
//!
//! [`run`] turns a [`RunConfig`] into an [`Outcome`]: a JSON document, a CSV
//! table and the list of pass/fail checks. [`write_outputs`] puts them on disk
//! atomically. Equal configs give byte-identical outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use horolab::alspach::{
    alspach_convergence, alspach_limit_functional, alspach_map, fixed_point_certificate,
    orbit_from_one, sampled_fixed_point_certificate, verify_isometry, KPoint, EXHAUSTIVE_DEPTH,
};
use horolab::interval_space::{max_breakpoints, max_dyadic_depth, IntervalSet, StepFunction};
use horolab::limits_lab::{
    default_test_suite, doubling_schedule, lp_witness_step, rationalize_mixture, run_convergence,
    tightness, witness_tail_is_exact, ExampleSequence, TestFunction,
};
use horolab::rbar_measures::{AtomicMeasure, Eta};
use horolab::report::{Check, ConvergenceReport, REPORT_SCHEMA};
use horolab::sampling::{random_dual_density, random_k_point, seeded};
use horolab::spectral::{ergodic_limit_check, probe_contract, NonexpansiveOperator, SpectralReport};
use horolab::{rademacher, Error, ErrorKind};

/// Slack on the error bounds checked against computed rows.
const ROW_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Examples,
    Converse,
    LpWitness,
    Ergodic,
    Alspach,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Self::Examples => "examples",
            Self::Converse => "converse",
            Self::LpWitness => "lp-witness",
            Self::Ergodic => "ergodic",
            Self::Alspach => "alspach",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Spike,
    BoundedSpike,
    Escape,
    Rademacher,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub tag: &'static str,
    pub description: &'static str,
}

/// The experiments, in a fixed order.
pub fn list_experiments() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            id: "examples",
            tag: "convergence-examples",
            description: "spike, bounded spike, escape-on-a-set and Rademacher sequences against their limits",
        },
        CatalogEntry {
            id: "converse",
            tag: "converse-net",
            description: "partition nets realizing a constant atomic mixture as a limit of internal functionals",
        },
        CatalogEntry {
            id: "lp-witness",
            tag: "lp-witness",
            description: "internal functionals on L_p converging to f -> -E[f zeta]",
        },
        CatalogEntry {
            id: "ergodic",
            tag: "ergodic-escape-rate",
            description: "escape rate and ergodic-limit residuals of F(f) = T f + g",
        },
        CatalogEntry {
            id: "alspach",
            tag: "fixed-point-free-isometry",
            description: "Alspach's isometry on K: orbit, limit functional and fixed-point certificate",
        },
    ]
}

/// Resolved settings of one run; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub which: Which,
    pub p: f64,
    pub n_max: u64,
    pub schedule: Vec<u64>,
    pub depth: u32,
    /// Threshold below which the escape rate counts as zero.
    pub tol: f64,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    /// `ergodic`: operator spec such as `condexp:0`.
    pub operator: Option<String>,
    /// `ergodic`: the shift `g`.
    pub g: Option<StepFunction>,
    /// `lp-witness`: the dual element; random when absent.
    pub zeta: Option<StepFunction>,
    /// `converse`: the mixture.
    pub mixture: Option<AtomicMeasure>,
    /// `alspach`: number of random K pairs and points.
    pub random_pairs: usize,
    /// Value of the resolution cap in force.
    pub max_breakpoints: usize,
}

impl RunConfig {
    /// Defaults for `experiment`, with the doubling schedule up to 1024.
    pub fn new(experiment: Experiment) -> Self {
        let p = match experiment {
            Experiment::LpWitness | Experiment::Ergodic => 2.0,
            _ => 1.0,
        };
        let depth = match experiment {
            Experiment::Converse => 10,
            _ => 3,
        };
        let mut cfg = Self {
            experiment,
            which: Which::All,
            p,
            n_max: 1024,
            schedule: Vec::new(),
            depth,
            tol: 1e-9,
            seed: 0,
            format: Format::Csv,
            out: None,
            operator: None,
            g: None,
            zeta: None,
            mixture: None,
            random_pairs: 200,
            max_breakpoints: max_breakpoints(),
        };
        cfg.resolve_schedule();
        cfg
    }

    /// Recomputes the doubling schedule from `n_max`.
    pub fn resolve_schedule(&mut self) {
        self.schedule = doubling_schedule(self.n_max);
    }

    fn validate(&self) -> horolab::Result<()> {
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!(
                "the n schedule must be nonempty and increasing (n_max = {})",
                self.n_max
            )));
        }
        Ok(())
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub json: Value,
    pub csv: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Value {
        let failed: Vec<&Check> = self.checks.iter().filter(|c| !c.passed).collect();
        json!({ "failed": failed })
    }
}

pub fn run(cfg: &RunConfig) -> horolab::Result<Outcome> {
    cfg.validate()?;
    let config = serde_json::to_value(cfg).expect("config serializes");
    match cfg.experiment {
        Experiment::Examples => run_examples(cfg, config),
        Experiment::Converse => run_converse(cfg, config),
        Experiment::LpWitness => run_lp_witness(cfg, config),
        Experiment::Ergodic => run_ergodic(cfg, config),
        Experiment::Alspach => run_alspach(cfg, config),
    }
}

fn convergence_outcome(report: ConvergenceReport, checks: Vec<Check>, config: Value, extra: Value) -> Outcome {
    let mut doc = report.to_json(&config, &checks);
    doc["passed"] = json!(checks.iter().all(|c| c.passed));
    if let (Some(doc), Value::Object(extra)) = (doc.as_object_mut(), extra) {
        doc.extend(extra);
    }
    Outcome {
        checks,
        csv: report.to_csv(),
        json: doc,
    }
}

fn basepoint_check(report: &ConvergenceReport) -> Check {
    let worst = report
        .rows
        .iter()
        .filter(|r| r.test_id == "zero")
        .map(|r| r.h_n.abs())
        .fold(0.0, f64::max);
    let name = format!("{}: h_n(0) = 0", report.rows.first().map_or("", |r| r.experiment.as_str()));
    Check::new(name, worst == 0.0, format!("max |h_n(0)| = {worst:e}"))
}

fn monotone_check(report: &ConvergenceReport, label: &str) -> Check {
    let bad: Vec<String> = report
        .monotonicity()
        .into_iter()
        .filter(|m| !m.nonincreasing)
        .map(|m| m.test_id)
        .collect();
    Check::new(
        format!("{label}: errors nonincreasing along the schedule"),
        bad.is_empty(),
        if bad.is_empty() { "all tests".into() } else { format!("violated for {bad:?}") },
    )
}

fn spike_checks(report: &ConvergenceReport, tests: &[TestFunction], label: &str) -> Vec<Check> {
    let mut worst = f64::NEG_INFINITY;
    for row in &report.rows {
        let f = &tests.iter().find(|t| t.id == row.test_id).expect("known test").f;
        worst = worst.max(row.abs_err - 4.0 * f.sup_norm() / (row.n as f64 + 1.0));
    }
    vec![
        Check::new(
            format!("{label}: |h_n(f) - E|f|| <= 4 ||f||_inf / (n + 1)"),
            worst <= ROW_SLACK,
            format!("max excess over the bound = {worst:e}"),
        ),
        monotone_check(report, label),
        basepoint_check(report),
    ]
}

fn run_examples(cfg: &RunConfig, config: Value) -> horolab::Result<Outcome> {
    let tests = default_test_suite();
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    let mut tight = Vec::new();
    let wants = |w: Which| cfg.which == w || cfg.which == Which::All;

    for (which, seq) in [
        (Which::Spike, ExampleSequence::Spike),
        (Which::BoundedSpike, ExampleSequence::BoundedSpike),
    ] {
        if wants(which) {
            let rep = run_convergence(&seq, &tests, &cfg.schedule)?;
            checks.extend(spike_checks(&rep, &tests, seq.id()));
            reports.push(rep);
        }
    }
    if wants(Which::BoundedSpike) {
        let t = tightness(&ExampleSequence::BoundedSpike, &cfg.schedule)?;
        checks.push(Check::new(
            "bounded-spike: sup ||g_n||_1 < 2 and the limit field has no mass at infinity",
            t.max_l1_norm < 2.0 && t.mass_at_infinity == 0.0,
            format!("sup norm {}, mass at infinity {}", t.max_l1_norm, t.mass_at_infinity),
        ));
        tight.push(t);
    }
    if wants(Which::Escape) {
        let set = IntervalSet::new(vec![(0.25, 0.5)])?;
        let seq = ExampleSequence::EscapeOnSet {
            set: set.clone(),
            anchor: rademacher(1)?,
        };
        let rep = run_convergence(&seq, &tests, &cfg.schedule)?;
        let mut worst: f64 = 0.0;
        for row in &rep.rows {
            let f = &tests.iter().find(|t| t.id == row.test_id).expect("known test").f;
            if row.n as f64 >= f.sup_norm() {
                worst = worst.max(row.abs_err);
            }
        }
        checks.push(Check::new(
            "escape: exact once n >= max |f|",
            worst <= ROW_SLACK,
            format!("max error on those rows = {worst:e}"),
        ));
        checks.push(monotone_check(&rep, "escape"));
        checks.push(basepoint_check(&rep));
        let t = tightness(&seq, &cfg.schedule)?;
        checks.push(Check::new(
            "escape: limit field mass at infinity equals len(A)",
            t.mass_at_infinity == set.measure(),
            format!("mass {} vs len(A) {}", t.mass_at_infinity, set.measure()),
        ));
        tight.push(t);
        reports.push(rep);
    }
    if wants(Which::Rademacher) {
        let top = cfg.n_max.min(max_dyadic_depth() as u64);
        let schedule: Vec<u64> = (1..=top).collect();
        let rep = run_convergence(&ExampleSequence::Rademacher, &tests, &schedule)?;
        let mut worst: f64 = 0.0;
        for row in &rep.rows {
            let f = &tests.iter().find(|t| t.id == row.test_id).expect("known test").f;
            if let Some(m) = f.dyadic_level() {
                if row.n > m as u64 {
                    worst = worst.max(row.abs_err);
                }
            }
        }
        checks.push(Check::new(
            "rademacher: exact for n above the dyadic level of f",
            worst <= ROW_SLACK,
            format!("max error on those rows = {worst:e}"),
        ));
        checks.push(basepoint_check(&rep));
        reports.push(rep);
    }
    let report = ConvergenceReport::merge(reports);
    Ok(convergence_outcome(report, checks, config, json!({ "tightness": tight })))
}

fn default_mixture() -> AtomicMeasure {
    AtomicMeasure::new([(Eta::Finite(0.0), 0.5), (Eta::Finite(2.0), 0.5)]).expect("valid weights")
}

fn run_converse(cfg: &RunConfig, config: Value) -> horolab::Result<Outcome> {
    let given = cfg.mixture.clone().unwrap_or_else(default_mixture);
    let (mixture, perturbation) = rationalize_mixture(&given)?;
    let tests = default_test_suite();
    let top = cfg.n_max.min(1u64 << cfg.depth);
    let schedule: Vec<u64> = cfg.schedule.iter().copied().filter(|&n| n <= top).collect();
    let seq = ExampleSequence::ConverseNet { mixture };
    let report = run_convergence(&seq, &tests, &schedule)?;
    let mut worst: f64 = 0.0;
    let mut aligned_rows = 0;
    for row in &report.rows {
        let f = &tests.iter().find(|t| t.id == row.test_id).expect("known test").f;
        let aligned = f.dyadic_level().is_some_and(|m| row.n.is_power_of_two() && row.n >= 1 << m);
        if aligned && row.n as f64 >= f.sup_norm() {
            aligned_rows += 1;
            worst = worst.max(row.abs_err);
        }
    }
    let checks = vec![
        Check::new(
            "converse: exact on aligned partitions with |gamma| >= max |f|",
            aligned_rows > 0 && worst <= ROW_SLACK,
            format!("{aligned_rows} rows, max error {worst:e}"),
        ),
        basepoint_check(&report),
    ];
    Ok(convergence_outcome(
        report,
        checks,
        config,
        json!({ "weight_perturbation": perturbation }),
    ))
}

fn run_lp_witness(cfg: &RunConfig, config: Value) -> horolab::Result<Outcome> {
    let p = cfg.p;
    let q = horolab::functionals::conjugate_exponent(p)?;
    let zeta = match &cfg.zeta {
        Some(z) => z.clone(),
        None => random_dual_density(&mut seeded(cfg.seed), 3, q, 0.9),
    };
    let mut worst: f64 = 0.0;
    for &n in &cfg.schedule {
        let w = lp_witness_step(&zeta, p, n)?;
        worst = worst
            .max((w.zeta_n.lp_norm(q)? - 1.0).abs())
            .max((w.g_tilde.lp_norm(p)? - 1.0).abs())
            .max((w.g_tilde.inner(&w.zeta_n) - 1.0).abs());
    }
    let seq = ExampleSequence::LpWitness { zeta: zeta.clone(), p };
    let report = run_convergence(&seq, &default_test_suite(), &cfg.schedule)?;
    let mut checks = vec![
        Check::new(
            "lp-witness: ||zeta_n||_q = ||g~_n||_p = E[g~_n zeta_n] = 1",
            worst <= 1e-9,
            format!("max deviation {worst:e}"),
        ),
        basepoint_check(&report),
    ];
    // monotone errors are only guaranteed when the tail correction vanishes
    let exact_tail = witness_tail_is_exact(&zeta, p)?;
    if exact_tail {
        checks.push(monotone_check(&report, "lp-witness"));
    }
    Ok(convergence_outcome(
        report,
        checks,
        config,
        json!({ "zeta": zeta, "monotonicity_asserted": exact_tail }),
    ))
}

fn bound_table_csv(rep: &SpectralReport) -> String {
    #[derive(Serialize)]
    struct Row {
        n: u64,
        a_n: f64,
        ratio: f64,
        richardson: Option<f64>,
        v_norm: f64,
        r1: Option<f64>,
        r2: Option<f64>,
        plus_norm: Option<f64>,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for (b, r) in rep.escape.table.iter().zip(&rep.residuals) {
        w.serialize(Row {
            n: b.n,
            a_n: b.a_n,
            ratio: b.ratio,
            richardson: b.richardson,
            v_norm: r.v_norm,
            r1: r.r1,
            r2: r.r2,
            plus_norm: r.plus_norm,
        })
        .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

fn run_ergodic(cfg: &RunConfig, config: Value) -> horolab::Result<Outcome> {
    let spec = cfg.operator.as_deref().unwrap_or("condexp:0");
    let op: NonexpansiveOperator = spec.parse()?;
    let g = match &cfg.g {
        Some(g) => g.clone(),
        None => StepFunction::indicator(0.0, 0.5)?,
    };
    let contract = probe_contract(&op, cfg.p)?;
    let rep = ergodic_limit_check(&op, &g, cfg.p, cfg.n_max, cfg.tol)?;
    let mut checks = vec![
        Check::new(
            "ergodic: operator is linear and nonexpansive on the probes",
            contract.holds(),
            format!(
                "norm excess {:e}, linearity defect {:e}",
                contract.norm_excess, contract.linearity_defect
            ),
        ),
        Check::new(
            "ergodic: a_(m+n) <= a_m + a_n",
            rep.escape.max_subadditivity_excess <= 1e-9,
            format!("max excess {:e}", rep.escape.max_subadditivity_excess),
        ),
    ];
    if let (Some(norm), Some(pairing)) = (rep.zeta_dual_norm, rep.pairing) {
        checks.push(Check::new(
            "ergodic: ||zeta||_q = 1 and E[g* zeta] = 1",
            (norm - 1.0).abs() <= 1e-9 && (pairing - 1.0).abs() <= 1e-9,
            format!("||zeta||_q = {norm}, E[g* zeta] = {pairing}"),
        ));
    }
    let doc = json!({
        "schema": REPORT_SCHEMA,
        "config": config,
        "report": rep,
        "probe_contract": contract,
        "checks": checks,
        "passed": checks.iter().all(|c| c.passed),
    });
    Ok(Outcome {
        csv: bound_table_csv(&rep),
        json: doc,
        checks,
    })
}

fn run_alspach(cfg: &RunConfig, config: Value) -> horolab::Result<Outcome> {
    let certificate = if cfg.depth <= EXHAUSTIVE_DEPTH {
        fixed_point_certificate(cfg.depth, cfg.seed)?
    } else {
        sampled_fixed_point_certificate(cfg.depth, cfg.random_pairs, cfg.seed)?
    };

    let mut rng = seeded(cfg.seed);
    let (mut iso, mut h_max, mut mean_dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..cfg.random_pairs {
        let f = KPoint::new(random_k_point(&mut rng, 8))?;
        let g = KPoint::new(random_k_point(&mut rng, 8))?;
        iso = iso.max(verify_isometry(&f, &g)?);
        h_max = h_max.max(alspach_limit_functional(f.as_step()).abs());
        mean_dev = mean_dev.max((alspach_map(&f)?.as_step().expectation() - 1.0).abs());
    }

    let orbit_top = 12.min(max_dyadic_depth());
    let mut orbit_dev: f64 = 0.0;
    for n in 1..=orbit_top {
        let want = &rademacher(n)? + &StepFunction::constant(1.0);
        orbit_dev = orbit_dev.max(orbit_from_one(n)?.sup_distance(&want));
    }

    let tests = default_test_suite();
    let conv_top = (cfg.n_max.min(16) as u32).min(max_dyadic_depth());
    let report = alspach_convergence(conv_top, &tests)?;
    let mut conv_worst: f64 = 0.0;
    for row in &report.rows {
        let f = &tests.iter().find(|t| t.id == row.test_id).expect("known test").f;
        if f.dyadic_level().is_some_and(|m| row.n > m as u64) {
            conv_worst = conv_worst.max(row.abs_err);
        }
    }

    let pairs = cfg.random_pairs;
    let checks = vec![
        Check::new(
            "alspach: isometry on random K pairs",
            iso <= 1e-12,
            format!("max deviation {iso:e} over {pairs} pairs"),
        ),
        Check::new(
            "alspach: F maps K into K",
            mean_dev <= 1e-12,
            format!("max |E[F f] - 1| = {mean_dev:e}"),
        ),
        Check::new(
            "alspach: limit functional vanishes on K",
            h_max <= 1e-12,
            format!("max |h(f)| = {h_max:e} over {pairs} points"),
        ),
        Check::new(
            "alspach: F^n(1) = 1 + r_n",
            orbit_dev <= 1e-15,
            format!("max deviation {orbit_dev:e} for n <= {orbit_top}"),
        ),
        Check::new(
            "alspach: h_(g_n) exact past the dyadic level",
            conv_worst <= ROW_SLACK,
            format!("max error {conv_worst:e}"),
        ),
        Check::new(
            "alspach: every candidate 2 * 1_A is non-fixed with obstruction 1",
            certificate.certified,
            format!(
                "{} of {} candidates at depth {} ({}), min displacement {}",
                certificate.candidates.len(),
                certificate.candidates_total,
                certificate.depth,
                if certificate.exhaustive { "exhaustive" } else { "sampled" },
                certificate.min_displacement
            ),
        ),
    ];
    Ok(convergence_outcome(
        report,
        checks,
        config,
        json!({ "certificate": certificate }),
    ))
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECKS_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const RESOLUTION: i32 = 3;
    pub const IO: i32 = 4;
    pub const OTHER: i32 = 5;
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Input => exit::USAGE,
        ErrorKind::Resolution => exit::RESOLUTION,
        ErrorKind::Contract => exit::OTHER,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

/// Writes the report named by `cfg.format` to `cfg.out` (or stdout). In CSV
/// mode with an output path, the JSON mirror goes to `<out>.json`.
pub fn write_outputs(cfg: &RunConfig, outcome: &Outcome) -> std::io::Result<()> {
    let primary = match cfg.format {
        Format::Csv => outcome.csv.clone(),
        Format::Json => json_text(&outcome.json),
    };
    match &cfg.out {
        None => std::io::stdout().write_all(primary.as_bytes()),
        Some(path) => {
            write_atomic(path, primary.as_bytes())?;
            if cfg.format == Format::Csv {
                let mut mirror = path.clone().into_os_string();
                mirror.push(".json");
                write_atomic(Path::new(&mirror), json_text(&outcome.json).as_bytes())?;
            }
            Ok(())
        }
    }
}
