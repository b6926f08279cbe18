//! Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
//!
//! Run with `cargo test -p horolab --test acceptance -- --nocapture` or as part
//! of `cargo test --workspace`.

mod common;

use std::process::ExitCode;

use common::*;
use horolab::alspach::{
    alspach_limit_functional, fixed_point_certificate, orbit_from_one, verify_isometry, KPoint,
};
use horolab::functionals::{
    eval_internal, eval_l1, eval_lp_finite, eval_lp_linear, MetricFunctional,
};
use horolab::interval_space::{IntervalSet, Partition};
use horolab::limits_lab::{
    bounded_spike_sequence, converse_net, default_test_suite, lp_witness_step, rademacher_limit_check,
    spike_sequence, ExampleSequence, TestFunction,
};
use horolab::rbar_measures::{dirac_field, AtomicMeasure, Eta, RandomMeasureField};
use horolab::sampling::{random_dual_density, random_k_point, random_step, seeded};
use horolab::spectral::{ergodic_limit_check, escape_rate, iterate_affine, NonexpansiveOperator};
use horolab::{rademacher, StepFunction};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn doubling() -> Vec<u64> {
    (1..=10).map(|k| 1u64 << k).collect()
}

fn mixture_limit(f: &StepFunction) -> f64 {
    cell_integral(f, |v| 0.5 * ((v + 1.0).abs() - 1.0) + 0.5 * ((v - 1.0).abs() - 1.0))
}

/// 1. Spike norms and the `4 ||f||_inf / (n + 1)` error bound.
fn spike() -> Outcome {
    let mut norm_err: f64 = 0.0;
    for n in 1..=100u64 {
        let nf = n as f64;
        let g = spike_sequence(n).unwrap();
        norm_err = norm_err.max((cell_integral(&g, f64::abs) - 2.0 * nf * nf / (nf + 1.0)).abs());
    }
    let mut excess = f64::NEG_INFINITY;
    for n in doubling() {
        let g = spike_sequence(n).unwrap();
        for t in default_test_suite() {
            let err = (eval_internal(&g, 1.0, &t.f).unwrap() - cell_integral(&t.f, f64::abs)).abs();
            let sup = t.f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            excess = excess.max(err - 4.0 * sup / (n as f64 + 1.0));
        }
    }
    outcome(
        norm_err <= 1e-12 && excess <= 1e-12,
        format!("max | ||g_n||_1 - 2n^2/(n+1) | = {norm_err:.1e}; max error minus bound = {excess:.1e}"),
    )
}

/// 2. Rademacher limits are exact past the dyadic level; Alspach orbit identity.
fn rademacher_limits() -> Outcome {
    let mut rng = seeded(2);
    let mut tests: Vec<TestFunction> = default_test_suite();
    for i in 0..10 {
        tests.push(TestFunction::new(format!("rand{i}"), random_dyadic(&mut rng, 5, 3.0)));
    }
    let report = rademacher_limit_check(16, &tests).unwrap();
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for row in &report.rows {
        let f = &tests.iter().find(|t| t.id == row.test_id).unwrap().f;
        let m = f.dyadic_level().unwrap();
        if row.n > m as u64 {
            worst = worst.max((row.h_n - mixture_limit(f)).abs());
            rows += 1;
        }
    }
    let mut orbit_ok = true;
    for n in 1..=12u32 {
        let g = orbit_from_one(n).unwrap();
        let cells = 1usize << n;
        orbit_ok &= (0..cells).all(|i| {
            let x = (i as f64 + 0.5) / cells as f64;
            point_value(&g, x) == if i % 2 == 0 { 2.0 } else { 0.0 }
        });
    }
    outcome(
        worst <= 1e-12 && orbit_ok,
        format!("{rows} rows with n > m, max |h_(r_n)(f) - limit| = {worst:.1e}; F^n(1) = 1 + r_n for n <= 12: {orbit_ok}"),
    )
}

/// 3. Dirac fields reproduce internal functionals; the two-set closed form.
fn l1_consistency() -> Outcome {
    let mut rng = seeded(3);
    let mut dirac_err: f64 = 0.0;
    for _ in 0..100 {
        let g = random_step(&mut rng, 12, 4.0);
        let f = random_step(&mut rng, 12, 4.0);
        let a = eval_l1(&dirac_field(&g), &f).unwrap();
        dirac_err = dirac_err.max((a - eval_internal(&g, 1.0, &f).unwrap()).abs());
    }
    let mut closed_err: f64 = 0.0;
    for _ in 0..100 {
        let mut cuts: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let a = IntervalSet::new(vec![(cuts[0], cuts[1])]).unwrap();
        let b = IntervalSet::new(vec![(cuts[2], cuts[3])]).unwrap();
        let g = random_step(&mut rng, 8, 3.0);
        let f = random_step(&mut rng, 8, 3.0);
        let xi = RandomMeasureField::two_set_field(&a, &b, &g).unwrap();
        let (ia, ib) = (a.indicator(), b.indicator());
        let rest = ia.zip_with(&ib, |x, y| 1.0 - x - y);
        let internal = f.zip_with(&g, |fv, gv| (fv - gv).abs() - gv.abs());
        let closed = -ia.inner(&f) + ib.inner(&f) + rest.inner(&internal);
        closed_err = closed_err.max((eval_l1(&xi, &f).unwrap() - closed).abs());
    }
    outcome(
        dirac_err <= 1e-12 && closed_err <= 1e-12,
        format!("dirac field vs internal: {dirac_err:.1e}; two-set closed form: {closed_err:.1e}"),
    )
}

use rand::Rng;

/// 4. The finite L_p form of a Dirac field is internal; Hölder for LpLinear.
fn lp_reduction() -> Outcome {
    let mut rng = seeded(4);
    let mut red: f64 = 0.0;
    let mut holder = f64::NEG_INFINITY;
    for p in [1.5, 2.0, 3.0] {
        let q = p / (p - 1.0);
        for _ in 0..50 {
            let g = random_step(&mut rng, 10, 4.0);
            let f = random_step(&mut rng, 10, 4.0);
            let c = g.lp_norm(p).unwrap();
            let v = eval_lp_finite(&dirac_field(&g), c, p, &f).unwrap();
            red = red.max((v - eval_internal(&g, p, &f).unwrap()).abs());
            let norm = rng.gen_range(0.1..=1.0);
            let zeta = random_dual_density(&mut rng, 4, q, norm);
            let h = eval_lp_linear(&zeta, p, &f).unwrap();
            holder = holder.max(h.abs() - f.lp_norm(p).unwrap());
        }
    }
    outcome(
        red <= 1e-9 && holder <= 1e-9,
        format!("max reduction gap {red:.1e}; max |h(f)| - ||f||_p = {holder:.1e}"),
    )
}

/// 5. Converse net and L_p witness sequence.
fn converse() -> Outcome {
    let mix = AtomicMeasure::new([(Eta::Finite(0.0), 0.5), (Eta::Finite(2.0), 0.5)]).unwrap();
    let xi = RandomMeasureField::constant(mix.clone()).unwrap();
    let mut rng = seeded(5);
    let mut fs: Vec<StepFunction> = default_test_suite().into_iter().map(|t| t.f).collect();
    fs.extend((0..10).map(|_| random_dyadic(&mut rng, 6, 3.0)));
    let mut net_err: f64 = 0.0;
    for f in &fs {
        let m = f.dyadic_level().unwrap();
        for level in m..=m + 3 {
            let g = converse_net(&mix, &Partition::dyadic(level).unwrap()).unwrap();
            let want = cell_integral(f, |v| 0.5 * v.abs() + 0.5 * ((v - 2.0).abs() - 2.0));
            net_err = net_err
                .max((eval_internal(&g, 1.0, f).unwrap() - want).abs())
                .max((eval_l1(&xi, f).unwrap() - want).abs());
        }
    }

    let mut norm_err: f64 = 0.0;
    let mut monotone = true;
    let (mut interior_runs, mut interior_rises) = (0, 0);
    for p in [1.5, 2.0, 3.0] {
        let q = p / (p - 1.0);
        for _ in 0..5 {
            // interior zeta: the tail correction is active
            let norm = rng.gen_range(0.2..0.95);
            let zeta = random_dual_density(&mut rng, 3, q, norm);
            let f = random_step(&mut rng, 8, 3.0);
            let errs: Vec<f64> = doubling()
                .into_iter()
                .map(|n| {
                    let w = lp_witness_step(&zeta, p, n).unwrap();
                    norm_err = norm_err.max((w.zeta_n.lp_norm(q).unwrap() - 1.0).abs());
                    (eval_internal(&w.g_n, p, &f).unwrap() + f.inner(&zeta)).abs()
                })
                .collect();
            interior_runs += 1;
            interior_rises += usize::from(errs.windows(2).any(|e| e[1] > e[0] + 1e-12));
            // unit zeta, nonnegative on [1/2, 1]: zeta_n = zeta
            let z = random_dual_density(&mut rng, 3, q, 1.0);
            let z = z.zip_with(&StepFunction::indicator(0.5, 1.0).unwrap(), |v, t| if t > 0.5 { v.abs() } else { v });
            for _ in 0..4 {
                let f = random_step(&mut rng, 8, 3.0);
                let errs: Vec<f64> = doubling()
                    .into_iter()
                    .map(|n| {
                        let w = lp_witness_step(&z, p, n).unwrap();
                        norm_err = norm_err.max((w.zeta_n.lp_norm(q).unwrap() - 1.0).abs());
                        (eval_internal(&w.g_n, p, &f).unwrap() + f.inner(&z)).abs()
                    })
                    .collect();
                monotone &= errs.windows(2).all(|e| e[1] <= e[0] + 1e-12);
            }
        }
    }
    outcome(
        net_err <= 1e-12 && norm_err <= 1e-9 && monotone,
        format!(
            "net vs mixture value {net_err:.1e}; max | ||zeta_n||_q - 1 | = {norm_err:.1e}; \
             witness errors nonincreasing for unit zeta: {monotone} \
             (interior zeta, not asserted: {interior_rises} of {interior_runs} runs rise somewhere)"
        ),
    )
}

/// 6. Tightness dichotomy.
fn tightness() -> Outcome {
    let bounded = ExampleSequence::BoundedSpike.limit_field().unwrap().unwrap();
    let norms_ok = (1..=1000).all(|n| cell_integral(&bounded_spike_sequence(n).unwrap(), f64::abs) < 2.0);
    let mut escape_ok = true;
    let mut detail = Vec::new();
    for set in [
        vec![(0.25, 0.5)],
        vec![(0.0, 0.125), (0.5, 0.75)],
        vec![(0.375, 1.0)],
    ] {
        let a = IntervalSet::new(set).unwrap();
        let seq = ExampleSequence::EscapeOnSet {
            set: a.clone(),
            anchor: rademacher(3).unwrap(),
        };
        let mass = seq.limit_field().unwrap().unwrap().mass_at_infinity();
        escape_ok &= mass == a.measure();
        detail.push(format!("{mass}"));
    }
    outcome(
        bounded.mass_at_infinity() == 0.0 && norms_ok && escape_ok,
        format!(
            "bounded spike mass {}, sup ||g_n||_1 < 2: {norms_ok}; escape masses [{}] equal len(A): {escape_ok}",
            bounded.mass_at_infinity(),
            detail.join(", ")
        ),
    )
}

/// 7. Escape rates and ergodic residuals.
fn ergodic() -> Outcome {
    let g = StepFunction::indicator(0.0, 0.5).unwrap();
    let op = NonexpansiveOperator::cond_exp(Partition::trivial());
    let rep = ergodic_limit_check(&op, &g, 2.0, 1024, 1e-9).unwrap();
    let bound_const = g.expectation().abs() + g.lp_norm(2.0).unwrap();
    let residual_ok = rep
        .residuals
        .iter()
        .all(|r| r.r2.unwrap() <= bound_const / r.n as f64);
    let tau_ok = (rep.tau - 0.5).abs() <= 1e-3;
    let (zn, pair) = (rep.zeta_dual_norm.unwrap(), rep.pairing.unwrap());
    let duality_ok = (zn - 1.0).abs() <= 1e-9 && (pair - 1.0).abs() <= 1e-9;

    let mut sub = rep.escape.max_subadditivity_excess;
    for spec in ["scale:0.5", "identity", "condexp:3", "mix:0.5*doubling+0.5*condexp:2"] {
        let op: NonexpansiveOperator = spec.parse().unwrap();
        let n_max = if spec.contains("doubling") { 16 } else { 256 };
        sub = sub.max(escape_rate(&op, &rademacher(2).unwrap(), 2.0, n_max).unwrap().max_subadditivity_excess);
    }

    let r1 = rademacher(1).unwrap();
    let dbl = NonexpansiveOperator::doubling();
    let mut v_err: f64 = 0.0;
    for n in 1..=20u64 {
        let x = iterate_affine(&dbl, &r1, n).unwrap();
        let v = (cell_integral(&x, |t| t * t)).sqrt() / n as f64;
        v_err = v_err.max((v - (n as f64).powf(-0.5)).abs());
    }
    sub = sub.max(escape_rate(&dbl, &r1, 2.0, 16).unwrap().max_subadditivity_excess);
    outcome(
        tau_ok && duality_ok && residual_ok && sub <= 1e-9 && v_err <= 1e-9,
        format!(
            "tau = {:.6}; ||zeta||_2 = {zn}, E[g* zeta] = {pair}; r2_n within bound: {residual_ok}; \
             max subadditivity excess {sub:.1e}; doubling | ||v_n||_2 - n^-1/2 | <= {v_err:.1e} (n <= 20)",
            rep.tau
        ),
    )
}

/// 8. Alspach isometry, vanishing limit functional, fixed-point certificate.
fn alspach() -> Outcome {
    let mut rng = seeded(8);
    let (mut iso, mut h): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let f = KPoint::new(random_k_point(&mut rng, 8)).unwrap();
        let g = KPoint::new(random_k_point(&mut rng, 8)).unwrap();
        iso = iso.max(verify_isometry(&f, &g).unwrap());
        h = h.max(alspach_limit_functional(f.as_step()).abs());
    }
    let cert = fixed_point_certificate(3, 8).unwrap();
    let all = cert.candidates.len() == 70
        && cert.candidates.iter().all(|c| {
            c.disagreement.is_some() && c.fixed_point_gap > 0.0 && (c.obstruction - 1.0).abs() <= 1e-12
        });
    outcome(
        iso <= 1e-12 && h <= 1e-12 && all && cert.certified,
        format!(
            "isometry deviation {iso:.1e}; max |h| on K {h:.1e}; {} candidates non-fixed with obstruction 1: {all}",
            cert.candidates.len()
        ),
    )
}

/// 9. Every variant against the 2^20-sample midpoint oracle.
fn oracle() -> Outcome {
    let mut rng = seeded(9);
    let mut worst = [0.0f64; 4];
    for _ in 0..50 {
        let f = random_dyadic(&mut rng, 12, 4.0);
        let g = random_dyadic(&mut rng, 12, 4.0);
        let p = [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)];
        let h = MetricFunctional::internal(g.clone(), p).unwrap();
        worst[0] = worst[0].max((h.eval(&f).unwrap() - riemann_internal(&g, p, &f)).abs());

        let xi = random_field(&mut rng, 10, true);
        let h = MetricFunctional::l1_form(xi.clone()).unwrap();
        worst[1] = worst[1].max((h.eval(&f).unwrap() - riemann_l1(&xi, &f)).abs());

        let p = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
        let xi = random_field(&mut rng, 10, false);
        let c = (xi.moment(p) + rng.gen_range(0.0..2.0)).powf(1.0 / p);
        let h = MetricFunctional::lp_finite(xi.clone(), c, p).unwrap();
        worst[2] = worst[2].max((h.eval(&f).unwrap() - riemann_lp_finite(&xi, c, p, &f)).abs());

        let norm = rng.gen_range(0.0..=1.0);
        let zeta = random_dual_density(&mut rng, 12, p / (p - 1.0), norm);
        let h = MetricFunctional::lp_linear(zeta.clone(), p).unwrap();
        worst[3] = worst[3].max((h.eval(&f).unwrap() - riemann_lp_linear(&zeta, &f)).abs());
    }
    outcome(
        worst.iter().all(|w| *w <= 1e-6),
        format!(
            "max deviation internal {:.1e}, l1 {:.1e}, lp_finite {:.1e}, lp_linear {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 spike sequence", spike),
        ("2 rademacher limits and orbit identity", rademacher_limits),
        ("3 L1 representation consistency", l1_consistency),
        ("4 L_p finite-form reduction and Holder bound", lp_reduction),
        ("5 converse net and L_p witness", converse),
        ("6 tightness dichotomy", tightness),
        ("7 escape rate and ergodic residuals", ergodic),
        ("8 Alspach isometry and fixed-point certificate", alspach),
        ("9 oracle equivalence", oracle),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let out = check();
        println!("[{}] {name}: {}", if out.passed { "PASS" } else { "FAIL" }, out.detail);
        failed += usize::from(!out.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
