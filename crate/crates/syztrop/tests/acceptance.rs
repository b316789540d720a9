//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};
use syztrop::fibration::{ExactPL, VarietyPoint};
use syztrop::laurent::LaurentPolynomial;
use syztrop::lg::{
    build_superpotential, c1_eigenvalues, standard_h, critical_base_points, excess_doubles, newton_lift, same_multiset,
    solve_critical_points, to_y_point, Chart, CompactificationSpec, CriticalPoint, NewtonStep, SolverOptions,
};
use syztrop::mirror::{verify_commutation, MirrorContext, VerifyOptions};
use syztrop::novikov::{NovikovElement, C};
use syztrop::rational::{fmt_q, q, qr, Q};
use syztrop::sampling::{check_singular_locus, check_ultrametric, singular_fiber_decomposition};
use syztrop::toric::{syz_converse, validate, ToricCYData};
use syztrop::tropical::TropicalPolynomial;

/// Coefficient tolerance for critical values and closed forms.
const COEFF_TOL: f64 = 1e-9;
const PRECISION: i64 = 20;
const CRITICAL_BUDGET: Duration = Duration::from_secs(1);
const COMMUTATION_SAMPLES: usize = 10_000;
const COMMUTATION_BUDGET: Duration = Duration::from_secs(10);
const ULTRAMETRIC_POLYS: usize = 1_000;
const ULTRAMETRIC_POINTS: usize = 10;
const ULTRAMETRIC_BUDGET: Duration = Duration::from_secs(5);
const LOCUS_SAMPLES: usize = 1_000;
const FIBER_SAMPLES: usize = 1_000;
const SEED: u64 = 20240601;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn prec() -> Q {
    q(PRECISION)
}

fn exponents(p: &NovikovElement) -> Vec<String> {
    p.terms().iter().map(|(e, _)| fmt_q(e)).collect()
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [2usize, 3] {
        let spec = CompactificationSpec::CPn { n, e: q(1) };
        let start = Instant::now();
        let expected = c1_eigenvalues(&spec, &prec()).expect("closed form");
        let mut per_chart: Vec<Vec<NovikovElement>> = Vec::new();
        for chart in [Chart::Plus, Chart::Minus] {
            let w = build_superpotential(&spec, chart, &prec()).expect("superpotential");
            let pts = match solve_critical_points(&w, chart, &SolverOptions::default()) {
                Ok(p) => p,
                Err(e) => return outcome(false, format!("CP^{n} {chart}: {e}")),
            };
            let vals: Vec<NovikovElement> = pts.iter().map(|p| p.value.clone()).collect();
            let lead_ok = pts.iter().all(|p| {
                let want: Vec<Q> = (0..n).map(|k| if k + 1 == n { qr(1, n as i64 + 1) } else { q(0) }).collect();
                p.leading_valuation == want
                    && p.value.leading().map(|(v, _)| v) == Some(qr(1, n as i64 + 1))
                    && exponents(&p.value).len() == 1
                    && p.residual_val >= prec()
            });
            let good = pts.len() == n + 1 && lead_ok && same_multiset(&vals, &expected, COEFF_TOL);
            ok &= good;
            notes.push(format!("CP^{n} {chart}: {} points{}", pts.len(), if good { "" } else { " MISMATCH" }));
            per_chart.push(vals);
        }
        let agree = same_multiset(&per_chart[0], &per_chart[1], COEFF_TOL);
        let elapsed = start.elapsed();
        ok &= agree && elapsed < CRITICAL_BUDGET;
        notes.push(format!("charts agree={agree} {:.3}s", elapsed.as_secs_f64()));
    }
    outcome(ok, notes.join("; "))
}

/// Closed-form critical point on `Y` for `(r, s) ∈ {0,1}²`.
fn product_closed_form(e1: &Q, e2: &Q, r: u32, s: u32) -> VarietyPoint {
    let half = qr(1, 2);
    let sign = |k: u32| if k % 2 == 0 { 1.0 } else { -1.0 };
    let es = sign(s);
    let er = sign(r);
    let x0 = NovikovElement::monomial(C::new(es, 0.0), -(e2 * &half), prec());
    let d = (e1 - e2) * &half;
    let y1 = NovikovElement::monomial(C::new(er * es, 0.0), d.clone(), prec());
    let x1 = NovikovElement::from_terms(
        vec![(e2 * &half + &d, C::new(er, 0.0)), (e2 * &half, C::new(es, 0.0))],
        prec(),
    );
    VarietyPoint { x0, x1, y: vec![y1] }
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (e1, e2) in [(q(1), q(1)), (q(1), qr(3, 2))] {
        let spec = CompactificationSpec::CPmxCPnm { n: 2, m: 1, e1: e1.clone(), e2: e2.clone() };
        let label = format!("E=({}, {})", fmt_q(&e1), fmt_q(&e2));
        let w = build_superpotential(&spec, Chart::Plus, &prec()).expect("superpotential");
        let pts: Vec<CriticalPoint> = match solve_critical_points(&w, Chart::Plus, &SolverOptions::default()) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("{label}: {e}")),
        };
        let zs: Vec<VarietyPoint> = pts.iter().map(|p| to_y_point(p).expect("torus point")).collect();
        let closed: Vec<VarietyPoint> = (0..4).map(|k| product_closed_form(&e1, &e2, k / 2, k % 2)).collect();
        let mut matched = BTreeSet::new();
        for z in &zs {
            if let Some(k) = closed.iter().position(|c| {
                c.x0.approx_eq(&z.x0, COEFF_TOL) && c.x1.approx_eq(&z.x1, COEFF_TOL) && c.y[0].approx_eq(&z.y[0], COEFF_TOL)
            }) {
                matched.insert(k);
            }
        }
        let vals: Vec<NovikovElement> = pts.iter().map(|p| p.value.clone()).collect();
        let values_ok = same_multiset(&vals, &c1_eigenvalues(&spec, &prec()).expect("closed form"), COEFF_TOL);
        let bases = critical_base_points(&zs, &ExactPL::default(), &standard_h(2, &prec()), &TropicalPolynomial::standard(1));
        let want = (&e1 - &e2) / q(2);
        let base_ok = bases.as_ref().map(|b| b.iter().all(|b| b.base.qbar == vec![want.clone()])).unwrap_or(false);
        let good = pts.len() == 4 && matched.len() == 4 && values_ok && base_ok;
        ok &= good;
        notes.push(format!(
            "{label}: {} points, closed forms {}/4, values={values_ok}, q1={}",
            pts.len(),
            matched.len(),
            bases
                .map(|b| b.first().map(|b| fmt_q(&b.base.qbar[0])).unwrap_or_default())
                .unwrap_or_else(|e| e.to_string())
        ));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for n in 2..=4 {
        let ctx = MirrorContext::standard(n, Arc::new(ExactPL::default())).expect("standard data");
        let start = Instant::now();
        let r = verify_commutation(&ctx, COMMUTATION_SAMPLES, SEED, VerifyOptions::default());
        let elapsed = start.elapsed();
        let good = r.exact && r.mismatches == 0 && r.all_branches_covered() && r.passed() && elapsed < COMMUTATION_BUDGET;
        ok &= good;
        let hist: Vec<String> = r.branches.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        notes.push(format!(
            "n={n} mismatches={} sections={} overlap={}/{} [{}] {:.2}s",
            r.mismatches,
            r.section_failures,
            r.overlap_failures,
            r.overlap_checked,
            hist.join(" "),
            elapsed.as_secs_f64()
        ));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let r = check_ultrametric(ULTRAMETRIC_POLYS, ULTRAMETRIC_POINTS, SEED);
    let elapsed = start.elapsed();
    outcome(
        r.passed() && elapsed < ULTRAMETRIC_BUDGET,
        format!(
            "{} points, violations={}, unique-argmin equal {}/{}, ties={} (strict {}) {:.2}s",
            r.points,
            r.violations,
            r.unique_equal,
            r.unique_argmin,
            r.ties,
            r.tie_strict,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let fan = validate(&ToricCYData::six_ray_fan()).expect("six-ray fan is valid");
    let cases = vec![
        ("C^3", MirrorContext::standard(3, Arc::new(ExactPL::default())).expect("C^3")),
        ("six-ray fan", MirrorContext::from_toric(&fan, Arc::new(ExactPL::default()), prec()).expect("fan")),
    ];
    for (name, ctx) in cases {
        let r = check_singular_locus(&ctx, LOCUS_SAMPLES, SEED);
        ok &= r.passed();
        notes.push(format!(
            "{name}: misclassified={} expected singular={} found={} sections={}",
            r.misclassified, r.expected_singular, r.found_singular, r.section_failures
        ));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let terms = [
        (vec![1, 0], "1"),
        (vec![0, 1], "T^-1"),
        (vec![0, 0], "T^3.14"),
        (vec![2, 0], "T^2"),
        (vec![1, 1], "1"),
        (vec![0, 2], "T^2"),
    ];
    let h = LaurentPolynomial::from_distinct_terms(
        2,
        terms.iter().map(|(e, c)| (e.clone(), NovikovElement::parse(c, prec()).expect("literal"))),
    )
    .expect("distinct exponents");
    let (data, _) = match syz_converse(&h) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let got: BTreeSet<(Vec<i64>, Q)> = data.rays.iter().cloned().zip(data.lambdas.iter().cloned()).collect();
    let expected = ToricCYData::six_ray_fan();
    let want: BTreeSet<(Vec<i64>, Q)> = expected.rays.iter().cloned().zip(expected.lambdas.iter().cloned()).collect();
    let rebuilt = validate(&data).and_then(|v| v.build_h(&prec()));
    let inverts = rebuilt.as_ref().map(|r| r.approx_eq(&h, 0.0)).unwrap_or(false);
    let lambdas: Vec<String> = data.lambdas.iter().map(fmt_q).collect();
    outcome(
        got == want && data.deltas.is_empty() && inverts,
        format!("rays {} match={} lambda=({}) build_h exact={inverts}", data.rays.len(), got == want, lambdas.join(", ")),
    )
}

fn fmt_history(h: &[NewtonStep]) -> String {
    h.iter()
        .map(|s| match (&s.excess, s.vanishes) {
            (_, true) => format!("0@{}", fmt_q(&s.residual_val)),
            (Some(e), false) => format!("+{}", fmt_q(e)),
            (None, false) => "?".into(),
        })
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// `y ↦ y (1 + c T^{1/4})`, a start whose residual sits `1/4` above its level.
fn perturb(y: &[NovikovElement]) -> Vec<NovikovElement> {
    y.iter()
        .map(|c| {
            let bump = NovikovElement::from_terms(vec![(q(0), C::new(1.0, 0.0)), (qr(1, 4), C::new(0.3, 0.2))], prec() + q(1));
            &c.with_precision(prec() + q(1)) * &bump
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let toy = LaurentPolynomial::from_terms(
        1,
        vec![(vec![1], NovikovElement::one(prec())), (vec![-1], NovikovElement::t_pow(q(1), prec()))],
    )
    .expect("toy");
    let cp2 = build_superpotential(&CompactificationSpec::CPn { n: 2, e: q(1) }, Chart::Plus, &prec()).expect("CP^2");
    for (name, w) in [("y + T/y", toy), ("CP^2", cp2)] {
        let pts = match solve_critical_points(&w, Chart::Plus, &SolverOptions::default()) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let solved = pts.iter().all(|p| excess_doubles(&p.history) && p.residual_val >= prec());
        let n = w.nvars();
        let dirs: Vec<Vec<i64>> = (0..n).map(|k| (0..n).map(|j| i64::from(j == k)).collect()).collect();
        let mut perturbed_ok = true;
        let mut shown = String::new();
        for p in &pts {
            match newton_lift(&w, &dirs, &perturb(&p.coordinates), &prec(), 40) {
                Ok((_, hist)) => {
                    let last = hist.last().expect("at least one step");
                    perturbed_ok &= excess_doubles(&hist) && last.residual_val >= prec() && hist.len() >= 3;
                    if shown.is_empty() {
                        shown = fmt_history(&hist);
                    }
                }
                Err(e) => {
                    perturbed_ok = false;
                    shown = e.to_string();
                }
            }
        }
        ok &= solved && perturbed_ok && !pts.is_empty();
        notes.push(format!("{name}: {} solver lifts ok={solved}; perturbed start excess {shown}", pts.len()));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let ctx = MirrorContext::standard(2, Arc::new(ExactPL::default())).expect("C^2");
    let r = singular_fiber_decomposition(&ctx, FIBER_SAMPLES, SEED);
    let mut witness = r.extra_witnesses.first().cloned().unwrap_or_default();
    if witness.len() > 160 {
        let cut = (0..=160).rev().find(|&i| witness.is_char_boundary(i)).unwrap_or(0);
        witness.truncate(cut);
        witness.push_str(" ...");
    }
    outcome(
        r.passed() && r.samples == FIBER_SAMPLES,
        format!(
            "S1={} S2={} disagreements={} errors={} witness {}",
            r.maurer_cartan, r.extra, r.disagreements, r.errors, witness
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 critical values of CP^n", criterion_1),
        ("2 product case CP^1 x CP^1", criterion_2),
        ("3 commutation F o g = j o pi", criterion_3),
        ("4 tropical ultrametric bound", criterion_4),
        ("5 singular locus matching", criterion_5),
        ("6 converse round trip", criterion_6),
        ("7 Newton excess doubling", criterion_7),
        ("8 singular fiber decomposition", criterion_8),
    ];
    // Optional positional arguments select criteria by number.
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.split(' ').next() == Some(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        if !o.ok {
            failed += 1;
        }
        println!(
            "{} criterion {name} ({:.2}s): {}",
            if o.ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
