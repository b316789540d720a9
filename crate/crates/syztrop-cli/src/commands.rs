use crate::report::RunReport;
use crate::{Common, CriticalArgs, Family, HSource, ModelArg, SingularFiberArgs, SurfaceArgs, TropicalArgs, VerifyArgs};
use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use syztrop::fibration::{
    broken_line, classify_singular_fiber_point_n2, corner, Coord, ExactPL, Psi0, PsiModel, Softplus, VarietyPoint,
};
use syztrop::laurent::LaurentPolynomial;
use syztrop::lg::{
    build_superpotential, c1_eigenvalues, critical_base_points, excess_doubles, same_multiset, solve_critical_points,
    standard_h, to_y_point, Chart, CompactificationSpec, CriticalPoint, SolverOptions,
};
use syztrop::mirror::{verify_commutation, MirrorContext, VerifyOptions};
use syztrop::novikov::NovikovElement;
use syztrop::rational::{fmt_q, parse_q, q, Q};
use syztrop::sampling::{check_singular_locus, singular_fiber_decomposition};
use syztrop::toric::{syz_converse, validate, ToricCYData};
use syztrop::tropical::tropicalize;

/// Grids larger than this are refused rather than silently truncated.
const MAX_GRID: usize = 200_000;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn model(arg: ModelArg, psi0: &Q) -> Arc<dyn PsiModel> {
    let psi0 = Psi0::Constant(psi0.clone());
    match arg {
        ModelArg::Exact => Arc::new(ExactPL { psi0 }),
        ModelArg::Softplus => Arc::new(Softplus { psi0 }),
    }
}

/// `h` from a polynomial file, a toric file or the standard `1 + y₁ + …`,
/// plus a JSON description of the source for the input digest.
fn load_h(src: &HSource, common: &Common) -> Result<(LaurentPolynomial, Value)> {
    let prec = &common.precision;
    match (&src.h, &src.toric) {
        (Some(_), Some(_)) => bail!("--h and --toric are mutually exclusive"),
        (Some(path), None) => {
            let text = read(path)?;
            let h = LaurentPolynomial::from_json_str(&text, prec.clone())?;
            Ok((h, json!({"h": text})))
        }
        (None, Some(path)) => {
            let text = read(path)?;
            let data = ToricCYData::from_json_str(&text, prec.clone())?;
            let h = validate(&data)?.build_h(prec)?;
            Ok((h, json!({"toric": text})))
        }
        (None, None) => {
            let n = src.n.max(1);
            Ok((standard_h(n, prec), json!({"standard": n})))
        }
    }
}

fn axis(range: &Q, step: &Q) -> Result<Vec<Q>> {
    if *step <= q(0) || *range < q(0) {
        bail!("grid needs a positive step and a nonnegative range");
    }
    let mut out = Vec::new();
    let mut x = -range.clone();
    while x <= *range {
        out.push(x.clone());
        x += step;
    }
    Ok(out)
}

fn grid(dim: usize, range: &Q, step: &Q) -> Result<Vec<Vec<Q>>> {
    let ax = axis(range, step)?;
    let size = ax.len().checked_pow(dim as u32).filter(|s| *s <= MAX_GRID);
    if size.is_none() {
        bail!("grid of {} points per axis in {dim} dimensions exceeds {MAX_GRID} points", ax.len());
    }
    let mut pts: Vec<Vec<Q>> = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                ax.iter().map(move |x| {
                    let mut v = p.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect();
    }
    Ok(pts)
}

fn fmt_point(v: &[Q]) -> Vec<String> {
    v.iter().map(fmt_q).collect()
}

fn write_export(path: Option<&Path>, contents: &str) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, contents).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn common_inputs(common: &Common) -> Value {
    json!({
        "precision": fmt_q(&common.precision),
        "tolerance": common.tolerance,
        "seed": common.seed,
    })
}

pub fn tropical(args: &TropicalArgs, common: &Common) -> Result<RunReport> {
    let (h, src) = load_h(&args.source, common)?;
    if h.len() < 2 {
        bail!("degenerate input: h needs at least two terms, got {}", h.len());
    }
    let ht = tropicalize(&h)?;
    let inputs = json!({
        "source": src,
        "range": fmt_q(&args.range),
        "step": fmt_q(&args.step),
        "common": common_inputs(common),
    });
    let mut r = RunReport::new("tropical", &inputs);
    let m = ht.nvars();
    if m == 0 {
        bail!("degenerate input: h has no variables");
    }
    // Sweep lines parallel to the last axis, so hits are exact.
    let mut d = vec![q(0); m];
    d[m - 1] = q(1);
    let span = &args.range * q(2);
    let mut csv = String::new();
    let header: Vec<String> = (1..=m).map(|k| format!("q{k}")).chain(["terms".to_string()]).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    let mut points = Vec::new();
    let mut off = 0usize;
    for base in grid(m - 1, &args.range, &args.step)? {
        let mut p = base.clone();
        p.push(-args.range.clone());
        for t in ht.hits_on_segment(&p, &d, &q(0), &span) {
            let pt: Vec<Q> = p.iter().zip(&d).map(|(a, b)| a + &t * b).collect();
            off += usize::from(!ht.on_hypersurface(&pt));
            let (_, arg) = ht.eval(&pt);
            let terms: Vec<String> = arg.iter().map(|k| k.to_string()).collect();
            let row: Vec<String> = fmt_point(&pt).into_iter().chain([terms.join(";")]).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
            points.push(json!({"q": fmt_point(&pt), "terms": arg}));
        }
    }
    let mut chambers = std::collections::BTreeMap::new();
    for g in grid(m, &args.range, &args.step)? {
        let (_, arg) = ht.eval(&g);
        let key = if arg.len() == 1 { format!("cell {}", arg[0]) } else { "wall".to_string() };
        *chambers.entry(key).or_insert(0usize) += 1;
    }
    write_export(args.export.as_deref(), &csv)?;
    r.count("hypersurface_points", points.len());
    r.check("points_on_hypersurface", off == 0, format!("{off} sampled points off the hypersurface"));
    r.check("hypersurface_nonempty", !points.is_empty(), format!("{} points", points.len()));
    let bounded: Vec<usize> = ht.bounded_cells().into_iter().collect();
    r.data = json!({
        "h_trop": ht.to_json_value(),
        "bounded_cells": bounded,
        "chamber_map": chambers,
        "points": points,
    });
    Ok(r)
}

pub fn surface(args: &SurfaceArgs, common: &Common) -> Result<RunReport> {
    let (h, src) = load_h(&args.source, common)?;
    let ht = tropicalize(&h)?;
    let psi = model(args.model, &args.psi0);
    let inputs = json!({
        "source": src,
        "model": psi.name(),
        "psi0": fmt_q(&args.psi0),
        "range": fmt_q(&args.range),
        "step": fmt_q(&args.step),
        "c_max": fmt_q(&args.c_max),
        "common": common_inputs(common),
    });
    let mut r = RunReport::new("surface", &inputs);
    let cs: Vec<Q> = axis(&args.c_max, &args.step)?.into_iter().filter(|c| *c > q(0)).collect();
    let qbars = grid(ht.nvars(), &args.range, &args.step)?;
    if qbars.len() * cs.len() > MAX_GRID {
        bail!("surface mesh would exceed {MAX_GRID} rows");
    }
    let mut csv = String::new();
    let header: Vec<String> = (1..=ht.nvars()).map(|k| format!("q{k}")).chain(["c", "u0", "u1"].map(String::from)).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    let mut rows = Vec::new();
    let mut corners = Vec::new();
    let mut off = 0usize;
    for qbar in &qbars {
        let (a0, a1) = corner(qbar, psi.as_ref(), &ht);
        let (a0c, a1c) = (Coord::Exact(a0.clone()), Coord::Exact(a1.clone()));
        if ht.on_hypersurface(qbar) {
            corners.push(json!({"qbar": fmt_point(qbar), "u0": fmt_q(&a0), "u1": fmt_q(&a1)}));
        }
        for c in &cs {
            let (u0, u1) = broken_line(qbar, psi.as_ref(), &ht, &Coord::Exact(c.clone()));
            // either leg of the broken line through the corner
            let on_leg = (u1.eq_tol(&a1c) && u0.cmp_tol(&a0c).is_le()) || (u0.eq_tol(&a0c) && u1.cmp_tol(&a1c).is_le());
            off += usize::from(!on_leg);
            let row: Vec<String> = fmt_point(qbar)
                .into_iter()
                .chain([fmt_q(c), u0.to_string(), u1.to_string()])
                .collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
            rows.push(row);
        }
    }
    write_export(args.export.as_deref(), &csv)?;
    r.count("rows", rows.len());
    r.count("corner_points", corners.len());
    r.check("rows_on_broken_lines", off == 0, format!("{off} rows off both legs"));
    r.data = json!({"header": header, "rows": rows, "corner_curve": corners});
    Ok(r)
}

pub fn verify(args: &VerifyArgs, common: &Common) -> Result<RunReport> {
    let psi = model(args.model, &q(1));
    let (ctx, src) = match &args.toric {
        Some(path) => {
            let text = read(path)?;
            let data = ToricCYData::from_json_str(&text, common.precision.clone())?;
            let v = validate(&data)?;
            (MirrorContext::from_toric(&v, psi, common.precision.clone())?, json!({"toric": text}))
        }
        None => (
            MirrorContext::standard(args.n, psi)?.with_precision(common.precision.clone()),
            json!({"standard": args.n}),
        ),
    };
    let inputs = json!({
        "source": src,
        "model": ctx.model().name(),
        "samples": args.samples,
        "locus_samples": args.locus_samples,
        "inject_bug": args.inject_bug,
        "common": common_inputs(common),
    });
    let mut r = RunReport::new("verify", &inputs);
    let opts = VerifyOptions { inject_bug: args.inject_bug };
    let comm = verify_commutation(&ctx, args.samples, common.seed, opts);
    r.check(
        "commutation",
        comm.mismatches == 0 && comm.section_failures == 0 && comm.overlap_failures == 0,
        format!(
            "{} mismatches, {} section failures, {}/{} overlap failures, exact={}",
            comm.mismatches, comm.section_failures, comm.overlap_failures, comm.overlap_checked, comm.exact
        ),
    );
    r.check("branch_coverage", comm.all_branches_covered(), format!("{:?}", comm.branches));
    r.count("commutation_samples", comm.total);
    r.count("mismatches", comm.mismatches);
    r.branches = comm.branches.clone();
    let locus = check_singular_locus(&ctx, args.locus_samples, common.seed);
    r.check(
        "singular_locus",
        locus.passed(),
        format!(
            "{} misclassified, {} expected singular, {} found",
            locus.misclassified, locus.expected_singular, locus.found_singular
        ),
    );
    r.count("locus_samples", locus.samples);
    r.data = json!({"commutation": comm, "singular_locus": locus});
    Ok(r)
}

fn spec_of(args: &CriticalArgs, common: &Common) -> Result<(CompactificationSpec, Value)> {
    let es = &args.e;
    let e = |k: usize| es.get(k).cloned().unwrap_or_else(|| q(1));
    Ok(match args.family {
        Family::Cpn => (
            CompactificationSpec::CPn { n: args.n, e: e(0) },
            json!({"family": "cpn", "n": args.n, "E": [fmt_q(&e(0))]}),
        ),
        Family::CpmXCpnm => {
            let m = args.m.unwrap_or(1);
            (
                CompactificationSpec::CPmxCPnm { n: args.n, m, e1: e(0), e2: e(1) },
                json!({"family": "cpm-x-cpnm", "n": args.n, "m": m, "E": [fmt_q(&e(0)), fmt_q(&e(1))]}),
            )
        }
        Family::Custom => {
            let path = args.w.as_ref().ok_or_else(|| anyhow!("--family custom needs --w <file>"))?;
            let text = read(path)?;
            let w = LaurentPolynomial::from_json_str(&text, common.precision.clone())?;
            let chart = args.w_chart.chart();
            (
                CompactificationSpec::Custom { chart, w },
                json!({"family": "custom", "chart": chart.to_string(), "w": text}),
            )
        }
    })
}

fn point_json(p: &CriticalPoint, base: Option<Value>) -> Value {
    json!({
        "coordinates": p.coordinates.iter().map(NovikovElement::to_literal).collect::<Vec<_>>(),
        "value": p.value.to_literal(),
        "residual_valuation": fmt_q(&p.residual_val),
        "leading_valuation": fmt_point(&p.leading_valuation),
        "newton": p.history,
        "base_point": base,
    })
}

pub fn critical(args: &CriticalArgs, common: &Common) -> Result<RunReport> {
    let (spec, src) = spec_of(args, common)?;
    spec.validate()?;
    let charts: Vec<Chart> = args.chart.charts();
    let inputs = json!({
        "spec": src,
        "charts": charts.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "common": common_inputs(common),
    });
    let mut r = RunReport::new("critical", &inputs);
    let opts = SolverOptions {
        precision: common.precision.clone(),
        ..SolverOptions::default()
    };
    let n = spec.dim();
    let h = standard_h(n, &common.precision);
    let ht = tropicalize(&h)?;
    let expected = c1_eigenvalues(&spec, &common.precision).ok();
    let mut per_chart = serde_json::Map::new();
    let mut values: Vec<Vec<NovikovElement>> = Vec::new();
    for chart in charts {
        let w = build_superpotential(&spec, chart, &common.precision)?;
        let pts = solve_critical_points(&w, chart, &opts)?;
        let zs: Result<Vec<VarietyPoint>, _> = pts.iter().map(to_y_point).collect();
        let bases = zs.ok().and_then(|zs| critical_base_points(&zs, &ExactPL::default(), &h, &ht).ok());
        let rows: Vec<Value> = pts
            .iter()
            .enumerate()
            .map(|(k, p)| point_json(p, bases.as_ref().map(|b| json!(b[k]))))
            .collect();
        let doubling = pts.iter().all(|p| excess_doubles(&p.history) && p.residual_val >= common.precision);
        r.check(&format!("newton_{chart}"), doubling, "excess doubles until the residual reaches precision");
        r.count(&format!("points_{chart}"), pts.len());
        let vals: Vec<NovikovElement> = pts.iter().map(|p| p.value.clone()).collect();
        if let Some(exp) = &expected {
            r.check(
                &format!("eigenvalues_{chart}"),
                same_multiset(&vals, exp, common.tolerance),
                format!("{} critical values against {} eigenvalues", vals.len(), exp.len()),
            );
        }
        per_chart.insert(chart.to_string(), Value::Array(rows));
        values.push(vals);
    }
    if values.len() == 2 {
        r.check(
            "charts_agree",
            same_multiset(&values[0], &values[1], common.tolerance),
            "critical values in both charts",
        );
    }
    r.data = json!({
        "points": per_chart,
        "eigenvalues": expected.map(|e| e.iter().map(NovikovElement::to_literal).collect::<Vec<_>>()),
    });
    Ok(r)
}

pub fn converse(h_path: &Path, common: &Common) -> Result<RunReport> {
    let text = read(h_path)?;
    let h = LaurentPolynomial::from_json_str(&text, common.precision.clone())?;
    let inputs = json!({"h": text, "common": common_inputs(common)});
    let mut r = RunReport::new("converse", &inputs);
    let (data, polytope) = syz_converse(&h)?;
    let rebuilt = validate(&data)?.build_h(&common.precision)?;
    r.check("build_h_round_trip", rebuilt.approx_eq(&h, 0.0), "build_h of the recovered data against h");
    r.count("rays", data.rays.len());
    let inequalities: Vec<Value> = polytope
        .inequalities
        .iter()
        .map(|(v, l)| json!({"ray": v, "lambda": fmt_q(l)}))
        .collect();
    r.data = json!({"toric": data.to_json_value(), "polytope": inequalities});
    Ok(r)
}

pub fn singular_fiber(args: &SingularFiberArgs, common: &Common) -> Result<RunReport> {
    let ctx = MirrorContext::standard(2, Arc::new(ExactPL::default()))?.with_precision(common.precision.clone());
    match &args.y {
        Some(y) => {
            let inputs = json!({"y": y, "z0": args.z0, "common": common_inputs(common)});
            let mut r = RunReport::new("singular-fiber", &inputs);
            let prec = common.precision.clone();
            let y = NovikovElement::parse(y, prec.clone())?;
            let z0 = NovikovElement::parse(&args.z0, prec)?;
            // z₀z₁ = h(y) on the corner fiber over q̄ = 0, where ψ₀ = 1
            let hv = ctx.h().eval(std::slice::from_ref(&y))?;
            let z1 = &hv * &z0.invert()?;
            let psi0 = ctx.model().psi0(&[q(0)]);
            let z = VarietyPoint { x0: z0.shift(&-psi0.clone()), x1: z1.shift(&psi0), y: vec![y] };
            match classify_singular_fiber_point_n2(&z, ctx.model(), ctx.h(), ctx.h_trop()) {
                Ok(class) => {
                    r.check("on_singular_fiber", true, "");
                    r.data = json!({"class": class, "z1": z1.to_literal()});
                }
                Err(e) => {
                    r.check("on_singular_fiber", false, e.to_string());
                }
            }
            Ok(r)
        }
        None => {
            let inputs = json!({"samples": args.samples, "common": common_inputs(common)});
            let mut r = RunReport::new("singular-fiber", &inputs);
            let rep = singular_fiber_decomposition(&ctx, args.samples, common.seed);
            r.check(
                "decomposition",
                rep.passed(),
                format!("{} disagreements, {} errors", rep.disagreements, rep.errors),
            );
            r.check("extra_witness", rep.extra > 0, format!("{} points in the extra component", rep.extra));
            r.count("maurer_cartan", rep.maurer_cartan);
            r.count("extra", rep.extra);
            r.data = json!({"witnesses": rep.extra_witnesses.iter().take(3).collect::<Vec<_>>(), "failures": rep.failures});
            Ok(r)
        }
    }
}

pub fn parse_rational(s: &str) -> Result<Q, String> {
    parse_q(s).map_err(|e| e.to_string())
}
