//! Seeded generators of chart points, corner-fiber points and the
//! sampled singular-locus and singular-fiber checks built on them.

use crate::fibration::{classify_F_point, classify_singular_fiber_point_n2, corner_coordinates, BasePoint, Coord, SingularFiberClass, VarietyPoint};
use crate::laurent::LaurentPolynomial;
use crate::mirror::{Chamber, ChartPoint, MirrorContext};
use crate::novikov::{NovikovElement, C};
use crate::rational::{dot_int, q, qr, Q};
use crate::tropical::TropicalPolynomial;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// True with probability `num/den`.
pub fn coin<R: Rng>(rng: &mut R, num: u32, den: u32) -> bool {
    rng.gen_range(0..den) < num
}

/// `a/b` with `a ∈ [lo, hi]` and `b ∈ [1, max_den]`.
pub fn rand_q<R: Rng>(rng: &mut R, lo: i64, hi: i64, max_den: i64) -> Q {
    qr(rng.gen_range(lo..=hi), rng.gen_range(1..=max_den))
}

pub fn rand_qbar<R: Rng>(rng: &mut R, m: usize) -> Vec<Q> {
    (0..m).map(|_| rand_q(rng, -12, 12, 4)).collect()
}

/// `a + b T^s` with `|a| ∈ [1/2, 2)`, `|b| ≤ |a|/2` and `s ∈ {1/2, 1, 3/2, 2}`.
pub fn rand_unit<R: Rng>(rng: &mut R, precision: &Q) -> NovikovElement {
    let a = C::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
    let b = a * C::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..std::f64::consts::TAU));
    let s = qr(rng.gen_range(1..=4), 2);
    NovikovElement::from_terms(vec![(Q::zero(), a), (s, b)], precision.clone())
}

/// A rational point of the tropical hypersurface, found by walking from a
/// random point along a random integer direction.
pub fn point_on_hypersurface<R: Rng>(h_trop: &TropicalPolynomial, rng: &mut R) -> Option<Vec<Q>> {
    let m = h_trop.nvars();
    if m == 0 || h_trop.terms().len() < 2 {
        return None;
    }
    for _ in 0..64 {
        let p = rand_qbar(rng, m);
        let d: Vec<Q> = (0..m).map(|_| q(rng.gen_range(-2..=2))).collect();
        if d.iter().all(Zero::is_zero) {
            continue;
        }
        if let Some(t) = h_trop.first_hit_along(&p, &d) {
            let pt: Vec<Q> = p.iter().zip(&d).map(|(a, b)| a + &t * b).collect();
            if h_trop.on_hypersurface(&pt) {
                return Some(pt);
            }
        }
    }
    None
}

fn leading_monomial(e: &[i64], lead: C, a: &[C], skip: usize) -> C {
    e.iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .fold(lead, |acc, (j, &k)| acc * a[j].powi(k as i32))
}

/// Adjusts the leading coefficient of one unit so that the minimal terms of
/// `h(T^{v̄}u)` cancel. Picks a variable whose exponents over the tie set
/// take exactly two values. Returns whether a cancellation was arranged.
pub fn force_cancellation<R: Rng>(h: &LaurentPolynomial, vbar: &[Q], units: &mut [NovikovElement], rng: &mut R) -> bool {
    let terms: Vec<(&Vec<i64>, C, Q)> = h
        .terms()
        .filter_map(|(e, c)| c.leading().map(|(v, l)| (e, l, v + dot_int(e, vbar))))
        .collect();
    let Some(min) = terms.iter().map(|t| t.2.clone()).min() else {
        return false;
    };
    let tie: Vec<&(&Vec<i64>, C, Q)> = terms.iter().filter(|t| t.2 == min).collect();
    if tie.len() < 2 {
        return false;
    }
    let a: Vec<C> = units.iter().map(NovikovElement::leading_coeff).collect();
    let mut order: Vec<usize> = (0..vbar.len()).collect();
    order.shuffle(rng);
    for k in order {
        let mut vals: Vec<i64> = tie.iter().map(|t| t.0[k]).collect();
        vals.sort_unstable();
        vals.dedup();
        if vals.len() != 2 {
            continue;
        }
        let (lo, hi) = (vals[0], vals[1]);
        let (mut s_lo, mut s_hi) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        for t in &tie {
            let m = leading_monomial(t.0, t.1, &a, k);
            if t.0[k] == lo {
                s_lo += m;
            } else {
                s_hi += m;
            }
        }
        if s_hi.norm() < 1e-6 || s_lo.norm() < 1e-6 {
            continue;
        }
        // s_lo a^lo + s_hi a^hi = 0
        let root = (-s_lo / s_hi).powf(1.0 / (hi - lo) as f64);
        let fix = NovikovElement::constant(root - a[k], units[k].precision().clone());
        units[k] = &units[k] + &fix;
        return true;
    }
    false
}

fn chart_ratio<R: Rng>(rng: &mut R, chamber: Chamber, on_pi: bool) -> Q {
    let wall = !on_pi && coin(rng, 1, 6);
    if wall {
        return q(1);
    }
    let k = match (chamber, on_pi) {
        (Chamber::Plus, true) => rng.gen_range(13..=48),
        (Chamber::Plus, false) => rng.gen_range(11..=48),
        (Chamber::Minus, true) => rng.gen_range(1..=11),
        (Chamber::Minus, false) => rng.gen_range(1..=13),
    };
    qr(k, 12)
}

/// Random chart point in a chamber. With `on_pi` the base point is pushed
/// onto the tropical hypersurface and, half the time, the leading terms of
/// `h(ȳ)` are made to cancel.
pub fn sample_chart_point<R: Rng>(ctx: &MirrorContext, chamber: Chamber, on_pi: bool, rng: &mut R) -> ChartPoint {
    let n = ctx.dim();
    let prec = ctx.precision().clone();
    for _ in 0..256 {
        let qbar = if on_pi {
            point_on_hypersurface(ctx.h_trop(), rng).unwrap_or_else(|| rand_qbar(rng, n - 1))
        } else {
            rand_qbar(rng, n - 1)
        };
        let on = ctx.h_trop().on_hypersurface(&qbar);
        let c = ctx.model().psi0(&qbar) * chart_ratio(rng, chamber, on);
        let vn = match chamber {
            Chamber::Plus => &c - ctx.h_trop().value(&qbar),
            Chamber::Minus => c,
        };
        let mut units: Vec<NovikovElement> = (0..n).map(|_| rand_unit(rng, &prec)).collect();
        if on && coin(rng, 1, 2) {
            force_cancellation(ctx.h(), &qbar, &mut units[..n - 1], rng);
        }
        let mut y: Vec<NovikovElement> = qbar.iter().zip(&units).map(|(v, u)| u.shift(v)).collect();
        y.push(units[n - 1].shift(&vn));
        let p = ChartPoint { chamber, y };
        if ctx.base_of(&p).is_ok() {
            return p;
        }
    }
    panic!("could not sample a {chamber:?} chart point")
}

/// A point over the corner `A(v̄)`: `x₀ = T^{a₀ + t}u` with
/// `0 ≤ t ≤ val h(ȳ) − h_trop(v̄)` and `x₁ = h(ȳ)/x₀`.
pub fn corner_fiber_point<R: Rng>(ctx: &MirrorContext, ybar: Vec<NovikovElement>, rng: &mut R) -> VarietyPoint {
    let vbar: Vec<Q> = ybar.iter().map(NovikovElement::val_or_precision).collect();
    let ht = ctx.h_trop().value(&vbar);
    let a0 = &ht - ctx.model().psi0(&vbar);
    let hv = ctx.h().eval(&ybar).expect("nonzero coordinates");
    let t = match hv.val().finite() {
        Some(w) => (w - &ht) * qr(rng.gen_range(0..=4), 4),
        None => qr(rng.gen_range(0..=2), 2),
    };
    let x0 = rand_unit(rng, ctx.precision()).shift(&(a0 + t));
    let x1 = if hv.is_zero() {
        NovikovElement::zero(ctx.precision().clone())
    } else {
        &hv * &x0.invert().expect("unit")
    };
    VarietyPoint { x0, x1, y: ybar }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularLocusReport {
    pub samples: usize,
    pub expected_singular: usize,
    pub found_singular: usize,
    pub misclassified: usize,
    pub section_failures: usize,
    pub categories: BTreeMap<String, usize>,
    pub classes: BTreeMap<String, usize>,
    pub failures: Vec<String>,
}

impl SingularLocusReport {
    pub fn passed(&self) -> bool {
        self.misclassified == 0 && self.section_failures == 0 && self.expected_singular > 0
    }
}

struct LocusOutcome {
    category: &'static str,
    expected: bool,
    class: Result<crate::fibration::FPointClass, String>,
    section_ok: bool,
}

fn locus_sample(ctx: &MirrorContext, seed: u64, index: u64) -> LocusOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = ctx.dim();
    let prec = ctx.precision().clone();
    let h_trop = ctx.h_trop();
    let category = rng.gen_range(0..4);
    let (category, z, q) = match (category, point_on_hypersurface(h_trop, &mut rng)) {
        (0, Some(qbar)) => {
            let mut units: Vec<NovikovElement> = (0..n - 1).map(|_| rand_unit(&mut rng, &prec)).collect();
            if coin(&mut rng, 1, 2) {
                force_cancellation(ctx.h(), &qbar, &mut units, &mut rng);
            }
            let ybar = qbar.iter().zip(&units).map(|(v, u)| u.shift(v)).collect();
            let z = corner_fiber_point(ctx, ybar, &mut rng);
            ("corner", z, BasePoint::exact(qbar, Q::zero()))
        }
        (1, _) => {
            let qbar = loop {
                let c = rand_qbar(&mut rng, n - 1);
                if !h_trop.on_hypersurface(&c) {
                    break c;
                }
            };
            let qp = BasePoint::exact(qbar, Q::zero());
            let units: Vec<NovikovElement> = (0..n).map(|_| rand_unit(&mut rng, &prec)).collect();
            let p = ctx.lift(Chamber::Plus, &qp, &units).expect("wall point off the hypersurface");
            ("wall", ctx.g_embed(&p).expect("chart point"), qp)
        }
        (c, _) => {
            let chamber = if coin(&mut rng, 1, 2) { Chamber::Plus } else { Chamber::Minus };
            let on_pi = c == 2;
            let p = sample_chart_point(ctx, chamber, on_pi, &mut rng);
            let qp = ctx.base_of(&p).expect("sampled chart point");
            (if on_pi { "hypersurface" } else { "generic" }, ctx.g_embed(&p).expect("chart point"), qp)
        }
    };
    let expected = q.qn.eq_tol(&Coord::zero()) && h_trop.on_hypersurface(&q.qbar);
    let class = classify_F_point(&z, ctx.model(), ctx.h(), h_trop).map_err(|e| e.to_string());
    let section_ok = ctx.f_map(&z).map(|b| b.eq_tol(&q)).unwrap_or(false);
    LocusOutcome { category, expected, class, section_ok }
}

/// Builds points over base points of four kinds (corner points over the
/// hypersurface, wall points off it, hypersurface points off the wall, and
/// generic points) and checks that `classify_F_point` is singular exactly
/// over `Π × {0}`, and that `f` recovers the base point.
pub fn check_singular_locus(ctx: &MirrorContext, samples: usize, seed: u64) -> SingularLocusReport {
    let outcomes: Vec<LocusOutcome> = (0..samples as u64).into_par_iter().map(|i| locus_sample(ctx, seed, i)).collect();
    let mut r = SingularLocusReport {
        samples,
        expected_singular: 0,
        found_singular: 0,
        misclassified: 0,
        section_failures: 0,
        categories: BTreeMap::new(),
        classes: BTreeMap::new(),
        failures: Vec::new(),
    };
    for (i, o) in outcomes.into_iter().enumerate() {
        *r.categories.entry(o.category.to_string()).or_default() += 1;
        r.expected_singular += o.expected as usize;
        match o.class {
            Ok(c) => {
                *r.classes.entry(c.label().to_string()).or_default() += 1;
                r.found_singular += c.is_singular() as usize;
                if c.is_singular() != o.expected {
                    r.misclassified += 1;
                    if r.failures.len() < 10 {
                        r.failures.push(format!("sample {i} ({}): class {}", o.category, c.label()));
                    }
                }
            }
            Err(e) => {
                r.misclassified += 1;
                if r.failures.len() < 10 {
                    r.failures.push(format!("sample {i} ({}): {e}", o.category));
                }
            }
        }
        if !o.section_ok {
            r.section_failures += 1;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularFiberReport {
    pub samples: usize,
    pub maurer_cartan: usize,
    pub extra: usize,
    pub disagreements: usize,
    pub errors: usize,
    pub extra_witnesses: Vec<String>,
    pub failures: Vec<String>,
}

impl SingularFiberReport {
    pub fn passed(&self) -> bool {
        self.disagreements == 0 && self.errors == 0 && self.maurer_cartan + self.extra == self.samples && self.extra > 0
    }
}

/// Generates points of the singular fibre over `(q̄, 0)` for `n = 2`,
/// roughly half with cancelling leading terms of `h(y)`, and compares the
/// classification with the direct test on `z₀ = T^{ψ₀ − h_trop}x₀`,
/// `z₁ = T^{−ψ₀}x₁`: Maurer-Cartan iff one of them has positive valuation.
pub fn singular_fiber_decomposition(ctx: &MirrorContext, samples: usize, seed: u64) -> SingularFiberReport {
    assert_eq!(ctx.dim(), 2, "singular fibre decomposition is implemented for n = 2");
    let prec = ctx.precision().clone();
    let rows: Vec<(Result<SingularFiberClass, String>, Option<bool>, String)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let qbar = point_on_hypersurface(ctx.h_trop(), &mut rng).expect("hypersurface is nonempty");
            let mut units = vec![rand_unit(&mut rng, &prec)];
            match rng.gen_range(0..10) {
                0 => {
                    // exact cancellation: the leading coefficient alone
                    force_cancellation(ctx.h(), &qbar, &mut units, &mut rng);
                    units[0] = NovikovElement::constant(units[0].leading_coeff(), prec.clone());
                }
                1..=4 => {
                    force_cancellation(ctx.h(), &qbar, &mut units, &mut rng);
                }
                _ => {}
            }
            let y: Vec<NovikovElement> = vec![units[0].shift(&qbar[0])];
            let z = corner_fiber_point(ctx, y, &mut rng);
            let class = classify_singular_fiber_point_n2(&z, ctx.model(), ctx.h(), ctx.h_trop()).map_err(|e| e.to_string());
            let ht = ctx.h_trop().value(&qbar);
            let p0 = ctx.model().psi0(&qbar);
            let (z0, z1) = corner_coordinates(&z, &p0);
            let z0 = z0.shift(&-ht);
            let nonneg = |x: &NovikovElement| x.val().finite().is_none_or(|v| !v.is_negative());
            let pos = |x: &NovikovElement| x.val().finite().is_none_or(|v| v.is_positive());
            let direct = (nonneg(&z0) && nonneg(&z1)).then(|| pos(&z0) || pos(&z1));
            (class, direct, format!("y = {}, x0 = {}, x1 = {}", z.y[0].to_literal(), z.x0.to_literal(), z.x1.to_literal()))
        })
        .collect();
    let mut r = SingularFiberReport {
        samples,
        maurer_cartan: 0,
        extra: 0,
        disagreements: 0,
        errors: 0,
        extra_witnesses: Vec::new(),
        failures: Vec::new(),
    };
    for (i, (class, direct, desc)) in rows.into_iter().enumerate() {
        match (class, direct) {
            (Ok(c), Some(mc)) => {
                match c {
                    SingularFiberClass::MaurerCartan => r.maurer_cartan += 1,
                    SingularFiberClass::Extra => {
                        r.extra += 1;
                        if r.extra_witnesses.len() < 3 {
                            r.extra_witnesses.push(desc.clone());
                        }
                    }
                }
                if (c == SingularFiberClass::MaurerCartan) != mc {
                    r.disagreements += 1;
                    if r.failures.len() < 10 {
                        r.failures.push(format!("sample {i}: {c:?} but direct test says {mc}: {desc}"));
                    }
                }
            }
            (Ok(_), None) => {
                r.errors += 1;
                r.failures.push(format!("sample {i}: rescaled coordinates not integral: {desc}"));
            }
            (Err(e), _) => {
                r.errors += 1;
                if r.failures.len() < 10 {
                    r.failures.push(format!("sample {i}: {e}"));
                }
            }
        }
    }
    r
}


#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UltrametricReport {
    pub polynomials: usize,
    pub points: usize,
    /// Points with `val h(y) < h_trop(val y)`.
    pub violations: usize,
    pub unique_argmin: usize,
    /// Unique-argmin points where equality holds.
    pub unique_equal: usize,
    pub ties: usize,
    /// Tie points where the leading terms cancelled.
    pub tie_strict: usize,
    pub failures: Vec<String>,
}

impl UltrametricReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.unique_equal == self.unique_argmin && self.unique_argmin > 0 && self.ties > 0
    }
}

/// A random Laurent polynomial in 1 to 3 variables with 2 to 6 terms,
/// exponents in `[-2, 2]` and unit coefficients scaled by `T^{c}`.
pub fn random_laurent<R: Rng>(rng: &mut R, precision: &Q) -> LaurentPolynomial {
    let m = rng.gen_range(1..=3);
    // one variable only has five exponents in range
    let k = rng.gen_range(2..=6).min(5usize.pow(m as u32));
    let mut p = LaurentPolynomial::zero(m);
    while p.len() < k {
        let e: Vec<i64> = (0..m).map(|_| rng.gen_range(-2..=2)).collect();
        if p.coeff(&e).is_none() {
            let c = rand_unit(rng, precision).shift(&rand_q(rng, -3, 3, 4));
            p.add_term(e, c);
        }
    }
    p
}

/// A valuation vector where two chosen terms tie for the minimum, if one is
/// found within a few attempts.
fn tie_point<R: Rng>(h_trop: &TropicalPolynomial, rng: &mut R) -> Option<Vec<Q>> {
    let terms = h_trop.terms();
    let m = h_trop.nvars();
    for _ in 0..32 {
        let mut idx: Vec<usize> = (0..terms.len()).collect();
        idx.shuffle(rng);
        let (a, b) = (&terms[idx[0]], &terms[idx[1]]);
        let Some(j) = (0..m).find(|&j| a.e[j] != b.e[j]) else {
            continue;
        };
        let mut v: Vec<Q> = (0..m).map(|_| rand_q(rng, -3, 3, 4)).collect();
        // solve c_a + <e_a, v> = c_b + <e_b, v> for v_j
        v[j] = Q::zero();
        let gap = (&b.c + dot_int(&b.e, &v)) - (&a.c + dot_int(&a.e, &v));
        v[j] = gap / q(a.e[j] - b.e[j]);
        if h_trop.on_hypersurface(&v) {
            return Some(v);
        }
    }
    None
}

/// Checks `val h(y) ≥ h_trop(val y)` on random polynomials and points, with
/// equality whenever the minimum is attained once. A third of the points
/// are placed where two terms tie.
pub fn check_ultrametric(polynomials: usize, points_per: usize, seed: u64) -> UltrametricReport {
    let prec = q(40);
    let rows: Vec<Vec<(bool, Ordering, String)>> = (0..polynomials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let h = random_laurent(&mut rng, &prec);
            let h_trop = crate::tropical::tropicalize(&h).expect("nonzero coefficients");
            (0..points_per)
                .map(|_| {
                    let m = h.nvars();
                    let v = match coin(&mut rng, 1, 3).then(|| tie_point(&h_trop, &mut rng)).flatten() {
                        Some(v) => v,
                        None => (0..m).map(|_| rand_q(&mut rng, -3, 3, 4)).collect(),
                    };
                    let y: Vec<NovikovElement> = v.iter().map(|vk| rand_unit(&mut rng, &prec).shift(vk)).collect();
                    let (level, arg) = h_trop.eval(&v);
                    let val = h.eval(&y).expect("arity matches").val_or_precision();
                    (arg.len() == 1, val.cmp(&level), format!("h = {h}, val y = {v:?}"))
                })
                .collect()
        })
        .collect();
    let mut r = UltrametricReport {
        polynomials,
        points: polynomials * points_per,
        violations: 0,
        unique_argmin: 0,
        unique_equal: 0,
        ties: 0,
        tie_strict: 0,
        failures: Vec::new(),
    };
    for (unique, ord, what) in rows.into_iter().flatten() {
        if ord == Ordering::Less {
            r.violations += 1;
        }
        if unique {
            r.unique_argmin += 1;
            r.unique_equal += (ord == Ordering::Equal) as usize;
        } else {
            r.ties += 1;
            r.tie_strict += (ord == Ordering::Greater) as usize;
        }
        let bad = ord == Ordering::Less || (unique && ord != Ordering::Equal);
        if bad && r.failures.len() < 10 {
            r.failures.push(what);
        }
    }
    r
}
