//! Landau–Ginzburg superpotentials on the mirror and their critical points.
//!
//! Critical points are common zeros of the logarithmic derivatives
//! `D_θW = Σ c_α ⟨α, θ⟩ y^α`. The solver works in three stages: candidate
//! leading valuations from balanced pairs of terms, leading coefficients from
//! the initial system over ℂ, and a Newton lift in truncated Λ arithmetic.

pub mod homotopy;
mod lattice;

use crate::fibration::{j_invert, BasePoint, Coord, F_map, FibrationError, PsiModel, VarietyPoint};
use crate::laurent::{LaurentError, LaurentPolynomial};
use crate::novikov::{NovikovElement, NovikovError, C, COEFF_TOL};
use crate::rational::{fmt_q, q, rank_int, solve_square, Q};
use crate::tropical::{classify_parts, ChamberTag, TropicalPolynomial};
use homotopy::{solve_torus_roots, ComplexSystem, HomotopyOptions};
use num_traits::{One, Signed};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LgError {
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("invalid compactification data: {0}")]
    InvalidSpec(String),
    #[error("cannot use the {0} chart here: {1}")]
    UnsupportedChart(Chart, String),
    #[error("leading Jacobian is singular at valuation {0}")]
    SingularJacobian(String),
    #[error("Newton lifting did not reach the target in {0} iterations")]
    NoConvergence(usize),
    #[error("more than {0} candidate valuations")]
    TooManyCandidates(usize),
    #[error("leading-coefficient system exceeds the homotopy path budget at valuation {0}")]
    PathBudget(String),
    #[error("coordinate {0} of the point is zero")]
    ZeroCoordinate(usize),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
    #[error(transparent)]
    Fibration(#[from] FibrationError),
}

/// Coordinates a superpotential is written in: one of the two torus charts,
/// or `(x₀, x₁, y₁, …, y_{n−1})` on `Y = {x₀x₁ = 1 + y₁ + ⋯ + y_{n−1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Chart {
    Plus,
    Minus,
    Y,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chart::Plus => "plus",
            Chart::Minus => "minus",
            Chart::Y => "Y",
        })
    }
}

/// The compactification `X̄ ⊃ X` that determines the superpotential.
#[derive(Debug, Clone, PartialEq)]
pub enum CompactificationSpec {
    /// No compactifying divisor: `W = x₁`.
    Affine { n: usize },
    /// `ℂℙⁿ`, with `e` the area of a line.
    CPn { n: usize, e: Q },
    /// `ℂℙᵐ × ℂℙⁿ⁻ᵐ` with line areas `e1` and `e2`.
    CPmxCPnm { n: usize, m: usize, e1: Q, e2: Q },
    /// A superpotential given directly in one chart.
    Custom { chart: Chart, w: LaurentPolynomial },
}

impl CompactificationSpec {
    pub fn dim(&self) -> usize {
        match self {
            CompactificationSpec::Affine { n } | CompactificationSpec::CPn { n, .. } => *n,
            CompactificationSpec::CPmxCPnm { n, .. } => *n,
            CompactificationSpec::Custom { chart: Chart::Y, w } => w.nvars().saturating_sub(1),
            CompactificationSpec::Custom { w, .. } => w.nvars(),
        }
    }

    pub fn validate(&self) -> Result<(), LgError> {
        let positive = |e: &Q, name: &str| {
            if e.is_positive() {
                Ok(())
            } else {
                Err(LgError::InvalidSpec(format!("{name} must be positive, got {}", fmt_q(e))))
            }
        };
        match self {
            CompactificationSpec::Affine { n } if *n == 0 => Err(LgError::InvalidSpec("n must be at least 1".into())),
            CompactificationSpec::Affine { .. } => Ok(()),
            CompactificationSpec::CPn { n, e } => {
                if *n == 0 {
                    return Err(LgError::InvalidSpec("n must be at least 1".into()));
                }
                positive(e, "E")
            }
            CompactificationSpec::CPmxCPnm { n, m, e1, e2 } => {
                if *m == 0 || m >= n {
                    return Err(LgError::InvalidSpec(format!("need 0 < m < n, got m={m}, n={n}")));
                }
                positive(e1, "E1")?;
                positive(e2, "E2")
            }
            CompactificationSpec::Custom { chart: Chart::Y, w } if w.nvars() < 2 => {
                Err(LgError::InvalidSpec("a Y-chart superpotential needs at least x0 and x1".into()))
            }
            CompactificationSpec::Custom { w, .. } if w.is_empty() => Err(LgError::InvalidSpec("empty superpotential".into())),
            CompactificationSpec::Custom { .. } => Ok(()),
        }
    }
}

fn unit_exp(nvars: usize, entries: &[(usize, i64)]) -> Vec<i64> {
    let mut e = vec![0; nvars];
    for &(i, k) in entries {
        e[i] += k;
    }
    e
}

/// `1 + y₁ + ⋯ + y_{n−1}` as a polynomial in `nvars ≥ n − 1` variables.
fn h_poly(n: usize, nvars: usize, precision: &Q) -> LaurentPolynomial {
    let mut h = LaurentPolynomial::constant(nvars, NovikovElement::one(precision.clone()));
    for k in 0..n - 1 {
        h = h.add(&LaurentPolynomial::variable(nvars, k, precision.clone()));
    }
    h
}

/// The standard `h(ȳ) = 1 + y₁ + ⋯ + y_{n−1}` in `n − 1` variables.
pub fn standard_h(n: usize, precision: &Q) -> LaurentPolynomial {
    h_poly(n, n - 1, precision)
}

/// Superpotential on `Y` in the variables `(x₀, x₁, y₁, …, y_{n−1})`.
pub fn y_superpotential(spec: &CompactificationSpec, precision: &Q) -> Result<LaurentPolynomial, LgError> {
    spec.validate()?;
    let n = spec.dim();
    let nv = n + 1;
    let t = |e: &Q| NovikovElement::t_pow(e.clone(), precision.clone());
    let x1 = LaurentPolynomial::variable(nv, 1, precision.clone());
    match spec {
        CompactificationSpec::Affine { .. } => Ok(x1),
        CompactificationSpec::CPn { e, .. } => {
            let ys: Vec<(usize, i64)> = (2..nv).map(|i| (i, -1)).collect();
            let mut ex = unit_exp(nv, &ys);
            ex[0] = n as i64;
            Ok(x1.add(&LaurentPolynomial::monomial(ex, t(e))))
        }
        CompactificationSpec::CPmxCPnm { m, e1, e2, .. } => {
            let m = *m;
            let first: Vec<(usize, i64)> = (0..m).map(|k| (2 + k, -1)).collect();
            let second: Vec<(usize, i64)> = (m..n - 1).map(|k| (2 + k, -1)).collect();
            let mut a = unit_exp(nv, &first);
            a[0] = m as i64;
            let mut b = unit_exp(nv, &second);
            b[0] = (n - m) as i64;
            Ok(x1
                .add(&LaurentPolynomial::monomial(a, t(e1)))
                .add(&LaurentPolynomial::monomial(b, t(e2))))
        }
        CompactificationSpec::Custom { chart: Chart::Y, w } => Ok(w.clone()),
        CompactificationSpec::Custom { chart, .. } => {
            Err(LgError::UnsupportedChart(*chart, "a torus-chart superpotential has no Y form here".into()))
        }
    }
}

/// Images of `(x₀, x₁, y₁, …)` under the embedding of a torus chart:
/// `g₊ = (1/y_n, y_n h, ȳ)` and `g₋ = (h/y_n, y_n, ȳ)`.
fn chart_images(chart: Chart, n: usize, precision: &Q) -> Result<Vec<LaurentPolynomial>, LgError> {
    let one = || NovikovElement::one(precision.clone());
    let yn = LaurentPolynomial::variable(n, n - 1, precision.clone());
    let yn_inv = LaurentPolynomial::monomial(unit_exp(n, &[(n - 1, -1)]), one());
    let h = h_poly(n, n, precision);
    let (x0, x1) = match chart {
        Chart::Plus => (yn_inv, yn.mul(&h)),
        Chart::Minus => (h.mul(&yn_inv), yn),
        Chart::Y => return Err(LgError::UnsupportedChart(chart, "not a torus chart".into())),
    };
    let mut images = vec![x0, x1];
    images.extend((0..n - 1).map(|k| LaurentPolynomial::variable(n, k, precision.clone())));
    Ok(images)
}

/// The closed-form superpotential of `spec` in `chart`.
pub fn build_superpotential(spec: &CompactificationSpec, chart: Chart, precision: &Q) -> Result<LaurentPolynomial, LgError> {
    spec.validate()?;
    let n = spec.dim();
    if let CompactificationSpec::Custom { chart: given, w } = spec {
        if *given == chart {
            return Ok(w.clone());
        }
        match (*given, chart) {
            (Chart::Y, _) => {}
            (Chart::Minus, Chart::Plus) => {
                // W₊ = W₋ ∘ Φ with Φ(ȳ, y_n) = (ȳ, y_n h(ȳ))
                let mut images: Vec<LaurentPolynomial> =
                    (0..n).map(|k| LaurentPolynomial::variable(n, k, precision.clone())).collect();
                images[n - 1] = images[n - 1].mul(&h_poly(n, n, precision));
                return w
                    .substitute(&images, n)
                    .map_err(|e| LgError::UnsupportedChart(chart, format!("transport through the gluing map failed: {e}")));
            }
            _ => {
                return Err(LgError::UnsupportedChart(
                    chart,
                    format!("cannot transport a {given}-chart superpotential"),
                ))
            }
        }
    }
    let wy = y_superpotential(spec, precision)?;
    if chart == Chart::Y {
        return Ok(wy);
    }
    let images = chart_images(chart, n, precision)?;
    wy.substitute(&images, n)
        .map_err(|e| LgError::UnsupportedChart(chart, format!("pullback is not a Laurent polynomial: {e}")))
}

/// Whether `W₋ ∘ Φ = W₊` for the gluing `Φ(ȳ, y_n) = (ȳ, y_n h(ȳ))`. Both
/// sides are multiplied by `h^N` to clear the negative powers of `y_n h`.
pub fn wall_crossing_check(w_plus: &LaurentPolynomial, w_minus: &LaurentPolynomial, h: &LaurentPolynomial) -> Result<bool, LgError> {
    let n = w_plus.nvars();
    if w_minus.nvars() != n || h.nvars() + 1 != n {
        return Ok(false);
    }
    let precision = w_plus
        .terms()
        .chain(w_minus.terms())
        .map(|(_, c)| c.precision())
        .min()
        .unwrap_or_else(crate::novikov::default_precision);
    let hn = lift_h(h, n);
    let big_n = w_minus.terms().map(|(e, _)| -e[n - 1]).max().unwrap_or(0).max(0);
    let mut lhs = LaurentPolynomial::zero(n);
    for (e, c) in w_minus.terms() {
        let k = e[n - 1] + big_n;
        let term = LaurentPolynomial::monomial(e.clone(), c.clone()).mul(&hn.pow(k as u32, &precision));
        lhs = lhs.add(&term);
    }
    let rhs = w_plus.mul(&hn.pow(big_n as u32, &precision));
    Ok(lhs.approx_eq(&rhs, COEFF_TOL))
}

fn lift_h(h: &LaurentPolynomial, n: usize) -> LaurentPolynomial {
    let mut out = LaurentPolynomial::zero(n);
    for (e, c) in h.terms() {
        let mut f = e.clone();
        f.push(0);
        out.add_term(f, c.clone());
    }
    out
}

/// Closed-form eigenvalues of quantum multiplication by `c₁`.
pub fn c1_eigenvalues(spec: &CompactificationSpec, precision: &Q) -> Result<Vec<NovikovElement>, LgError> {
    spec.validate()?;
    let roots = |k: usize, e: &Q| -> Vec<NovikovElement> {
        (0..k)
            .map(|s| {
                let z = C::from_polar(k as f64, 2.0 * std::f64::consts::PI * s as f64 / k as f64);
                NovikovElement::monomial(z, e / Q::from_integer((k as i64).into()), precision.clone())
            })
            .collect()
    };
    match spec {
        CompactificationSpec::CPn { n, e } => Ok(roots(n + 1, e)),
        CompactificationSpec::CPmxCPnm { n, m, e1, e2 } => {
            let a = roots(m + 1, e1);
            let b = roots(n - m + 1, e2);
            Ok(a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect())
        }
        other => Err(LgError::UnsupportedFamily(format!("no closed-form eigenvalues for {other:?}"))),
    }
}

/// Whether two multisets of Novikov elements agree termwise within `tol`.
pub fn same_multiset(a: &[NovikovElement], b: &[NovikovElement], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|x| {
        let hit = (0..b.len()).find(|&j| !used[j] && x.approx_eq(&b[j], tol));
        hit.map(|j| used[j] = true).is_some()
    })
}

fn ser_q<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(v))
}

fn ser_opt_q<S: Serializer>(v: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&fmt_q(v)),
        None => s.serialize_none(),
    }
}

fn ser_qs<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(fmt_q))
}

/// One Newton iterate. `excess` is `min_i (val F_i − ℓ_i)` over the
/// equations with tropical levels `ℓ_i`; `vanishes` marks a residual that
/// is zero to working precision, in which case `excess` is only a lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStep {
    #[serde(serialize_with = "ser_q")]
    pub residual_val: Q,
    #[serde(serialize_with = "ser_opt_q")]
    pub excess: Option<Q>,
    pub vanishes: bool,
    #[serde(serialize_with = "ser_q")]
    pub working_precision: Q,
}

/// Whether the excess at least doubles between consecutive iterates until
/// the residual is zero to precision.
pub fn excess_doubles(history: &[NewtonStep]) -> bool {
    history.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.vanishes || b.vanishes {
            return true;
        }
        match (&a.excess, &b.excess) {
            (Some(ea), Some(eb)) => *eb >= ea * q(2) && *eb > *ea,
            _ => true,
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub chart: Chart,
    pub coordinates: Vec<NovikovElement>,
    pub value: NovikovElement,
    /// `min_k val D_{e_k}W` at the point.
    #[serde(serialize_with = "ser_q")]
    pub residual_val: Q,
    #[serde(serialize_with = "ser_qs")]
    pub leading_valuation: Vec<Q>,
    pub history: Vec<NewtonStep>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub precision: Q,
    pub max_candidates: usize,
    pub max_iterations: usize,
    pub dedup_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            precision: crate::novikov::default_precision(),
            max_candidates: 10_000,
            max_iterations: 40,
            dedup_tol: 1e-6,
        }
    }
}

/// A term of `W` with its coefficient's valuation and leading coefficient.
#[derive(Debug, Clone)]
struct Term {
    e: Vec<i64>,
    val: Q,
    lc: C,
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn level_at(t: &Term, v: &[Q]) -> Q {
    &t.val + crate::rational::dot_int(&t.e, v)
}

fn tropical_terms(w: &LaurentPolynomial) -> Vec<Term> {
    w.terms()
        .filter_map(|(e, c)| c.leading().map(|(val, lc)| Term { e: e.clone(), val, lc }))
        .collect()
}

/// Valuations `v` at which `n` independent pairs of terms balance.
fn candidate_valuations(terms: &[Term], n: usize, max: usize) -> Result<Vec<Vec<Q>>, LgError> {
    let live: Vec<&Term> = terms.iter().filter(|t| t.e.iter().any(|&k| k != 0)).collect();
    let mut planes: BTreeSet<(Vec<i64>, Q)> = BTreeSet::new();
    for (i, a) in live.iter().enumerate() {
        for b in &live[i + 1..] {
            let mut normal: Vec<i64> = a.e.iter().zip(&b.e).map(|(x, y)| x - y).collect();
            let mut rhs = &b.val - &a.val;
            let g = normal.iter().fold(0i64, |g, &x| num_integer::gcd(g, x));
            let lead = normal.iter().find(|&&x| x != 0).copied().unwrap_or(1);
            let g = if lead < 0 { -g } else { g };
            normal.iter_mut().for_each(|x| *x /= g);
            rhs /= Q::from_integer(g.into());
            planes.insert((normal, rhs));
        }
    }
    let planes: Vec<(Vec<i64>, Q)> = planes.into_iter().collect();
    let mut found: BTreeSet<Vec<Q>> = BTreeSet::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    fn rec(
        planes: &[(Vec<i64>, Q)],
        n: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        found: &mut BTreeSet<Vec<Q>>,
        max: usize,
    ) -> Result<(), LgError> {
        if chosen.len() == n {
            let a: Vec<Vec<Q>> = chosen.iter().map(|&i| planes[i].0.iter().map(|&x| q(x)).collect()).collect();
            let b: Vec<Q> = chosen.iter().map(|&i| planes[i].1.clone()).collect();
            if let Some(v) = solve_square(&a, &b) {
                found.insert(v);
                if found.len() > max {
                    return Err(LgError::TooManyCandidates(max));
                }
            }
            return Ok(());
        }
        for i in start..planes.len() {
            chosen.push(i);
            let rows: Vec<Vec<i64>> = chosen.iter().map(|&j| planes[j].0.clone()).collect();
            if rank_int(&rows) == chosen.len() {
                rec(planes, n, i + 1, chosen, found, max)?;
            }
            chosen.pop();
        }
        Ok(())
    }
    rec(&planes, n, 0, &mut chosen, &mut found, max)?;
    Ok(found.into_iter().collect())
}

/// A lattice basis of directions adapted to the faces of `W` at `v`. Group
/// `g` collects the directions whose initial forms come from the face at
/// level `levels[g]`; later directions annihilate all earlier faces.
#[derive(Debug, Clone)]
struct Flag {
    directions: Vec<Vec<i64>>,
    /// `(level, first direction, number of directions, face term indices)`.
    groups: Vec<(Q, usize, usize, Vec<usize>)>,
}

fn adapted_flag(terms: &[Term], n: usize, v: &[Q]) -> Option<Flag> {
    let mut theta: Vec<Vec<i64>> = (0..n).map(|i| unit_exp(n, &[(i, 1)])).collect();
    let mut flag = Flag {
        directions: Vec::with_capacity(n),
        groups: Vec::new(),
    };
    while !theta.is_empty() {
        let pairing = |t: &Term| theta.iter().map(|d| dot(&t.e, d)).collect::<Vec<i64>>();
        let live: Vec<usize> = (0..terms.len()).filter(|&i| pairing(&terms[i]).iter().any(|&k| k != 0)).collect();
        let level = live.iter().map(|&i| level_at(&terms[i], v)).min()?;
        let face: Vec<usize> = live.into_iter().filter(|&i| level_at(&terms[i], v) == level).collect();
        if face.len() < 2 {
            return None;
        }
        let p: Vec<Vec<i64>> = face.iter().map(|&i| pairing(&terms[i])).collect();
        let (u, r) = lattice::column_reduce(&p, theta.len());
        let new: Vec<Vec<i64>> = (0..theta.len()).map(|j| lattice::mat_vec_t(&u, &theta, j)).collect();
        flag.groups.push((level, flag.directions.len(), r, face));
        flag.directions.extend(new[..r].iter().cloned());
        theta = new[r..].to_vec();
    }
    Some(flag)
}

fn initial_system(terms: &[Term], flag: &Flag) -> ComplexSystem {
    let mut sys = Vec::new();
    for (_, first, len, face) in &flag.groups {
        for d in &flag.directions[*first..first + len] {
            sys.push(
                face.iter()
                    .filter_map(|&i| {
                        let k = dot(&terms[i].e, d);
                        (k != 0).then(|| (terms[i].e.clone(), terms[i].lc * k as f64))
                    })
                    .collect(),
            );
        }
    }
    sys
}

/// `|det J₀|` relative to the product of its row norms, where `J₀` is the
/// log-Jacobian of the initial system at `c`.
fn leading_conditioning(terms: &[Term], flag: &Flag, c: &[C]) -> f64 {
    let n = c.len();
    let mut m = nalgebra::DMatrix::from_element(n, n, C::default());
    for (_, first, len, face) in &flag.groups {
        for (i, d) in flag.directions.iter().enumerate().skip(*first).take(*len) {
            for &t in face {
                let k = dot(&terms[t].e, d) as f64;
                let mono = terms[t].lc * homotopy::laurent_monomial(c, &terms[t].e);
                for j in 0..n {
                    m[(i, j)] += mono * k * terms[t].e[j] as f64;
                }
            }
        }
    }
    let rows: f64 = (0..n).map(|i| m.row(i).norm()).product();
    m.determinant().norm() / (1e-300 + rows)
}

fn valuation_label(v: &[Q]) -> String {
    format!("({})", v.iter().map(fmt_q).collect::<Vec<_>>().join(", "))
}

/// Solves `J δ = b` over Λ with rows pre-scaled by `T^{-ℓ_i}`, pivoting on
/// the smallest valuation and then the largest leading coefficient.
fn solve_lambda(
    mut a: Vec<Vec<NovikovElement>>,
    mut b: Vec<NovikovElement>,
    levels: &[Q],
) -> Result<Vec<NovikovElement>, LgError> {
    let n = b.len();
    for i in 0..n {
        let s = -&levels[i];
        a[i] = a[i].iter().map(|x| x.shift(&s)).collect();
        b[i] = b[i].shift(&s);
    }
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .min_by(|&r, &s| {
                let (vr, vs) = (a[r][col].val_exp(), a[s][col].val_exp());
                vr.cmp(&vs).then_with(|| {
                    a[s][col].leading_coeff().norm().total_cmp(&a[r][col].leading_coeff().norm())
                })
            })
            .ok_or_else(|| LgError::SingularJacobian("Newton system".into()))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].invert()?;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] * &inv;
            for k in col..n {
                let t = &f * &a[col][k];
                a[r][k] = &a[r][k] - &t;
            }
            let t = &f * &b[col];
            b[r] = &b[r] - &t;
        }
    }
    let mut x: Vec<NovikovElement> = vec![NovikovElement::zero(q(0)); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for k in r + 1..n {
            let t = &a[r][k] * &x[k];
            acc = &acc - &t;
        }
        x[r] = &acc * &a[r][r].invert()?;
    }
    Ok(x)
}

/// Newton iteration for `D_θ W = 0` (θ over `directions`) in logarithmic
/// coordinates, `y_k ← y_k (1 + δ_k)` with `J δ = −F` and
/// `J_{ik} = D_{e_k} D_{θ_i} W`. The equations' tropical levels are taken at
/// `val(start)`. Coefficients of `W` are treated as exact.
pub fn newton_lift(
    w: &LaurentPolynomial,
    directions: &[Vec<i64>],
    start: &[NovikovElement],
    target: &Q,
    max_iterations: usize,
) -> Result<(Vec<NovikovElement>, Vec<NewtonStep>), LgError> {
    let n = w.nvars();
    if start.len() != n || directions.len() != n {
        return Err(LgError::InvalidSpec(format!("expected {n} coordinates and directions")));
    }
    if let Some(i) = start.iter().position(NovikovElement::is_zero) {
        return Err(LgError::ZeroCoordinate(i));
    }
    let v: Vec<Q> = start.iter().map(|y| y.val_or_precision()).collect();
    let fs: Vec<LaurentPolynomial> = directions.iter().map(|d| w.log_derivative(d)).collect();
    let js: Vec<Vec<LaurentPolynomial>> = fs
        .iter()
        .map(|f| (0..n).map(|k| f.log_derivative(&unit_exp(n, &[(k, 1)]))).collect())
        .collect();
    let levels: Vec<Q> = fs
        .iter()
        .map(|f| tropical_terms(f).iter().map(|t| level_at(t, &v)).min())
        .collect::<Option<Vec<Q>>>()
        .ok_or_else(|| LgError::SingularJacobian(valuation_label(&v)))?;
    let mut pw = target + Q::one();
    let mut y: Vec<NovikovElement> = start.to_vec();
    let mut history = Vec::new();
    for _ in 0..=max_iterations {
        let coeff_prec = &pw * q(2) + q(10);
        y = y.iter().map(|e| e.with_precision(pw.clone())).collect();
        let vals: Vec<NovikovElement> = fs
            .iter()
            .map(|f| f.with_precision(&coeff_prec).eval(&y))
            .collect::<Result<_, _>>()?;
        let residual = vals.iter().map(|f| f.val_or_precision()).min().expect("n >= 1");
        let excess = vals.iter().zip(&levels).map(|(f, l)| f.val_or_precision() - l).min();
        let vanishes = vals.iter().all(NovikovElement::is_zero);
        history.push(NewtonStep {
            residual_val: residual.clone(),
            excess,
            vanishes,
            working_precision: pw.clone(),
        });
        if residual >= *target {
            return Ok((y, history));
        }
        if vanishes {
            // zero to the working precision but not to the target
            pw += target - &residual + Q::one();
            continue;
        }
        let jac: Vec<Vec<NovikovElement>> = js
            .iter()
            .map(|row| row.iter().map(|p| p.with_precision(&coeff_prec).eval(&y)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        let rhs: Vec<NovikovElement> = vals.iter().map(|f| -f).collect();
        let delta = solve_lambda(jac, rhs, &levels)?;
        y = y.iter().zip(&delta).map(|(yk, dk)| yk + &(yk * dk)).collect();
    }
    Err(LgError::NoConvergence(max_iterations))
}

fn arg_key(c: &C) -> f64 {
    let a = c.arg();
    let a = if a < -1e-12 { a + 2.0 * std::f64::consts::PI } else { a.max(0.0) };
    (a * 1e9).round() / 1e9
}

/// All critical points of a torus-chart superpotential whose initial
/// systems are nondegenerate, lifted until `val D_θW ≥ precision`.
pub fn solve_critical_points(w: &LaurentPolynomial, chart: Chart, opts: &SolverOptions) -> Result<Vec<CriticalPoint>, LgError> {
    if chart == Chart::Y {
        return Err(LgError::UnsupportedChart(chart, "solve in a torus chart and map with to_y_point".into()));
    }
    let n = w.nvars();
    if n == 0 || w.is_empty() {
        return Ok(Vec::new());
    }
    let terms = tropical_terms(w);
    let mut points: Vec<CriticalPoint> = Vec::new();
    for v in candidate_valuations(&terms, n, opts.max_candidates)? {
        let Some(flag) = adapted_flag(&terms, n, &v) else {
            continue;
        };
        let system = initial_system(&terms, &flag);
        let hopts = HomotopyOptions {
            dedup_tol: opts.dedup_tol,
            ..HomotopyOptions::default()
        };
        let roots = solve_torus_roots(&system, n, hopts).ok_or_else(|| LgError::PathBudget(valuation_label(&v)))?;
        for c in roots {
            if leading_conditioning(&terms, &flag, &c) < 1e-9 {
                return Err(LgError::SingularJacobian(valuation_label(&v)));
            }
            let start: Vec<NovikovElement> = c
                .iter()
                .zip(&v)
                .map(|(ck, vk)| NovikovElement::monomial(*ck, vk.clone(), &opts.precision + q(1)))
                .collect();
            let (y, history) = newton_lift(w, &flag.directions, &start, &opts.precision, opts.max_iterations)?;
            let exact_w = w.with_precision(&(&opts.precision * q(2) + q(10)));
            let value = exact_w.eval(&y)?;
            let residual_val = (0..n)
                .map(|k| exact_w.log_derivative(&unit_exp(n, &[(k, 1)])).eval(&y).map(|r| r.val_or_precision()))
                .collect::<Result<Vec<Q>, _>>()?
                .into_iter()
                .min()
                .expect("n >= 1");
            let duplicate = points.iter().any(|p| {
                p.leading_valuation == v
                    && p.coordinates
                        .iter()
                        .zip(&y)
                        .all(|(a, b)| (a.leading_coeff() - b.leading_coeff()).norm() <= opts.dedup_tol * (1.0 + a.leading_coeff().norm()))
            });
            if !duplicate {
                points.push(CriticalPoint {
                    chart,
                    coordinates: y,
                    value,
                    residual_val,
                    leading_valuation: v.clone(),
                    history,
                });
            }
        }
    }
    points.sort_by(|a, b| {
        a.leading_valuation.cmp(&b.leading_valuation).then_with(|| {
            let ka: Vec<f64> = a.coordinates.iter().rev().map(|c| arg_key(&c.leading_coeff())).collect();
            let kb: Vec<f64> = b.coordinates.iter().rev().map(|c| arg_key(&c.leading_coeff())).collect();
            ka.partial_cmp(&kb).unwrap_or(Ordering::Equal)
        })
    });
    Ok(points)
}

/// The image `g(y) = (x₀, x₁, ȳ)` of a torus-chart critical point on `Y`.
pub fn to_y_point(p: &CriticalPoint) -> Result<VarietyPoint, LgError> {
    let n = p.coordinates.len();
    let prec = p.coordinates.iter().map(|c| c.precision()).min().expect("nonempty point");
    let ybar = p.coordinates[..n - 1].to_vec();
    let yn = &p.coordinates[n - 1];
    let h = standard_h(n, &prec).eval(&ybar)?;
    let (x0, x1) = match p.chart {
        Chart::Plus => (yn.invert()?, yn * &h),
        Chart::Minus => (&h * &yn.invert()?, yn.clone()),
        Chart::Y => return Err(LgError::UnsupportedChart(Chart::Y, "already on Y".into())),
    };
    Ok(VarietyPoint { x0, x1, y: ybar })
}

/// Base point of a critical point's dual fiber and its chamber.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalBase {
    pub base: BasePoint,
    pub chamber: ChamberTag,
}

/// `q̂ = j⁻¹(F(z))` for points `z` on `Y`. Goes through the broken-line
/// image so points with `x₁ = 0` (on the discriminant) are handled.
pub fn critical_base_points(
    points: &[VarietyPoint],
    model: &dyn PsiModel,
    h: &LaurentPolynomial,
    h_trop: &TropicalPolynomial,
) -> Result<Vec<CriticalBase>, LgError> {
    points
        .iter()
        .map(|z| {
            let image = F_map(z, model, h, h_trop)?;
            let base = j_invert(&image, model, h_trop)?;
            let chamber = classify_parts(h_trop, &base.qbar, base.qn.cmp_tol(&Coord::zero()));
            Ok(CriticalBase { base, chamber })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::ExactPL;
    use crate::rational::qr;

    fn p() -> Q {
        q(20)
    }

    fn cpn(n: usize) -> CompactificationSpec {
        CompactificationSpec::CPn { n, e: q(1) }
    }

    fn toy() -> LaurentPolynomial {
        LaurentPolynomial::from_terms(
            1,
            vec![(vec![1], NovikovElement::one(p())), (vec![-1], NovikovElement::t_pow(q(1), p()))],
        )
        .unwrap()
    }

    #[test]
    fn log_derivative_examples() {
        let y1 = LaurentPolynomial::variable(2, 0, p());
        assert_eq!(y1.log_derivative(&[1, 0]), y1);
        let c = LaurentPolynomial::constant(2, NovikovElement::one(p()));
        assert!(c.log_derivative(&[1, 0]).is_empty());
        let w = build_superpotential(&cpn(2), Chart::Plus, &p()).unwrap();
        assert!(w.log_derivative(&[0, 0]).is_empty());
    }

    #[test]
    fn superpotential_closed_forms() {
        let s = |w: &LaurentPolynomial| w.to_string();
        let plus = build_superpotential(&CompactificationSpec::Affine { n: 3 }, Chart::Plus, &p()).unwrap();
        let expect = LaurentPolynomial::from_terms(
            3,
            vec![
                (vec![0, 0, 1], NovikovElement::one(p())),
                (vec![1, 0, 1], NovikovElement::one(p())),
                (vec![0, 1, 1], NovikovElement::one(p())),
            ],
        )
        .unwrap();
        assert!(plus.approx_eq(&expect, 1e-12), "{}", s(&plus));
        let minus = build_superpotential(&CompactificationSpec::Affine { n: 3 }, Chart::Minus, &p()).unwrap();
        assert!(minus.approx_eq(&LaurentPolynomial::variable(3, 2, p()), 1e-12));

        // CP^2 on Y: x1 + T x0^2 / y1
        let wy = build_superpotential(&cpn(2), Chart::Y, &p()).unwrap();
        assert_eq!(wy.len(), 2);
        assert!(wy.coeff(&[2, 0, -1]).unwrap().approx_eq(&NovikovElement::t_pow(q(1), p()), 1e-12));

        // CP^1 x CP^1: x1 + T^E1 x0 / y + T^E2 x0
        let spec = CompactificationSpec::CPmxCPnm { n: 2, m: 1, e1: q(1), e2: qr(3, 2) };
        let wy = build_superpotential(&spec, Chart::Y, &p()).unwrap();
        assert!(wy.coeff(&[1, 0, -1]).unwrap().approx_eq(&NovikovElement::t_pow(q(1), p()), 1e-12));
        assert!(wy.coeff(&[1, 0, 0]).unwrap().approx_eq(&NovikovElement::t_pow(qr(3, 2), p()), 1e-12));

        // CP^2 Minus chart: y2 + T (1 + y1)^2 / (y1 y2^2)
        let wm = build_superpotential(&cpn(2), Chart::Minus, &p()).unwrap();
        assert_eq!(wm.len(), 4);
        assert!(wm.coeff(&[0, -2]).unwrap().approx_eq(&NovikovElement::t_pow(q(1), p()).scale(C::new(2.0, 0.0)), 1e-12));
    }

    #[test]
    fn wall_crossing_holds_for_families() {
        let specs = vec![
            CompactificationSpec::Affine { n: 2 },
            cpn(2),
            cpn(3),
            CompactificationSpec::CPmxCPnm { n: 3, m: 1, e1: q(1), e2: qr(1, 2) },
        ];
        for spec in specs {
            let n = spec.dim();
            let wp = build_superpotential(&spec, Chart::Plus, &p()).unwrap();
            let wm = build_superpotential(&spec, Chart::Minus, &p()).unwrap();
            assert!(wall_crossing_check(&wp, &wm, &standard_h(n, &p())).unwrap(), "{spec:?}");
            let bumped = wm.add(&LaurentPolynomial::constant(n, NovikovElement::t_pow(q(1), p())));
            assert!(!wall_crossing_check(&wp, &bumped, &standard_h(n, &p())).unwrap());
        }
    }

    #[test]
    fn minus_to_plus_transport() {
        let wm = build_superpotential(&cpn(2), Chart::Minus, &p()).unwrap();
        let spec = CompactificationSpec::Custom { chart: Chart::Minus, w: wm };
        // negative powers of y_n h are not Laurent
        assert!(matches!(build_superpotential(&spec, Chart::Plus, &p()), Err(LgError::UnsupportedChart(..))));
        let aff = build_superpotential(&CompactificationSpec::Affine { n: 2 }, Chart::Minus, &p()).unwrap();
        let spec = CompactificationSpec::Custom { chart: Chart::Minus, w: aff };
        let wp = build_superpotential(&spec, Chart::Plus, &p()).unwrap();
        assert!(wp.approx_eq(&build_superpotential(&CompactificationSpec::Affine { n: 2 }, Chart::Plus, &p()).unwrap(), 1e-12));
    }

    #[test]
    fn eigenvalue_closed_forms() {
        let ev = c1_eigenvalues(&cpn(2), &p()).unwrap();
        assert_eq!(ev.len(), 3);
        for e in &ev {
            let (v, c) = e.leading().unwrap();
            assert_eq!(v, qr(1, 3));
            assert!((c.norm() - 3.0).abs() < 1e-12);
        }
        let ev = c1_eigenvalues(&cpn(1), &p()).unwrap();
        let want = vec![
            NovikovElement::monomial(C::new(2.0, 0.0), qr(1, 2), p()),
            NovikovElement::monomial(C::new(-2.0, 0.0), qr(1, 2), p()),
        ];
        assert!(same_multiset(&ev, &want, 1e-12));
        let spec = CompactificationSpec::CPmxCPnm { n: 2, m: 1, e1: q(1), e2: q(1) };
        let ev = c1_eigenvalues(&spec, &p()).unwrap();
        assert_eq!(ev.iter().filter(|e| e.is_zero()).count(), 2);
        assert!(matches!(
            c1_eigenvalues(&CompactificationSpec::Affine { n: 2 }, &p()),
            Err(LgError::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(CompactificationSpec::CPn { n: 2, e: q(0) }.validate().is_err());
        assert!(CompactificationSpec::CPmxCPnm { n: 2, m: 2, e1: q(1), e2: q(1) }.validate().is_err());
    }

    #[test]
    fn toy_critical_points() {
        let pts = solve_critical_points(&toy(), Chart::Plus, &SolverOptions::default()).unwrap();
        assert_eq!(pts.len(), 2);
        for pt in &pts {
            assert_eq!(pt.leading_valuation, vec![qr(1, 2)]);
            assert!(pt.residual_val >= q(20));
            let (v, c) = pt.value.leading().unwrap();
            assert_eq!(v, qr(1, 2));
            assert!((c.norm() - 2.0).abs() < 1e-9);
        }
        // independent oracle: substitute ±T^{1/2}
        for s in [1.0, -1.0] {
            // division by y costs 1/2 of precision, so evaluate at 22
            let y = NovikovElement::monomial(C::new(s, 0.0), qr(1, 2), q(22));
            let r = toy().with_precision(&q(22)).log_derivative(&[1]).eval(&[y]).unwrap();
            assert!(r.val_or_precision() >= q(20));
        }
    }

    #[test]
    fn newton_from_perturbed_start_doubles() {
        let start = NovikovElement::from_terms(vec![(qr(1, 2), C::new(1.0, 0.0)), (qr(3, 4), C::new(1.0, 0.0))], q(21));
        let (y, hist) = newton_lift(&toy(), &[vec![1]], &[start], &q(20), 40).unwrap();
        assert!(hist.len() >= 4, "{hist:?}");
        assert!(excess_doubles(&hist), "{hist:?}");
        assert_eq!(hist[0].excess, Some(qr(1, 4)));
        // converges to T^{1/2}
        assert!(y[0].approx_eq(&NovikovElement::t_pow(qr(1, 2), q(20)), 1e-9));
    }

    #[test]
    fn nontrivial_tail_is_resolved() {
        // W = y + T/y + T^2 y^2 has critical points with corrections above T^{1/2}
        let w = toy().add(&LaurentPolynomial::monomial(vec![2], NovikovElement::t_pow(q(2), p())));
        let pts = solve_critical_points(&w, Chart::Plus, &SolverOptions::default()).unwrap();
        let near: Vec<_> = pts.iter().filter(|p| p.leading_valuation == vec![qr(1, 2)]).collect();
        assert_eq!(near.len(), 2);
        for pt in near {
            assert!(pt.coordinates[0].num_terms() > 1);
            let y: Vec<NovikovElement> = pt.coordinates.iter().map(|c| c.with_precision(q(22))).collect();
            let r = w.with_precision(&q(22)).log_derivative(&[1]).eval(&y).unwrap();
            assert!(r.val_or_precision() >= q(20));
        }
    }

    #[test]
    fn cp2_both_charts() {
        let opts = SolverOptions::default();
        let ev = c1_eigenvalues(&cpn(2), &p()).unwrap();
        for chart in [Chart::Plus, Chart::Minus] {
            let w = build_superpotential(&cpn(2), chart, &p()).unwrap();
            let pts = solve_critical_points(&w, chart, &opts).unwrap();
            assert_eq!(pts.len(), 3, "{chart}");
            let vals: Vec<NovikovElement> = pts.iter().map(|p| p.value.clone()).collect();
            assert!(same_multiset(&vals, &ev, 1e-9), "{chart}: {vals:?}");
            let lead = if chart == Chart::Plus { 1.0 } else { 2.0 };
            for pt in &pts {
                assert_eq!(pt.leading_valuation, vec![q(0), qr(1, 3)]);
                assert!((pt.coordinates[1].leading_coeff().norm() - lead).abs() < 1e-9);
                let z = to_y_point(pt).unwrap();
                assert_eq!(z.x0.val().finite().cloned(), Some(qr(-1, 3)));
            }
        }
    }

    #[test]
    fn product_case_needs_flag() {
        let spec = CompactificationSpec::CPmxCPnm { n: 2, m: 1, e1: q(1), e2: qr(3, 2) };
        let w = build_superpotential(&spec, Chart::Plus, &p()).unwrap();
        let pts = solve_critical_points(&w, Chart::Plus, &SolverOptions::default()).unwrap();
        assert_eq!(pts.len(), 4);
        let zs: Vec<VarietyPoint> = pts.iter().map(|p| to_y_point(p).unwrap()).collect();
        let h_trop = TropicalPolynomial::standard(1);
        let bases = critical_base_points(&zs, &ExactPL::default(), &standard_h(2, &p()), &h_trop).unwrap();
        for (z, b) in zs.iter().zip(&bases) {
            assert_eq!(z.x0.val().finite().cloned(), Some(qr(-3, 4)));
            assert_eq!(z.y[0].val().finite().cloned(), Some(qr(-1, 4)));
            assert_eq!(b.base.qbar, vec![qr(-1, 4)]);
        }
    }

    #[test]
    fn cpn_base_point() {
        let w = build_superpotential(&cpn(2), Chart::Plus, &p()).unwrap();
        let pts = solve_critical_points(&w, Chart::Plus, &SolverOptions::default()).unwrap();
        let zs: Vec<VarietyPoint> = pts.iter().map(|p| to_y_point(p).unwrap()).collect();
        let bases = critical_base_points(&zs, &ExactPL::default(), &standard_h(2, &p()), &TropicalPolynomial::standard(1)).unwrap();
        for b in bases {
            assert_eq!(b.base.qbar, vec![q(0)]);
            assert_eq!(b.base.qn, Coord::Exact(q(-2)));
            assert_eq!(b.chamber, ChamberTag::Minus);
        }
    }
}
