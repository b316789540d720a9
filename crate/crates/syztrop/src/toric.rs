//! Toric Calabi-Yau data `(Σ, λ)`: validation, the mirror polynomial `h`
//! and its tropicalization, compact divisors, and the reconstruction of the
//! fan and moment polytope from `h`.
//!
//! Canonical ray order: the distinguished cone `v₁ … v_n` first (so `v_n`
//! carries the constant term of `h`), then the remaining rays in input
//! order. All indices in this module are 0-based canonical indices unless
//! stated otherwise; [`ValidatedToric::original_index`] maps back.

use crate::laurent::{LaurentError, LaurentPolynomial};
use crate::novikov::{NovikovElement, C};
use crate::rational::{det, fmt_q, parse_q, q, solve_square, Q};
use crate::tropical::{tropicalize, TropTerm, TropicalError, TropicalPolynomial};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToricError {
    #[error("distinguished cone is not a Z-basis (determinant {0})")]
    NotSmooth(String),
    #[error("ray {ray} pairs to {pairing} with m0, expected 1")]
    NotCalabiYau { ray: usize, pairing: String },
    #[error("delta for ray {0} must have positive valuation")]
    BadDelta(usize),
    #[error("compact divisors {0:?} need user-supplied deltas")]
    CompactDivisorWithoutDelta(Vec<usize>),
    #[error("nonzero delta on non-compact divisor {0}")]
    DeltaOnNoncompact(usize),
    #[error("invalid toric data: {0}")]
    Invalid(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("extra-ray index {0} out of range")]
    IndexOutOfRange(usize),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
}

/// Raw toric data, indices as supplied by the user (0-based).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToricCYData {
    pub rays: Vec<Vec<i64>>,
    pub basis_cone: Vec<usize>,
    pub lambdas: Vec<Q>,
    pub deltas: BTreeMap<usize, NovikovElement>,
    pub energies: BTreeMap<String, Q>,
}

#[derive(Serialize, Deserialize)]
struct ToricJson {
    rays: Vec<Vec<i64>>,
    basis_cone: Vec<usize>,
    lambdas: Vec<Value>,
    #[serde(default)]
    deltas: BTreeMap<String, String>,
    #[serde(default)]
    energies: BTreeMap<String, Value>,
}

fn value_to_q(v: &Value) -> Result<Q, ToricError> {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(ToricError::Invalid(format!("expected rational, got {other}"))),
    };
    parse_q(&s).map_err(|e| ToricError::Invalid(e.to_string()))
}

impl ToricCYData {
    pub fn from_json_str(s: &str, precision: Q) -> Result<Self, ToricError> {
        let j: ToricJson = serde_json::from_str(s).map_err(|e| ToricError::Invalid(e.to_string()))?;
        let lambdas = j.lambdas.iter().map(value_to_q).collect::<Result<Vec<_>, _>>()?;
        let mut deltas = BTreeMap::new();
        for (k, v) in &j.deltas {
            let idx: usize = k
                .parse()
                .map_err(|_| ToricError::Invalid(format!("bad delta key `{k}`")))?;
            let d = NovikovElement::parse(v, precision.clone())
                .map_err(|e| ToricError::Invalid(e.to_string()))?;
            deltas.insert(idx, d);
        }
        let mut energies = BTreeMap::new();
        for (k, v) in &j.energies {
            energies.insert(k.clone(), value_to_q(v)?);
        }
        Ok(ToricCYData {
            rays: j.rays,
            basis_cone: j.basis_cone,
            lambdas,
            deltas,
            energies,
        })
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(ToricJson {
            rays: self.rays.clone(),
            basis_cone: self.basis_cone.clone(),
            lambdas: self.lambdas.iter().map(|l| Value::String(fmt_q(l))).collect(),
            deltas: self
                .deltas
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_literal()))
                .collect(),
            energies: self
                .energies
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(fmt_q(v))))
                .collect(),
        })
        .expect("serializable")
    }

    /// `ℂⁿ`: standard basis, no extra rays, `λ = 0`.
    pub fn affine_space(n: usize) -> Self {
        let rays = (0..n)
            .map(|i| {
                let mut v = vec![0; n];
                v[i] = 1;
                v
            })
            .collect();
        ToricCYData {
            rays,
            basis_cone: (0..n).collect(),
            lambdas: vec![Q::zero(); n],
            ..Default::default()
        }
    }

    /// Resolved conifold with `v₄ = v₁ − v₂ + v₃` and `λ = (0,0,0,λ)`.
    pub fn conifold(lambda: Q) -> Self {
        ToricCYData {
            rays: vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, -1, 1]],
            basis_cone: vec![0, 1, 2],
            lambdas: vec![Q::zero(), Q::zero(), Q::zero(), lambda],
            ..Default::default()
        }
    }

    /// Six-ray fan whose mirror polynomial is
    /// `y₁ + T⁻¹y₂ + T^{157/50} + T²y₁² + y₁y₂ + T²y₂²`.
    pub fn six_ray_fan() -> Self {
        ToricCYData {
            rays: vec![
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![2, 0, -1],
                vec![1, 1, -1],
                vec![0, 2, -1],
            ],
            basis_cone: vec![0, 1, 2],
            lambdas: vec![q(0), q(-1), Q::new(157.into(), 50.into()), q(2), q(0), q(2)],
            ..Default::default()
        }
    }

    /// Total space of `K_{ℙ²}`; the ray `(0,0,1)` spans the compact divisor.
    pub fn local_p2(lambda: Q) -> Self {
        ToricCYData {
            rays: vec![vec![1, 0, 1], vec![0, 1, 1], vec![-1, -1, 1], vec![0, 0, 1]],
            basis_cone: vec![0, 1, 3],
            lambdas: vec![q(0), q(0), q(0), lambda],
            ..Default::default()
        }
    }
}

/// `⟨m, v_i⟩ + λ_i ≥ 0` for each ray.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPolytope {
    pub inequalities: Vec<(Vec<i64>, Q)>,
}

impl MomentPolytope {
    pub fn contains(&self, m: &[Q]) -> bool {
        self.inequalities
            .iter()
            .all(|(v, l)| (crate::rational::dot_int(v, m) + l) >= Q::zero())
    }
}

/// `(q̄, q_n) ↦ (q̄ + q_n, q_n)`, identifying `{q_n + h_trop(q̄) ≥ 0}` with `P`.
pub fn shear(qpt: &[Q]) -> Vec<Q> {
    let qn = qpt.last().expect("nonempty").clone();
    let mut m: Vec<Q> = qpt[..qpt.len() - 1].iter().map(|x| x + &qn).collect();
    m.push(qn);
    m
}

pub fn unshear(m: &[Q]) -> Vec<Q> {
    let mn = m.last().expect("nonempty").clone();
    let mut qpt: Vec<Q> = m[..m.len() - 1].iter().map(|x| x - &mn).collect();
    qpt.push(mn);
    qpt
}

/// Whether a compact divisor without δ, or a δ on a non-compact divisor,
/// is tolerated by [`ValidatedToric::build_h_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DeltaPolicy {
    pub allow_missing_compact: bool,
    pub allow_noncompact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedToric {
    n: usize,
    rays: Vec<Vec<i64>>,
    lambdas: Vec<Q>,
    deltas: Vec<Option<NovikovElement>>,
    coords: Vec<Vec<i64>>,
    original: Vec<usize>,
    energies: BTreeMap<String, Q>,
}

/// Checks smoothness of the distinguished cone, the CY condition and the
/// deltas, and derives the coefficients `k_{aj}`.
pub fn validate(data: &ToricCYData) -> Result<ValidatedToric, ToricError> {
    let n = data.basis_cone.len();
    if n == 0 {
        return Err(ToricError::Invalid("empty distinguished cone".into()));
    }
    if data.rays.len() < n {
        return Err(ToricError::Invalid("fewer rays than the dimension".into()));
    }
    if data.lambdas.len() != data.rays.len() {
        return Err(ToricError::Invalid(format!(
            "{} lambdas for {} rays",
            data.lambdas.len(),
            data.rays.len()
        )));
    }
    for (i, r) in data.rays.iter().enumerate() {
        if r.len() != n {
            return Err(ToricError::Invalid(format!("ray {i} has dimension {}", r.len())));
        }
    }
    let distinct: BTreeSet<&Vec<i64>> = data.rays.iter().collect();
    if distinct.len() != data.rays.len() {
        return Err(ToricError::Invalid("repeated ray".into()));
    }
    let cone: BTreeSet<usize> = data.basis_cone.iter().copied().collect();
    if cone.len() != n || data.basis_cone.iter().any(|&i| i >= data.rays.len()) {
        return Err(ToricError::Invalid("bad distinguished cone indices".into()));
    }
    let mut original: Vec<usize> = data.basis_cone.clone();
    original.extend((0..data.rays.len()).filter(|i| !cone.contains(i)));

    // columns v_1..v_n
    let v: Vec<Vec<Q>> = (0..n)
        .map(|row| (0..n).map(|col| q(data.rays[data.basis_cone[col]][row])).collect())
        .collect();
    let d = det(&v);
    if d.abs() != Q::one() {
        return Err(ToricError::NotSmooth(fmt_q(&d)));
    }
    let mut coords = Vec::with_capacity(original.len());
    for &oi in &original {
        let w: Vec<Q> = data.rays[oi].iter().map(|&x| q(x)).collect();
        let c = solve_square(&v, &w).expect("unimodular");
        let ci: Vec<i64> = c
            .iter()
            .map(|x| x.to_integer().to_i64().expect("small integer coordinates"))
            .collect();
        let pairing: i64 = ci.iter().sum();
        if pairing != 1 {
            return Err(ToricError::NotCalabiYau {
                ray: oi,
                pairing: pairing.to_string(),
            });
        }
        coords.push(ci);
    }
    let mut deltas = vec![None; original.len()];
    for (&oi, dlt) in &data.deltas {
        let ci = original
            .iter()
            .position(|&x| x == oi)
            .ok_or_else(|| ToricError::Invalid(format!("delta for unknown ray {oi}")))?;
        if let Some(v) = dlt.val().finite() {
            if !v.is_positive() {
                return Err(ToricError::BadDelta(oi));
            }
            deltas[ci] = Some(dlt.clone());
        }
    }
    Ok(ValidatedToric {
        n,
        rays: original.iter().map(|&i| data.rays[i].clone()).collect(),
        lambdas: original.iter().map(|&i| data.lambdas[i].clone()).collect(),
        deltas,
        coords,
        original,
        energies: data.energies.clone(),
    })
}

impl ValidatedToric {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_rays(&self) -> usize {
        self.rays.len()
    }

    /// Rays in canonical order.
    pub fn rays(&self) -> &[Vec<i64>] {
        &self.rays
    }

    pub fn lambdas(&self) -> &[Q] {
        &self.lambdas
    }

    pub fn energies(&self) -> &BTreeMap<String, Q> {
        &self.energies
    }

    /// Input index of canonical ray `i`.
    pub fn original_index(&self, i: usize) -> usize {
        self.original[i]
    }

    /// Coordinates of ray `i` in the basis `v₁ … v_n`.
    pub fn basis_coords(&self, i: usize) -> &[i64] {
        &self.coords[i]
    }

    /// Rows `k_a` with `v_{n+a} = Σ_j k_{aj} v_j`.
    pub fn k(&self) -> Vec<Vec<i64>> {
        self.coords[self.n..].to_vec()
    }

    /// Exponent of `y` in the `h`-term of ray `i`.
    pub fn exponent(&self, i: usize) -> Vec<i64> {
        self.coords[i][..self.n - 1].to_vec()
    }

    /// Data in canonical order.
    pub fn to_data(&self) -> ToricCYData {
        ToricCYData {
            rays: self.rays.clone(),
            basis_cone: (0..self.n).collect(),
            lambdas: self.lambdas.clone(),
            deltas: self
                .deltas
                .iter()
                .enumerate()
                .filter_map(|(i, d)| d.clone().map(|d| (i, d)))
                .collect(),
            energies: self.energies.clone(),
        }
    }

    /// `min_i (λ_i + ⟨exponent_i, q̄⟩)` with terms in canonical ray order.
    pub fn build_h_trop(&self) -> TropicalPolynomial {
        let terms = (0..self.rays.len())
            .map(|i| TropTerm {
                c: self.lambdas[i].clone(),
                e: self.exponent(i),
            })
            .collect();
        TropicalPolynomial::new(self.n - 1, terms).expect("distinct rays give distinct exponents")
    }

    /// Canonical indices of rays spanning compact divisors.
    pub fn detect_compact_divisors(&self) -> BTreeSet<usize> {
        self.build_h_trop().bounded_cells()
    }

    /// `h` under the strict δ policy.
    pub fn build_h(&self, precision: &Q) -> Result<LaurentPolynomial, ToricError> {
        self.build_h_with(precision, DeltaPolicy::default())
    }

    /// `h = Σ_i T^{λ_i}(1 + δ_i) y^{exponent_i}`.
    pub fn build_h_with(&self, precision: &Q, policy: DeltaPolicy) -> Result<LaurentPolynomial, ToricError> {
        let compact = self.detect_compact_divisors();
        let missing: Vec<usize> = compact
            .iter()
            .filter(|&&i| self.deltas[i].is_none())
            .map(|&i| self.original[i])
            .collect();
        if !missing.is_empty() && !policy.allow_missing_compact {
            return Err(ToricError::CompactDivisorWithoutDelta(missing));
        }
        if !policy.allow_noncompact {
            if let Some(i) = (0..self.rays.len()).find(|i| self.deltas[*i].is_some() && !compact.contains(i)) {
                return Err(ToricError::DeltaOnNoncompact(self.original[i]));
            }
        }
        let mut terms = Vec::with_capacity(self.rays.len());
        for i in 0..self.rays.len() {
            let mut unit = NovikovElement::one(precision.clone());
            if let Some(d) = &self.deltas[i] {
                unit = &unit + &d.truncate(precision);
            }
            terms.push((self.exponent(i), unit.shift(&self.lambdas[i]).truncate(precision)));
        }
        Ok(LaurentPolynomial::from_distinct_terms(self.n - 1, terms)?)
    }

    /// `E(S_a) = λ_{n+a} − Σ_j k_{aj} λ_j` for `a = 1..r`.
    pub fn sphere_energy(&self, a: usize) -> Result<Q, ToricError> {
        if a == 0 || self.n + a > self.rays.len() {
            return Err(ToricError::IndexOutOfRange(a));
        }
        let i = self.n + a - 1;
        let mut e = self.lambdas[i].clone();
        for j in 0..self.n {
            e -= q(self.coords[i][j]) * &self.lambdas[j];
        }
        Ok(e)
    }

    pub fn moment_polytope(&self) -> MomentPolytope {
        MomentPolytope {
            inequalities: self
                .rays
                .iter()
                .cloned()
                .zip(self.lambdas.iter().cloned())
                .collect(),
        }
    }
}

/// Reconstructs rays, `λ`, δ and the moment polytope from `h`, which must
/// contain a constant term.
pub fn syz_converse(h: &LaurentPolynomial) -> Result<(ToricCYData, MomentPolytope), ToricError> {
    if h.len() < 2 {
        return Err(ToricError::DegenerateInput("h needs at least two terms".into()));
    }
    let m = h.nvars();
    let n = m + 1;
    if h.coeff(&vec![0; m]).is_none() {
        return Err(ToricError::DegenerateInput(
            "no constant term; use syz_converse_marked".into(),
        ));
    }
    let trop = tropicalize(h)?;
    let mut entries: Vec<(Vec<i64>, Q, Option<NovikovElement>)> = Vec::new();
    for ((e, c), t) in h.terms().zip(trop.terms()) {
        let lead = c.leading_coeff();
        if (lead - C::new(1.0, 0.0)).norm() > crate::novikov::COEFF_TOL {
            return Err(ToricError::Invalid(format!(
                "leading coefficient of term {e:?} is not 1"
            )));
        }
        let neg = -&t.c;
        let rel = c.shift(&neg);
        let delta = &rel - &NovikovElement::one(rel.precision().clone());
        let mut ray = e.clone();
        ray.push(1 - e.iter().sum::<i64>());
        entries.push((ray, t.c.clone(), if delta.is_zero() { None } else { Some(delta) }));
    }
    let unit = |s: usize| {
        let mut v = vec![0; n];
        v[s] = 1;
        v
    };
    let find = |v: &Vec<i64>| entries.iter().position(|(r, _, _)| r == v);
    let const_idx = find(&unit(m)).expect("constant term present");
    let mut basis: Vec<usize> = (0..m).filter_map(|s| find(&unit(s))).collect();
    if basis.len() != m {
        basis = unimodular_completion(&entries.iter().map(|t| t.0.clone()).collect::<Vec<_>>(), const_idx)
            .ok_or_else(|| ToricError::NotSmooth("no unimodular cone through the constant ray".into()))?;
    }
    basis.push(const_idx);
    let mut order = basis.clone();
    order.extend((0..entries.len()).filter(|i| !basis.contains(i)));
    let mut data = ToricCYData {
        basis_cone: (0..n).collect(),
        ..Default::default()
    };
    for (ci, &i) in order.iter().enumerate() {
        data.rays.push(entries[i].0.clone());
        data.lambdas.push(entries[i].1.clone());
        if let Some(d) = &entries[i].2 {
            data.deltas.insert(ci, d.clone());
        }
    }
    let poly = MomentPolytope {
        inequalities: data.rays.iter().cloned().zip(data.lambdas.iter().cloned()).collect(),
    };
    Ok((data, poly))
}

/// Variant for `h` without a constant term: divides by the monomial of the
/// marked term, which then plays the role of the constant.
pub fn syz_converse_marked(
    h: &LaurentPolynomial,
    marked: &[i64],
) -> Result<(ToricCYData, MomentPolytope), ToricError> {
    if h.coeff(marked).is_none() {
        return Err(ToricError::DegenerateInput(format!("no term with exponent {marked:?}")));
    }
    let shifted = LaurentPolynomial::from_terms(
        h.nvars(),
        h.terms()
            .map(|(e, c)| (e.iter().zip(marked).map(|(a, b)| a - b).collect(), c.clone())),
    )?;
    syz_converse(&shifted)
}

fn unimodular_completion(rays: &[Vec<i64>], fixed: usize) -> Option<Vec<usize>> {
    let n = rays[fixed].len();
    let others: Vec<usize> = (0..rays.len()).filter(|&i| i != fixed).collect();
    let mut chosen = Vec::new();
    fn rec(
        rays: &[Vec<i64>],
        others: &[usize],
        start: usize,
        need: usize,
        fixed: usize,
        chosen: &mut Vec<usize>,
    ) -> bool {
        if chosen.len() == need {
            let n = rays[fixed].len();
            let cols: Vec<usize> = chosen.iter().copied().chain([fixed]).collect();
            let m: Vec<Vec<Q>> = (0..n).map(|r| cols.iter().map(|&c| q(rays[c][r])).collect()).collect();
            return det(&m).abs() == Q::one();
        }
        for k in start..others.len() {
            chosen.push(others[k]);
            if rec(rays, others, k + 1, need, fixed, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    if rec(rays, &others, 0, n - 1, fixed, &mut chosen) {
        Some(chosen)
    } else {
        None
    }
}
