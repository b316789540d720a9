//! Laurent polynomials in several variables with Novikov coefficients.

use crate::novikov::{NovikovElement, NovikovError, C};
use crate::rational::Q;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaurentError {
    #[error("exponent vector {0:?} has {1} entries, expected {2}")]
    DimensionMismatch(Vec<i64>, usize, usize),
    #[error("duplicate exponent vector {0:?}")]
    DuplicateExponent(Vec<i64>),
    #[error("negative power of a non-monomial substitution for variable {0}")]
    NonMonomialInverse(usize),
    #[error("expected {expected} values, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Novikov(#[from] NovikovError),
    #[error("malformed polynomial JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPolynomial {
    nvars: usize,
    terms: BTreeMap<Vec<i64>, NovikovElement>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermJson {
    e: Vec<i64>,
    c: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolyJson {
    nvars: usize,
    terms: Vec<TermJson>,
}

impl LaurentPolynomial {
    pub fn zero(nvars: usize) -> Self {
        LaurentPolynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: NovikovElement) -> Self {
        Self::monomial(vec![0; nvars], c)
    }

    pub fn monomial(e: Vec<i64>, c: NovikovElement) -> Self {
        let mut p = Self::zero(e.len());
        p.add_term(e, c);
        p
    }

    /// The coordinate function `y_i`.
    pub fn variable(nvars: usize, i: usize, precision: Q) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, NovikovElement::one(precision))
    }

    /// Builds a polynomial, merging repeated exponents by addition.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Vec<i64>, NovikovElement)>,
    ) -> Result<Self, LaurentError> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(LaurentError::DimensionMismatch(e.clone(), e.len(), nvars));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    /// Builds a polynomial and rejects repeated exponents.
    pub fn from_distinct_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Vec<i64>, NovikovElement)>,
    ) -> Result<Self, LaurentError> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(LaurentError::DimensionMismatch(e.clone(), e.len(), nvars));
            }
            if p.terms.contains_key(&e) {
                return Err(LaurentError::DuplicateExponent(e));
            }
            if !c.is_zero() {
                p.terms.insert(e, c);
            }
        }
        Ok(p)
    }

    pub fn add_term(&mut self, e: Vec<i64>, c: NovikovElement) {
        debug_assert_eq!(e.len(), self.nvars);
        if let Some(old) = self.terms.get(&e) {
            let s = old + &c;
            if s.is_zero() {
                self.terms.remove(&e);
            } else {
                self.terms.insert(e, s);
            }
        } else if !c.is_zero() {
            self.terms.insert(e, c);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &NovikovElement)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[i64]) -> Option<&NovikovElement> {
        self.terms.get(e)
    }

    pub fn exponents(&self) -> Vec<Vec<i64>> {
        self.terms.keys().cloned().collect()
    }

    pub fn without_constant(&self) -> Self {
        let mut p = self.clone();
        p.terms.remove(&vec![0; self.nvars]);
        p
    }

    pub fn map_coeffs(&self, f: impl Fn(&NovikovElement) -> NovikovElement) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), f(c));
        }
        p
    }

    pub fn with_precision(&self, prec: &Q) -> Self {
        self.map_coeffs(|c| c.with_precision(prec.clone()))
    }

    pub fn scale(&self, c: &NovikovElement) -> Self {
        self.map_coeffs(|a| a * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), c.clone());
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), -c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<i64> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32, precision: &Q) -> Self {
        let mut r = Self::constant(self.nvars, NovikovElement::one(precision.clone()));
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    /// `D_θ`: each term multiplied by `⟨α, θ⟩`.
    pub fn log_derivative(&self, direction: &[i64]) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let k: i64 = e.iter().zip(direction).map(|(a, b)| a * b).sum();
            if k != 0 {
                p.add_term(e.clone(), c.scale(C::new(k as f64, 0.0)));
            }
        }
        p
    }

    /// Evaluates at a point of `(Λ*)ⁿ`.
    pub fn eval(&self, y: &[NovikovElement]) -> Result<NovikovElement, LaurentError> {
        if y.len() != self.nvars {
            return Err(LaurentError::ArityMismatch {
                expected: self.nvars,
                got: y.len(),
            });
        }
        let mut cache = PowerCache::new(y);
        let mut acc: Option<NovikovElement> = None;
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                if k != 0 {
                    t = &t * cache.get(i, k)?;
                }
            }
            acc = Some(match acc {
                None => t,
                Some(a) => &a + &t,
            });
        }
        Ok(acc.unwrap_or_else(|| {
            let p = y
                .iter()
                .map(|v| v.precision().clone())
                .min()
                .unwrap_or_else(crate::novikov::default_precision);
            NovikovElement::zero(p)
        }))
    }

    /// Substitutes `y_i ↦ images[i]`. Negative powers are allowed only for
    /// monomial images.
    pub fn substitute(&self, images: &[LaurentPolynomial], out_nvars: usize) -> Result<Self, LaurentError> {
        if images.len() != self.nvars {
            return Err(LaurentError::ArityMismatch {
                expected: self.nvars,
                got: images.len(),
            });
        }
        let mut inverses: Vec<Option<LaurentPolynomial>> = vec![None; self.nvars];
        let mut result = Self::zero(out_nvars);
        for (e, c) in &self.terms {
            let mut t = Self::constant(out_nvars, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let base = if k > 0 {
                    images[i].clone()
                } else {
                    if inverses[i].is_none() {
                        inverses[i] = Some(images[i].monomial_inverse().ok_or(LaurentError::NonMonomialInverse(i))??);
                    }
                    inverses[i].clone().unwrap()
                };
                for _ in 0..k.unsigned_abs() {
                    t = t.mul(&base);
                }
            }
            result = result.add(&t);
        }
        Ok(result)
    }

    /// Inverse of a single-term polynomial.
    pub fn monomial_inverse(&self) -> Option<Result<Self, LaurentError>> {
        if self.terms.len() != 1 {
            return None;
        }
        let (e, c) = self.terms.iter().next().unwrap();
        Some(
            c.invert()
                .map(|ci| Self::monomial(e.iter().map(|v| -v).collect(), ci))
                .map_err(LaurentError::from),
        )
    }

    /// Coefficient-wise comparison within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.nvars != other.nvars {
            return false;
        }
        self.sub(other).terms.values().all(|c| c.approx_zero(tol))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(PolyJson {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    e: e.clone(),
                    c: c.to_literal(),
                })
                .collect(),
        })
        .expect("serializable")
    }

    /// Parses `{"nvars": n, "terms": [{"e": [...], "c": "<literal>"}]}`.
    /// Repeated exponent vectors are rejected.
    pub fn from_json_str(s: &str, precision: Q) -> Result<Self, LaurentError> {
        let pj: PolyJson = serde_json::from_str(s).map_err(|e| LaurentError::Json(e.to_string()))?;
        let mut terms = Vec::with_capacity(pj.terms.len());
        for t in pj.terms {
            terms.push((t.e, NovikovElement::parse(&t.c, precision.clone())?));
        }
        Self::from_distinct_terms(pj.nvars, terms)
    }
}

impl fmt::Display for LaurentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| format!("[{}]·y^{:?}", c.to_literal(), e))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Memoized integer powers of the evaluation point.
struct PowerCache<'a> {
    base: &'a [NovikovElement],
    inverses: Vec<Option<NovikovElement>>,
    powers: Vec<BTreeMap<i64, NovikovElement>>,
}

impl<'a> PowerCache<'a> {
    fn new(base: &'a [NovikovElement]) -> Self {
        PowerCache {
            base,
            inverses: vec![None; base.len()],
            powers: vec![BTreeMap::new(); base.len()],
        }
    }

    fn get(&mut self, i: usize, k: i64) -> Result<&NovikovElement, NovikovError> {
        if !self.powers[i].contains_key(&k) {
            let b = if k > 0 {
                self.base[i].clone()
            } else {
                if self.inverses[i].is_none() {
                    self.inverses[i] = Some(self.base[i].invert()?);
                }
                self.inverses[i].clone().unwrap()
            };
            let step = k.signum();
            let mut j = step;
            let mut acc = b.clone();
            for m in (1..k.abs()).rev() {
                if let Some(p) = self.powers[i].get(&(m * step)) {
                    j = m * step;
                    acc = p.clone();
                    break;
                }
            }
            self.powers[i].insert(j, acc.clone());
            while j != k {
                acc = &acc * &b;
                j += step;
                self.powers[i].insert(j, acc.clone());
            }
        }
        Ok(&self.powers[i][&k])
    }
}
