//! Truncated Novikov series `Σ aᵢ T^{λᵢ}` with exact rational exponents and
//! complex floating-point coefficients.
//!
//! Every element carries the precision `P` to which it is known: the true
//! series agrees with the stored terms modulo `T^P`. Binary operations
//! propagate the weakest precision, so a result never claims more than its
//! inputs justify. Exponents are compared exactly; only coefficients are
//! subject to float tolerance.

use crate::exponent::Exp;
use crate::rational::{fmt_q, parse_q, q, Q};
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use thiserror::Error;

pub type C = Complex64;

/// Default working precision `P`.
pub const DEFAULT_PRECISION: i64 = 20;
/// Coefficients with modulus below this are dropped after arithmetic.
pub const CLEANUP_EPS: f64 = 1e-13;
/// Default tolerance for coefficient comparisons.
pub const COEFF_TOL: f64 = 1e-9;

pub fn default_precision() -> Q {
    q(DEFAULT_PRECISION)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NovikovError {
    #[error("division by an element with no term below its precision")]
    ZeroDivision,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("cannot parse Novikov literal `{0}`: {1}")]
    Parse(String, String),
}

/// Valuation of a series: its smallest exponent, or infinity for zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(Q),
    Infinity,
}

impl Valuation {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinity)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{}", fmt_q(v)),
            Valuation::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NovikovElement {
    terms: Vec<(Exp, C)>,
    precision: Exp,
}

fn negligible(c: &C, eps: f64) -> bool {
    c.norm() < eps
}

/// Sorts, merges equal exponents, drops terms at or above `prec` and
/// negligible coefficients.
fn canonicalize(mut terms: Vec<(Exp, C)>, prec: Exp, eps: f64) -> Vec<(Exp, C)> {
    terms.retain(|(e, _)| *e < prec);
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(Exp, C)> = Vec::with_capacity(terms.len());
    for (e, c) in terms {
        match out.last_mut() {
            Some((le, lc)) if *le == e => *lc += c,
            _ => out.push((e, c)),
        }
    }
    out.retain(|(_, c)| !negligible(c, eps));
    out
}

impl NovikovElement {
    pub fn zero(precision: Q) -> Self {
        NovikovElement {
            terms: Vec::new(),
            precision: Exp::from_q(&precision),
        }
    }

    pub fn one(precision: Q) -> Self {
        Self::constant(C::new(1.0, 0.0), precision)
    }

    pub fn constant(c: C, precision: Q) -> Self {
        Self::monomial(c, Q::zero(), precision)
    }

    pub fn real(x: f64, precision: Q) -> Self {
        Self::constant(C::new(x, 0.0), precision)
    }

    /// `c T^e` known modulo `T^precision`.
    pub fn monomial(c: C, e: Q, precision: Q) -> Self {
        Self::from_terms(vec![(e, c)], precision)
    }

    /// `T^e`.
    pub fn t_pow(e: Q, precision: Q) -> Self {
        Self::monomial(C::new(1.0, 0.0), e, precision)
    }

    pub fn from_terms(terms: Vec<(Q, C)>, precision: Q) -> Self {
        let p = Exp::from_q(&precision);
        Self::from_exp_terms(terms.iter().map(|(e, c)| (Exp::from_q(e), *c)).collect(), p)
    }

    pub fn from_exp_terms(terms: Vec<(Exp, C)>, precision: Exp) -> Self {
        NovikovElement {
            terms: canonicalize(terms, precision, CLEANUP_EPS),
            precision,
        }
    }

    /// Terms in increasing exponent order.
    pub fn terms(&self) -> Vec<(Q, C)> {
        self.terms.iter().map(|(e, c)| (e.to_q(), *c)).collect()
    }

    pub fn exp_terms(&self) -> &[(Exp, C)] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn precision(&self) -> Q {
        self.precision.to_q()
    }

    pub fn precision_exp(&self) -> Exp {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn val(&self) -> Valuation {
        match self.terms.first() {
            Some((e, _)) => Valuation::Finite(e.to_q()),
            None => Valuation::Infinity,
        }
    }

    pub fn val_exp(&self) -> Option<Exp> {
        self.terms.first().map(|t| t.0)
    }

    /// Valuation, or the precision for an element that is zero at precision.
    pub fn val_or_precision(&self) -> Q {
        self.val_or_precision_exp().to_q()
    }

    fn val_or_precision_exp(&self) -> Exp {
        self.terms.first().map(|t| t.0).unwrap_or(self.precision)
    }

    pub fn leading(&self) -> Option<(Q, C)> {
        self.terms.first().map(|(e, c)| (e.to_q(), *c))
    }

    pub fn leading_coeff(&self) -> C {
        self.terms.first().map(|t| t.1).unwrap_or_default()
    }

    /// Coefficient of `T^e` (zero when absent).
    pub fn coeff(&self, e: &Q) -> C {
        match Exp::try_from_q(e) {
            Some(e) => self.coeff_exp(e),
            None => C::default(),
        }
    }

    pub fn coeff_exp(&self, e: Exp) -> C {
        self.terms
            .binary_search_by(|t| t.0.cmp(&e))
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    /// Lowers the precision to `min(self.precision, p)`.
    pub fn truncate(&self, p: &Q) -> Self {
        self.truncate_exp(Exp::from_q(p))
    }

    fn truncate_exp(&self, p: Exp) -> Self {
        if p >= self.precision {
            return self.clone();
        }
        NovikovElement {
            terms: self.terms.iter().filter(|t| t.0 < p).copied().collect(),
            precision: p,
        }
    }

    /// Declares the stored terms exact up to `p`. Only meaningful for
    /// elements whose series is known to terminate (input data).
    pub fn with_precision(&self, p: Q) -> Self {
        Self::from_exp_terms(self.terms.clone(), Exp::from_q(&p))
    }

    pub fn scale(&self, c: C) -> Self {
        Self::from_exp_terms(self.terms.iter().map(|(e, a)| (*e, a * c)).collect(), self.precision)
    }

    /// Multiplication by `T^s`.
    pub fn shift(&self, s: &Q) -> Self {
        self.shift_exp(Exp::from_q(s))
    }

    pub fn shift_exp(&self, s: Exp) -> Self {
        NovikovElement {
            terms: self.terms.iter().map(|(e, c)| (*e + s, *c)).collect(),
            precision: self.precision + s,
        }
    }

    /// Part of the series strictly above the leading term.
    pub fn tail(&self) -> Self {
        NovikovElement {
            terms: self.terms.iter().skip(1).copied().collect(),
            precision: self.precision,
        }
    }

    fn add_impl(&self, other: &Self, sign: f64) -> Self {
        let prec = std::cmp::min(self.precision, other.precision);
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            let (e, c) = match ord {
                Ordering::Less => {
                    i += 1;
                    a[i - 1]
                }
                Ordering::Greater => {
                    j += 1;
                    (b[j - 1].0, b[j - 1].1 * sign)
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (a[i - 1].0, a[i - 1].1 + b[j - 1].1 * sign)
                }
            };
            if e >= prec {
                break;
            }
            if !negligible(&c, CLEANUP_EPS) {
                out.push((e, c));
            }
        }
        NovikovElement {
            terms: out,
            precision: prec,
        }
    }

    fn mul_impl(&self, other: &Self) -> Self {
        let vx = self.val_or_precision_exp();
        let vy = other.val_or_precision_exp();
        let prec = std::cmp::min(self.precision + vy, other.precision + vx);
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = *ea + *eb;
                if e >= prec {
                    break;
                }
                raw.push((e, ca * cb));
            }
        }
        NovikovElement {
            terms: canonicalize(raw, prec, CLEANUP_EPS),
            precision: prec,
        }
    }

    /// Multiplicative inverse via the leading term and a geometric series.
    pub fn invert(&self) -> Result<Self, NovikovError> {
        let (v, c) = match self.terms.first() {
            Some(t) => *t,
            None => return Err(NovikovError::ZeroDivision),
        };
        let cinv = c.inv();
        let rel_prec = self.precision - v;
        // self = c T^v (1 + u) with val(u) > 0
        let neg_u = NovikovElement {
            terms: self.terms[1..].iter().map(|(e, a)| (*e - v, -(a * cinv))).collect(),
            precision: rel_prec,
        };
        let one = NovikovElement { terms: vec![(Exp::ZERO, C::new(1.0, 0.0))], precision: rel_prec };
        let mut raw = one.terms.clone();
        let mut term = one;
        loop {
            term = (&term * &neg_u).truncate_exp(rel_prec);
            if term.is_zero() {
                break;
            }
            raw.extend_from_slice(&term.terms);
        }
        let sum = NovikovElement::from_exp_terms(raw, rel_prec);
        Ok(sum.scale(cinv).shift_exp(-v))
    }

    /// `exp(x) = Σ xᵏ/k!` for `val(x) > 0`.
    pub fn exp_positive(&self) -> Result<Self, NovikovError> {
        if let Some((v, _)) = self.terms.first() {
            if !v.is_positive() {
                return Err(NovikovError::DomainError(format!("exp needs positive valuation, got {v}")));
            }
        }
        let prec = self.precision;
        let one = NovikovElement { terms: vec![(Exp::ZERO, C::new(1.0, 0.0))], precision: prec };
        let mut raw = one.terms.clone();
        let mut term = one;
        let mut k = 1.0;
        loop {
            term = (&term * self).scale(C::new(1.0 / k, 0.0)).truncate_exp(prec);
            if term.is_zero() {
                break;
            }
            raw.extend_from_slice(&term.terms);
            k += 1.0;
        }
        Ok(NovikovElement::from_exp_terms(raw, prec))
    }

    /// Integer power; negative powers go through `invert`.
    pub fn pow_i(&self, k: i64) -> Result<Self, NovikovError> {
        if k < 0 {
            return self.invert()?.pow_i(-k);
        }
        let mut result: Option<NovikovElement> = None;
        let mut base = self.clone();
        let mut k = k as u64;
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => &r * &base,
                });
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Ok(result.unwrap_or_else(|| NovikovElement {
            terms: vec![(Exp::ZERO, C::new(1.0, 0.0))],
            precision: self.precision,
        }))
    }

    /// Every coefficient of `self - other` has modulus at most `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).approx_zero(tol)
    }

    /// Coefficientwise comparison allowing `tol + rel * |bound_e|` at each
    /// exponent, where `bound` majorizes the intermediates of a computation.
    pub fn approx_eq_bounded(&self, other: &Self, tol: f64, bound: &Self, rel: f64) -> bool {
        (self - other)
            .terms
            .iter()
            .all(|(e, c)| c.norm() <= tol + rel * bound.coeff_exp(*e).norm())
    }

    /// Largest coefficient modulus, zero for the zero series.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max)
    }

    /// The series with every coefficient replaced by its modulus.
    pub fn abs_series(&self) -> Self {
        NovikovElement {
            terms: self.terms.iter().map(|(e, c)| (*e, C::new(c.norm(), 0.0))).collect(),
            precision: self.precision,
        }
    }

    /// Majorant of the inverse: `1/(|c|T^v (1 - |u|))` has nonnegative
    /// coefficients dominating every partial sum formed by [`invert`](Self::invert).
    pub fn majorant_inverse(&self) -> Result<Self, NovikovError> {
        let mut m = self.abs_series();
        for t in m.terms.iter_mut().skip(1) {
            t.1 = -t.1;
        }
        m.invert()
    }

    pub fn approx_zero(&self, tol: f64) -> bool {
        self.terms.iter().all(|(_, c)| c.norm() <= tol)
    }

    /// Removes coefficients of modulus at most `tol`.
    pub fn clean(&self, tol: f64) -> Self {
        NovikovElement {
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).copied().collect(),
            precision: self.precision,
        }
    }

    /// Literal form accepted by [`NovikovElement::parse`].
    pub fn to_literal(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        self.terms
            .iter()
            .map(|(e, c)| format!("({:.16e}{:+.16e}i)*T^{{{}}}", c.re, c.im, e))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Parses a literal such as `1*T^0 + (-0.5+0.866i)*T^{1/3}` at the given
    /// precision.
    pub fn parse(s: &str, precision: Q) -> Result<Self, NovikovError> {
        let err = |m: &str| NovikovError::Parse(s.to_string(), m.to_string());
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Err(err("empty literal"));
        }
        let mut terms = Vec::new();
        for piece in split_terms(trimmed) {
            let (e, c) = parse_term(&piece).map_err(|m| err(&m))?;
            let e = Exp::try_from_q(&e).ok_or_else(|| err("exponent out of range"))?;
            terms.push((e, c));
        }
        let p = Exp::try_from_q(&precision).ok_or_else(|| err("precision out of range"))?;
        Ok(Self::from_exp_terms(terms, p))
    }
}

/// Splits at top-level `+`/`-` that separate terms.
fn split_terms(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for (i, &ch) in chars.iter().enumerate() {
        match ch {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            _ => {}
        }
        if depth == 0 && (ch == '+' || ch == '-') {
            let prev = cur.trim_end().chars().last();
            let exponent_marker = matches!(prev, Some('e') | Some('E')) && {
                let t = cur.trim_end();
                let before = t[..t.len() - 1].chars().last();
                matches!(before, Some(c) if c.is_ascii_digit() || c == '.')
            };
            let separates = !cur.trim().is_empty()
                && !matches!(prev, Some('^') | Some('*'))
                && !exponent_marker
                && i > 0;
            if separates {
                out.push(std::mem::take(&mut cur));
                if ch == '-' {
                    cur.push('-');
                }
                continue;
            }
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if t.contains('/') {
        return parse_q(t)
            .map(|r| crate::rational::to_f64(&r))
            .map_err(|e| e.to_string());
    }
    t.parse::<f64>().map_err(|_| format!("bad number `{t}`"))
}

fn parse_complex(s: &str) -> Result<C, String> {
    let t = s.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(r) if r.trim_start().starts_with('(') => (true, r.trim()),
        _ => (false, t),
    };
    let val = if let Some(inner) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let inner = inner.trim();
        if let Some(body) = inner.strip_suffix('i') {
            let bytes: Vec<char> = body.chars().collect();
            let split = (1..bytes.len())
                .rev()
                .find(|&k| (bytes[k] == '+' || bytes[k] == '-') && !matches!(bytes[k - 1], 'e' | 'E'));
            match split {
                Some(k) => {
                    let re: String = bytes[..k].iter().collect();
                    let im: String = bytes[k..].iter().collect();
                    let im = match im.trim() {
                        "+" => 1.0,
                        "-" => -1.0,
                        other => parse_real(other)?,
                    };
                    C::new(parse_real(&re)?, im)
                }
                None => {
                    let im = match body.trim() {
                        "" | "+" => 1.0,
                        "-" => -1.0,
                        other => parse_real(other)?,
                    };
                    C::new(0.0, im)
                }
            }
        } else {
            C::new(parse_real(inner)?, 0.0)
        }
    } else {
        C::new(parse_real(t)?, 0.0)
    };
    Ok(if neg { -val } else { val })
}

fn parse_term(s: &str) -> Result<(Q, C), String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let t = compact.as_str();
    let (coeff, exp) = if let Some(idx) = t.find("*T") {
        (&t[..idx], Some(&t[idx + 2..]))
    } else if let Some(rest) = t.strip_prefix("-T") {
        ("-1", Some(rest))
    } else if let Some(rest) = t.strip_prefix('T') {
        ("1", Some(rest))
    } else {
        (t, None)
    };
    let c = parse_complex(coeff)?;
    let e = match exp {
        None => Q::zero(),
        Some(rest) => {
            let rest = rest.trim();
            if rest.is_empty() {
                Q::one()
            } else if let Some(r) = rest.strip_prefix('^') {
                parse_q(r).map_err(|e| e.to_string())?
            } else {
                return Err(format!("bad exponent in `{t}`"));
            }
        }
    };
    Ok((e, c))
}

impl FromStr for NovikovElement {
    type Err = NovikovError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, default_precision())
    }
}

impl fmt::Display for NovikovElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_literal())
    }
}

impl Serialize for NovikovElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_literal())
    }
}

impl<'de> Deserialize<'de> for NovikovElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl<'a> Add<&'a NovikovElement> for &'a NovikovElement {
    type Output = NovikovElement;
    fn add(self, o: &NovikovElement) -> NovikovElement {
        self.add_impl(o, 1.0)
    }
}

impl<'a> Sub<&'a NovikovElement> for &'a NovikovElement {
    type Output = NovikovElement;
    fn sub(self, o: &NovikovElement) -> NovikovElement {
        self.add_impl(o, -1.0)
    }
}

impl<'a> Mul<&'a NovikovElement> for &'a NovikovElement {
    type Output = NovikovElement;
    fn mul(self, o: &NovikovElement) -> NovikovElement {
        self.mul_impl(o)
    }
}

impl Neg for &NovikovElement {
    type Output = NovikovElement;
    fn neg(self) -> NovikovElement {
        NovikovElement {
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
            precision: self.precision,
        }
    }
}

impl Add for NovikovElement {
    type Output = NovikovElement;
    fn add(self, o: NovikovElement) -> NovikovElement {
        &self + &o
    }
}

impl Sub for NovikovElement {
    type Output = NovikovElement;
    fn sub(self, o: NovikovElement) -> NovikovElement {
        &self - &o
    }
}

impl Mul for NovikovElement {
    type Output = NovikovElement;
    fn mul(self, o: NovikovElement) -> NovikovElement {
        &self * &o
    }
}

impl Neg for NovikovElement {
    type Output = NovikovElement;
    fn neg(self) -> NovikovElement {
        -&self
    }
}

/// The `n` monomials `|c|^{1/n} e^{i(arg c + 2πs)/n} T^{λ/n}`, `s = 0..n-1`.
pub fn nth_roots(c: C, lambda: &Q, n: u32, precision: Q) -> Result<Vec<NovikovElement>, NovikovError> {
    if c.norm() == 0.0 {
        return Err(NovikovError::DomainError("nth root of zero coefficient".into()));
    }
    if n == 0 {
        return Err(NovikovError::DomainError("root of order zero".into()));
    }
    let modulus = c.norm().powf(1.0 / n as f64);
    let e = lambda / q(n as i64);
    Ok((0..n)
        .map(|s| {
            let angle = (c.arg() + 2.0 * std::f64::consts::PI * s as f64) / n as f64;
            NovikovElement::monomial(C::from_polar(modulus, angle), e.clone(), precision.clone())
        })
        .collect())
}
