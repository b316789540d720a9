//! Exact rational scalars and the small amount of rational linear algebra
//! shared by the other modules.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;
use thiserror::Error;

/// Arbitrary-precision rational number.
pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p/q`, an integer, or a finite decimal such as `3.14` (stored as
/// `157/50`). Surrounding braces are accepted.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let t = s.trim();
    let t = t
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .unwrap_or(t)
        .trim();
    if t.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let bad = || ParseRationalError::Malformed(s.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Q::new(n, d));
    }
    let (neg, body) = match t.as_bytes()[0] {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let v = Q::new(num, den);
    Ok(if neg { -v } else { v })
}

/// `p/q`, or `p` for integers.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Best rational approximation with denominator at most `max_den`
/// (continued fractions). Used only to seed exact computations from floats.
pub fn from_f64_bounded(x: f64, max_den: i64) -> Q {
    if !x.is_finite() {
        return Q::zero();
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = v - a;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 == 0 {
        return Q::zero();
    }
    Q::new(BigInt::from(h1), BigInt::from(k1))
}

pub fn dot_int(e: &[i64], x: &[Q]) -> Q {
    let mut acc = Q::zero();
    for (a, b) in e.iter().zip(x) {
        if *a != 0 {
            acc += b * Q::from_integer(BigInt::from(*a));
        }
    }
    acc
}

/// Row-reduces `m` in place over Q and returns the pivot columns.
pub fn row_reduce(m: &mut [Vec<Q>]) -> Vec<usize> {
    let rows = m.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r >= rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for j in c..cols {
            m[r][j] = &m[r][j] * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..cols {
                    let t = &f * &m[r][j];
                    m[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<Q>]) -> usize {
    let mut m = rows.to_vec();
    row_reduce(&mut m).len()
}

pub fn rank_int(rows: &[Vec<i64>]) -> usize {
    let m: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| q(v)).collect())
        .collect();
    rank(&m)
}

/// Solves `a x = b` for square nonsingular `a`; `None` if singular.
pub fn solve_square(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let n = a.len();
    let mut m: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let piv = row_reduce(&mut m);
    if piv.len() != n || piv.iter().any(|&c| c >= n) {
        return None;
    }
    Some(m.into_iter().map(|r| r[n].clone()).collect())
}

/// Any solution of a consistent (possibly over- or under-determined) system
/// `a x = b`; free variables are set to zero. `None` if inconsistent.
pub fn solve_any(a: &[Vec<Q>], b: &[Q], ncols: usize) -> Option<Vec<Q>> {
    let mut m: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let piv = row_reduce(&mut m);
    if piv.contains(&ncols) {
        return None;
    }
    let mut x = vec![Q::zero(); ncols];
    for (r, &c) in piv.iter().enumerate() {
        x[c] = m[r][ncols].clone();
    }
    Some(x)
}

pub fn det(a: &[Vec<Q>]) -> Q {
    let n = a.len();
    let mut m = a.to_vec();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= &m[c][c];
        let inv = m[c][c].recip();
        for i in c + 1..n {
            if !m[i][c].is_zero() {
                let f = &m[i][c] * &inv;
                for j in c..n {
                    let t = &f * &m[c][j];
                    m[i][j] -= t;
                }
            }
        }
    }
    d
}

/// Whether `target` lies in the affine hull of `points`.
pub fn in_affine_hull(points: &[Vec<i64>], target: &[i64]) -> bool {
    if points.is_empty() {
        return false;
    }
    let dim = target.len();
    let rows: Vec<Vec<Q>> = (0..=dim)
        .map(|i| {
            points
                .iter()
                .map(|p| if i < dim { q(p[i]) } else { Q::one() })
                .collect()
        })
        .collect();
    let mut rhs: Vec<Q> = target.iter().map(|&t| q(t)).collect();
    rhs.push(Q::one());
    solve_any(&rows, &rhs, points.len()).is_some()
}

pub fn abs_q(x: &Q) -> Q {
    x.abs()
}
