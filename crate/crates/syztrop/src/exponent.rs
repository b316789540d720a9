//! Machine-sized exact rationals for series exponents.
//!
//! Exponents in this crate are small rationals, and series arithmetic
//! compares and adds them in inner loops, so they are stored as reduced
//! `i64` fractions. Arithmetic is carried out in `i128` and panics if a
//! result leaves the `i64` range, which never happens for sane inputs.

use crate::rational::Q;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exp {
    num: i64,
    den: i64,
}

impl Exp {
    pub const ZERO: Exp = Exp { num: 0, den: 1 };
    pub const ONE: Exp = Exp { num: 1, den: 1 };

    fn reduce(num: i128, den: i128) -> Exp {
        assert!(den != 0, "exponent with zero denominator");
        let g = num.gcd(&den);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(num), Ok(den)) => Exp { num, den },
            _ => panic!("exponent {n}/{d} out of range"),
        }
    }

    pub fn new(num: i64, den: i64) -> Exp {
        Self::reduce(num as i128, den as i128)
    }

    pub fn integer(n: i64) -> Exp {
        Exp { num: n, den: 1 }
    }

    pub fn try_from_q(q: &Q) -> Option<Exp> {
        Some(Exp {
            num: q.numer().to_i64()?,
            den: q.denom().to_i64()?,
        })
    }

    /// Panics if `q` does not fit.
    pub fn from_q(q: &Q) -> Exp {
        Self::try_from_q(q).unwrap_or_else(|| panic!("exponent {q} out of range"))
    }

    pub fn to_q(self) -> Q {
        Q::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn numer(self) -> i64 {
        self.num
    }

    pub fn denom(self) -> i64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn is_positive(self) -> bool {
        self.num > 0
    }

    pub fn is_negative(self) -> bool {
        self.num < 0
    }

    pub fn mul_int(self, k: i64) -> Exp {
        Self::reduce(self.num as i128 * k as i128, self.den as i128)
    }

    pub fn div_int(self, k: i64) -> Exp {
        Self::reduce(self.num as i128, self.den as i128 * k as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Ord for Exp {
    fn cmp(&self, o: &Exp) -> Ordering {
        if self.den == o.den {
            return self.num.cmp(&o.num);
        }
        (self.num as i128 * o.den as i128).cmp(&(o.num as i128 * self.den as i128))
    }
}

impl PartialOrd for Exp {
    fn partial_cmp(&self, o: &Exp) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Add for Exp {
    type Output = Exp;
    fn add(self, o: Exp) -> Exp {
        if self.den == o.den {
            return Self::reduce(self.num as i128 + o.num as i128, self.den as i128);
        }
        Self::reduce(
            self.num as i128 * o.den as i128 + o.num as i128 * self.den as i128,
            self.den as i128 * o.den as i128,
        )
    }
}

impl Sub for Exp {
    type Output = Exp;
    fn sub(self, o: Exp) -> Exp {
        self + (-o)
    }
}

impl Neg for Exp {
    type Output = Exp;
    fn neg(self) -> Exp {
        Exp { num: -self.num, den: self.den }
    }
}

impl fmt::Display for Exp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Exp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<&Q> for Exp {
    fn from(q: &Q) -> Exp {
        Exp::from_q(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qr;

    #[test]
    fn arithmetic_and_order() {
        let a = Exp::new(2, -4);
        assert_eq!(a, Exp::new(-1, 2));
        assert_eq!(a + Exp::new(1, 3), Exp::new(-1, 6));
        assert_eq!(Exp::new(1, 2) - Exp::new(1, 2), Exp::ZERO);
        assert!(Exp::new(1, 3) < Exp::new(1, 2));
        assert!(Exp::new(-7, 3) < Exp::integer(-2));
        assert_eq!(Exp::new(3, 4).mul_int(4), Exp::integer(3));
        assert_eq!(Exp::from_q(&qr(157, 50)).to_q(), qr(157, 50));
        assert_eq!(Exp::new(5, 3).to_string(), "5/3");
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn overflow_panics() {
        let big = Exp::integer(i64::MAX);
        let _ = big + big;
    }
}
