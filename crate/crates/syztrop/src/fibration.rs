//! Base geometry of the dual fibration: ψ models, the embedding `j`, broken
//! lines, the map `F`, and `f = j⁻¹ ∘ F` on `{val(x₁) > 0}`.

use crate::laurent::{LaurentError, LaurentPolynomial};
use crate::novikov::{NovikovElement, COEFF_TOL};
use crate::rational::{fmt_q, to_f64, Q};
use crate::tropical::TropicalPolynomial;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Tolerance for geometry computed with a smooth ψ model.
pub const SMOOTH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FibrationError {
    #[error("point {0} is not on the broken-line surface")]
    NotOnImage(String),
    #[error("point is not on the variety: x0*x1 - h(y) = {0}")]
    NotOnVariety(String),
    #[error("coordinate y{0} is zero")]
    ZeroCoordinate(usize),
    #[error("val(x1) = {0} is not positive")]
    NotInDomain(String),
    #[error("point does not lie on the singular fiber: {0}")]
    NotOnSingularFiber(String),
    #[error("psi model cannot invert value {0}")]
    ModelNotInvertible(String),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
}

/// A real coordinate: exact rational, or a float from a smooth model.
#[derive(Debug, Clone, PartialEq)]
pub enum Coord {
    Exact(Q),
    Approx(f64),
}

impl Coord {
    pub fn zero() -> Self {
        Coord::Exact(Q::zero())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coord::Exact(x) => to_f64(x),
            Coord::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Coord::Exact(x) => Some(x),
            Coord::Approx(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coord::Exact(_))
    }

    /// Exact order for exact pairs; otherwise floats equal within [`SMOOTH_TOL`].
    pub fn cmp_tol(&self, other: &Coord) -> Ordering {
        match (self, other) {
            (Coord::Exact(a), Coord::Exact(b)) => a.cmp(b),
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                if (a - b).abs() <= SMOOTH_TOL * (1.0 + a.abs().max(b.abs())) {
                    Ordering::Equal
                } else if a < b {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    pub fn eq_tol(&self, other: &Coord) -> bool {
        self.cmp_tol(other) == Ordering::Equal
    }

    pub fn min(self, other: Coord) -> Coord {
        if other.cmp_tol(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn neg(&self) -> Coord {
        match self {
            Coord::Exact(x) => Coord::Exact(-x),
            Coord::Approx(x) => Coord::Approx(-x),
        }
    }

    pub fn add_q(&self, q: &Q) -> Coord {
        match self {
            Coord::Exact(x) => Coord::Exact(x + q),
            Coord::Approx(x) => Coord::Approx(x + to_f64(q)),
        }
    }

    pub fn sub(&self, other: &Coord) -> Coord {
        match (self, other) {
            (Coord::Exact(a), Coord::Exact(b)) => Coord::Exact(a - b),
            _ => Coord::Approx(self.to_f64() - other.to_f64()),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.cmp_tol(&Coord::zero()) == Ordering::Greater
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Exact(x) => write!(f, "{}", fmt_q(x)),
            Coord::Approx(x) => write!(f, "{x:.17e}"),
        }
    }
}

impl Serialize for Coord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Coord::Exact(x) => s.serialize_str(&fmt_q(x)),
            Coord::Approx(x) => s.serialize_f64(*x),
        }
    }
}

impl From<Q> for Coord {
    fn from(x: Q) -> Self {
        Coord::Exact(x)
    }
}

/// Wall value `ψ₀(q̄) = ψ(q̄, 0)`; always a positive rational.
#[derive(Clone)]
pub enum Psi0 {
    Constant(Q),
    Custom(Arc<dyn Fn(&[Q]) -> Q + Send + Sync>),
}

impl Psi0 {
    pub fn eval(&self, qbar: &[Q]) -> Q {
        let v = match self {
            Psi0::Constant(c) => c.clone(),
            Psi0::Custom(f) => f(qbar),
        };
        assert!(v.is_positive(), "psi0 must be positive, got {}", fmt_q(&v));
        v
    }
}

impl Default for Psi0 {
    fn default() -> Self {
        Psi0::Constant(Q::one())
    }
}

impl fmt::Debug for Psi0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psi0::Constant(c) => write!(f, "Constant({})", fmt_q(c)),
            Psi0::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// `ψ(q̄, ·)`: a strictly increasing bijection `ℝ → (0,∞)` with value
/// `ψ₀(q̄)` at `q_n = 0`.
pub trait PsiModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn psi0(&self, qbar: &[Q]) -> Q;
    fn psi(&self, qbar: &[Q], qn: &Coord) -> Coord;
    /// `q_n` with `ψ(q̄, q_n) = c`, for `c > 0`.
    fn psi_inv(&self, qbar: &[Q], c: &Coord) -> Result<Coord, FibrationError>;
    /// Whether exact inputs give exact outputs.
    fn is_exact(&self) -> bool;
}

/// `ψ₀(1 + q_n)` for `q_n ≥ 0`, `ψ₀ / (1 − q_n)` for `q_n < 0`.
#[derive(Debug, Clone, Default)]
pub struct ExactPL {
    pub psi0: Psi0,
}

/// `ψ₀ · ln(1 + e^{q_n}) / ln 2`.
#[derive(Debug, Clone, Default)]
pub struct Softplus {
    pub psi0: Psi0,
}

/// `ψ₀ · e^{q_n}`.
#[derive(Debug, Clone, Default)]
pub struct ExpModel {
    pub psi0: Psi0,
}

fn positive_or_err(c: &Coord) -> Result<(), FibrationError> {
    if c.is_positive() {
        Ok(())
    } else {
        Err(FibrationError::ModelNotInvertible(c.to_string()))
    }
}

impl PsiModel for ExactPL {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn psi0(&self, qbar: &[Q]) -> Q {
        self.psi0.eval(qbar)
    }

    fn psi(&self, qbar: &[Q], qn: &Coord) -> Coord {
        let p0 = self.psi0(qbar);
        match qn {
            Coord::Exact(t) if !t.is_negative() => Coord::Exact(&p0 * (Q::one() + t)),
            Coord::Exact(t) => Coord::Exact(&p0 / (Q::one() - t)),
            Coord::Approx(t) => {
                let p0 = to_f64(&p0);
                Coord::Approx(if *t >= 0.0 { p0 * (1.0 + t) } else { p0 / (1.0 - t) })
            }
        }
    }

    fn psi_inv(&self, qbar: &[Q], c: &Coord) -> Result<Coord, FibrationError> {
        positive_or_err(c)?;
        let p0 = self.psi0(qbar);
        Ok(match c {
            Coord::Exact(c) if *c >= p0 => Coord::Exact(c / &p0 - Q::one()),
            Coord::Exact(c) => Coord::Exact(Q::one() - &p0 / c),
            Coord::Approx(c) => {
                let p0 = to_f64(&p0);
                Coord::Approx(if *c >= p0 { c / p0 - 1.0 } else { 1.0 - p0 / c })
            }
        })
    }

    fn is_exact(&self) -> bool {
        true
    }
}

impl PsiModel for Softplus {
    fn name(&self) -> &'static str {
        "softplus"
    }

    fn psi0(&self, qbar: &[Q]) -> Q {
        self.psi0.eval(qbar)
    }

    fn psi(&self, qbar: &[Q], qn: &Coord) -> Coord {
        let p0 = self.psi0(qbar);
        if qn.as_exact().is_some_and(Zero::is_zero) {
            return Coord::Exact(p0);
        }
        let t = qn.to_f64();
        // ln(1 + e^t) computed without overflow
        let sp = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
        Coord::Approx(to_f64(&p0) * sp / std::f64::consts::LN_2)
    }

    fn psi_inv(&self, qbar: &[Q], c: &Coord) -> Result<Coord, FibrationError> {
        positive_or_err(c)?;
        let p0 = self.psi0(qbar);
        if c.as_exact() == Some(&p0) {
            return Ok(Coord::zero());
        }
        let s = c.to_f64() * std::f64::consts::LN_2 / to_f64(&p0);
        // ln(e^s − 1)
        let t = if s > 30.0 { s + (-(-s).exp()).ln_1p() } else { s.exp_m1().ln() };
        Ok(Coord::Approx(t))
    }

    fn is_exact(&self) -> bool {
        false
    }
}

impl PsiModel for ExpModel {
    fn name(&self) -> &'static str {
        "exp"
    }

    fn psi0(&self, qbar: &[Q]) -> Q {
        self.psi0.eval(qbar)
    }

    fn psi(&self, qbar: &[Q], qn: &Coord) -> Coord {
        let p0 = self.psi0(qbar);
        if qn.as_exact().is_some_and(Zero::is_zero) {
            return Coord::Exact(p0);
        }
        Coord::Approx(to_f64(&p0) * qn.to_f64().exp())
    }

    fn psi_inv(&self, qbar: &[Q], c: &Coord) -> Result<Coord, FibrationError> {
        positive_or_err(c)?;
        let p0 = self.psi0(qbar);
        if c.as_exact() == Some(&p0) {
            return Ok(Coord::zero());
        }
        Ok(Coord::Approx((c.to_f64() / to_f64(&p0)).ln()))
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// `q = (q̄, q_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasePoint {
    #[serde(serialize_with = "ser_qs")]
    pub qbar: Vec<Q>,
    pub qn: Coord,
}

/// `(u₀, u₁, q̄)` in the image of `j` or `F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImagePoint {
    pub u0: Coord,
    pub u1: Coord,
    #[serde(serialize_with = "ser_qs")]
    pub qbar: Vec<Q>,
}

pub(crate) fn ser_qs<S: serde::Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(fmt_q))
}

impl BasePoint {
    pub fn new(qbar: Vec<Q>, qn: Coord) -> Self {
        BasePoint { qbar, qn }
    }

    pub fn exact(qbar: Vec<Q>, qn: Q) -> Self {
        BasePoint { qbar, qn: Coord::Exact(qn) }
    }

    pub fn eq_tol(&self, other: &BasePoint) -> bool {
        self.qbar == other.qbar && self.qn.eq_tol(&other.qn)
    }
}

impl fmt::Display for BasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.qbar.iter().map(fmt_q).chain([self.qn.to_string()]).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl ImagePoint {
    /// Coordinatewise equality: exact for exact pairs, else within tolerance.
    pub fn eq_tol(&self, other: &ImagePoint) -> bool {
        self.qbar == other.qbar && self.u0.eq_tol(&other.u0) && self.u1.eq_tol(&other.u1)
    }

    /// Strict equality of all coordinates.
    pub fn eq_exact(&self, other: &ImagePoint) -> bool {
        self.u0.is_exact() && other.u0.is_exact() && self.u1.is_exact() && other.u1.is_exact() && self == other
    }
}

impl fmt::Display for ImagePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = [self.u0.to_string(), self.u1.to_string()]
            .into_iter()
            .chain(self.qbar.iter().map(fmt_q))
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Corner `A(q̄) = (h_trop(q̄) − ψ₀(q̄), ψ₀(q̄))`.
pub fn corner(qbar: &[Q], psi: &dyn PsiModel, h_trop: &TropicalPolynomial) -> (Q, Q) {
    let p0 = psi.psi0(qbar);
    (h_trop.value(qbar) - &p0, p0)
}

/// `θ₀ = min{−ψ, −ψ₀} + h_trop(q̄)`, `θ₁ = min{ψ, ψ₀}`.
pub fn theta(q: &BasePoint, psi: &dyn PsiModel, h_trop: &TropicalPolynomial) -> (Coord, Coord) {
    let pv = psi.psi(&q.qbar, &q.qn);
    let p0 = Coord::Exact(psi.psi0(&q.qbar));
    let ht = h_trop.value(&q.qbar);
    let t0 = pv.neg().min(p0.neg()).add_q(&ht);
    let t1 = pv.min(p0);
    (t0, t1)
}

pub fn j_embed(q: &BasePoint, psi: &dyn PsiModel, h_trop: &TropicalPolynomial) -> ImagePoint {
    let (u0, u1) = theta(q, psi, h_trop);
    ImagePoint { u0, u1, qbar: q.qbar.clone() }
}

/// Inverse of [`j_embed`] on the broken-line surface with `u₁ > 0`.
pub fn j_invert(p: &ImagePoint, psi: &dyn PsiModel, h_trop: &TropicalPolynomial) -> Result<BasePoint, FibrationError> {
    let (a0, a1) = corner(&p.qbar, psi, h_trop);
    let (a0, a1) = (Coord::Exact(a0), Coord::Exact(a1));
    let on_h = p.u1.eq_tol(&a1);
    let on_v = p.u0.eq_tol(&a0);
    let qn = if on_h && on_v {
        Coord::zero()
    } else if on_h && p.u0.cmp_tol(&a0) == Ordering::Less {
        // θ₀ = h_trop − ψ
        let c = Coord::Exact(h_trop.value(&p.qbar)).sub(&p.u0);
        psi.psi_inv(&p.qbar, &c)?
    } else if on_v && p.u1.cmp_tol(&a1) == Ordering::Less && p.u1.is_positive() {
        psi.psi_inv(&p.qbar, &p.u1)?
    } else {
        return Err(FibrationError::NotOnImage(p.to_string()));
    };
    Ok(BasePoint { qbar: p.qbar.clone(), qn })
}

/// `(h_trop(q̄) + min{−c, −ψ₀}, min{c, ψ₀})`.
pub fn broken_line(qbar: &[Q], psi: &dyn PsiModel, h_trop: &TropicalPolynomial, c: &Coord) -> (Coord, Coord) {
    let p0 = Coord::Exact(psi.psi0(qbar));
    let ht = h_trop.value(qbar);
    (c.neg().min(p0.neg()).add_q(&ht), c.clone().min(p0))
}

/// `(x₀, x₁, y₁, …, y_{n−1})` with `x₀x₁ = h(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarietyPoint {
    pub x0: NovikovElement,
    pub x1: NovikovElement,
    pub y: Vec<NovikovElement>,
}

impl VarietyPoint {
    /// `x₀x₁ − h(y)`.
    pub fn defect(&self, h: &LaurentPolynomial) -> Result<NovikovElement, FibrationError> {
        Ok(&(&self.x0 * &self.x1) - &h.eval(&self.y)?)
    }

    pub fn check(&self, h: &LaurentPolynomial) -> Result<(), FibrationError> {
        if let Some(k) = self.y.iter().position(NovikovElement::is_zero) {
            return Err(FibrationError::ZeroCoordinate(k + 1));
        }
        let lhs = &self.x0 * &self.x1;
        let rhs = h.eval(&self.y)?;
        let d = &lhs - &rhs;
        // relative to the size of the coefficients being compared
        let ok = d.terms().iter().all(|(e, c)| {
            let scale = 1.0 + lhs.coeff(e).norm().max(rhs.coeff(e).norm());
            c.norm() <= COEFF_TOL * scale
        });
        if !ok {
            return Err(FibrationError::NotOnVariety(d.to_literal()));
        }
        Ok(())
    }

    pub fn val_y(&self) -> Vec<Q> {
        self.y.iter().map(NovikovElement::val_or_precision).collect()
    }
}

fn min_val(x: &NovikovElement, bound: Q) -> Q {
    match x.val().finite() {
        Some(v) if *v < bound => v.clone(),
        _ => bound,
    }
}

/// `F(z) = (min{val x₀, a₀(v̄)}, min{val x₁, ψ₀(v̄)}, v̄)`; exact since all
/// valuations and `ψ₀` are rational.
#[allow(non_snake_case)]
pub fn F_map(
    z: &VarietyPoint,
    psi: &dyn PsiModel,
    h: &LaurentPolynomial,
    h_trop: &TropicalPolynomial,
) -> Result<ImagePoint, FibrationError> {
    z.check(h)?;
    let vbar = z.val_y();
    let (a0, a1) = corner(&vbar, psi, h_trop);
    Ok(ImagePoint {
        u0: Coord::Exact(min_val(&z.x0, a0)),
        u1: Coord::Exact(min_val(&z.x1, a1)),
        qbar: vbar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FPointClass {
    /// `v̄` off the tropical hypersurface.
    SmoothOff,
    /// On the hypersurface with `val x₀ < a₀`.
    SmoothX0,
    /// On the hypersurface with `val x₀ ≥ a₀`, `val x₁ < a₁`.
    SmoothX1,
    /// Over a corner point on the hypersurface.
    Singular,
}

impl FPointClass {
    pub fn label(&self) -> &'static str {
        match self {
            FPointClass::SmoothOff => "i",
            FPointClass::SmoothX0 => "ii-a",
            FPointClass::SmoothX1 => "ii-b",
            FPointClass::Singular => "ii-c",
        }
    }

    pub fn is_singular(&self) -> bool {
        *self == FPointClass::Singular
    }
}

#[allow(non_snake_case)]
pub fn classify_F_point(
    z: &VarietyPoint,
    psi: &dyn PsiModel,
    h: &LaurentPolynomial,
    h_trop: &TropicalPolynomial,
) -> Result<FPointClass, FibrationError> {
    z.check(h)?;
    let vbar = z.val_y();
    if !h_trop.on_hypersurface(&vbar) {
        return Ok(FPointClass::SmoothOff);
    }
    let (a0, a1) = corner(&vbar, psi, h_trop);
    let below = |x: &NovikovElement, a: &Q| x.val().finite().is_some_and(|v| v < a);
    Ok(if below(&z.x0, &a0) {
        FPointClass::SmoothX0
    } else if below(&z.x1, &a1) {
        FPointClass::SmoothX1
    } else {
        FPointClass::Singular
    })
}

/// `f = j⁻¹ ∘ F` on `{val(x₁) > 0}`.
pub fn f_map(
    z: &VarietyPoint,
    psi: &dyn PsiModel,
    h: &LaurentPolynomial,
    h_trop: &TropicalPolynomial,
) -> Result<BasePoint, FibrationError> {
    if let Some(v) = z.x1.val().finite() {
        if !v.is_positive() {
            return Err(FibrationError::NotInDomain(fmt_q(v)));
        }
    }
    let p = F_map(z, psi, h, h_trop)?;
    j_invert(&p, psi, h_trop)
}

/// Component of the singular fiber `f⁻¹(0)` for `n = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SingularFiberClass {
    /// The Maurer-Cartan component `𝐒₁`: `val h(y) > h_trop(val y)`.
    MaurerCartan,
    /// The extra component `𝐒₂`: `val h(y) = h_trop(val y)`.
    Extra,
}

/// Rescaled coordinates `z₀ = T^{ψ₀}x₀`, `z₁ = T^{−ψ₀}x₁` on a corner fiber.
pub fn corner_coordinates(z: &VarietyPoint, psi0: &Q) -> (NovikovElement, NovikovElement) {
    let neg = -psi0;
    (z.x0.shift(psi0), z.x1.shift(&neg))
}

/// Splits points of the singular fiber over the corner into the
/// Maurer-Cartan part and the rest. For `h = 1 + y` this is the test
/// `val(1 + y) > 0`.
pub fn classify_singular_fiber_point_n2(
    z: &VarietyPoint,
    psi: &dyn PsiModel,
    h: &LaurentPolynomial,
    h_trop: &TropicalPolynomial,
) -> Result<SingularFiberClass, FibrationError> {
    if z.y.len() != 1 {
        return Err(FibrationError::NotOnSingularFiber(format!(
            "expected n = 2, got {} y-coordinates",
            z.y.len()
        )));
    }
    let q = f_map(z, psi, h, h_trop).map_err(|e| FibrationError::NotOnSingularFiber(e.to_string()))?;
    if !(q.qn.as_exact().is_some_and(Zero::is_zero) && h_trop.on_hypersurface(&q.qbar)) {
        return Err(FibrationError::NotOnSingularFiber(format!("f(z) = {q}")));
    }
    let hv = h.eval(&z.y)?.clean(COEFF_TOL);
    let ht = h_trop.value(&q.qbar);
    Ok(match hv.val().finite() {
        Some(v) if *v <= ht => SingularFiberClass::Extra,
        _ => SingularFiberClass::MaurerCartan,
    })
}
