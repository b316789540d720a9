//! Chamber charts `T±`, the gluing `Φ`, the embedding `g` into
//! `x₀x₁ = h(y)`, and sampled verification of `F∘g = j∘π`.

use crate::fibration::{self, BasePoint, Coord, FibrationError, ImagePoint, PsiModel, VarietyPoint};
use crate::laurent::{LaurentError, LaurentPolynomial};
use crate::novikov::{default_precision, NovikovElement, NovikovError};
use crate::rational::{fmt_q, qr, Q};
use crate::sampling;
use crate::toric::{ToricError, ValidatedToric};
use crate::tropical::{tropicalize, TropicalError, TropicalPolynomial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MirrorError {
    #[error("point is not in the {0:?} chart: {1}")]
    NotInChart(Chamber, String),
    #[error("point is not in the chart overlap: {0}")]
    NotInOverlap(String),
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Fibration(#[from] FibrationError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
    #[error(transparent)]
    Toric(#[from] ToricError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Chamber {
    Plus,
    Minus,
}

/// `y = (y₁, …, y_n)` in the chart of a chamber.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chamber: Chamber,
    pub y: Vec<NovikovElement>,
}

impl ChartPoint {
    pub fn valuations(&self) -> Vec<Q> {
        self.y.iter().map(NovikovElement::val_or_precision).collect()
    }
}

/// Case split of the commutation proof: chamber, and whether `q̄` lies on
/// the tropical hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    PlusOnHypersurface,
    PlusOffHypersurface,
    MinusOnHypersurface,
    MinusOffHypersurface,
}

impl Branch {
    pub fn of(chamber: Chamber, on_hypersurface: bool) -> Self {
        match (chamber, on_hypersurface) {
            (Chamber::Plus, true) => Branch::PlusOnHypersurface,
            (Chamber::Plus, false) => Branch::PlusOffHypersurface,
            (Chamber::Minus, true) => Branch::MinusOnHypersurface,
            (Chamber::Minus, false) => Branch::MinusOffHypersurface,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Branch::PlusOnHypersurface => "1a",
            Branch::PlusOffHypersurface => "1b",
            Branch::MinusOnHypersurface => "2a",
            Branch::MinusOffHypersurface => "2b",
        }
    }

    pub const ALL: [Branch; 4] = [
        Branch::PlusOnHypersurface,
        Branch::PlusOffHypersurface,
        Branch::MinusOnHypersurface,
        Branch::MinusOffHypersurface,
    ];
}

/// `h`, its tropicalization, a ψ model and the wall margin `ε`.
#[derive(Clone)]
pub struct MirrorContext {
    h: LaurentPolynomial,
    h_trop: TropicalPolynomial,
    model: Arc<dyn PsiModel>,
    epsilon: Q,
    precision: Q,
}

impl MirrorContext {
    pub fn new(h: LaurentPolynomial, model: Arc<dyn PsiModel>) -> Result<Self, MirrorError> {
        let h_trop = tropicalize(&h)?;
        Ok(MirrorContext {
            h,
            h_trop,
            model,
            epsilon: qr(1, 10),
            precision: default_precision(),
        })
    }

    /// `h = 1 + y₁ + … + y_{n−1}`.
    pub fn standard(n: usize, model: Arc<dyn PsiModel>) -> Result<Self, MirrorError> {
        let data = crate::toric::validate(&crate::toric::ToricCYData::affine_space(n))?;
        Self::from_toric(&data, model, default_precision())
    }

    pub fn from_toric(data: &ValidatedToric, model: Arc<dyn PsiModel>, precision: Q) -> Result<Self, MirrorError> {
        let h = data.build_h(&precision)?;
        Ok(Self::new(h, model)?.with_precision(precision))
    }

    pub fn with_epsilon(mut self, epsilon: Q) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_precision(mut self, precision: Q) -> Self {
        self.precision = precision;
        self
    }

    /// Dimension `n`; chart points have `n` coordinates.
    pub fn dim(&self) -> usize {
        self.h.nvars() + 1
    }

    pub fn h(&self) -> &LaurentPolynomial {
        &self.h
    }

    pub fn h_trop(&self) -> &TropicalPolynomial {
        &self.h_trop
    }

    pub fn model(&self) -> &dyn PsiModel {
        self.model.as_ref()
    }

    pub fn epsilon(&self) -> &Q {
        &self.epsilon
    }

    pub fn precision(&self) -> &Q {
        &self.precision
    }

    /// `ψ₊ = ψ − h_trop` or `ψ₋ = ψ`.
    pub fn psi_chart(&self, chamber: Chamber, q: &BasePoint) -> Coord {
        let psi = self.model.psi(&q.qbar, &q.qn);
        match chamber {
            Chamber::Plus => psi.add_q(&-self.h_trop.value(&q.qbar)),
            Chamber::Minus => psi,
        }
    }

    /// Whether `q` lies in the thickened chamber of the chart.
    pub fn in_domain(&self, chamber: Chamber, q: &BasePoint) -> bool {
        let eps = Coord::Exact(self.epsilon.clone());
        let off = !self.h_trop.on_hypersurface(&q.qbar);
        match chamber {
            Chamber::Plus => q.qn.is_positive() || (off && q.qn.cmp_tol(&eps.neg()) == Ordering::Greater),
            Chamber::Minus => q.qn.cmp_tol(&Coord::zero()) == Ordering::Less || (off && q.qn.cmp_tol(&eps) == Ordering::Less),
        }
    }

    pub fn in_overlap(&self, q: &BasePoint) -> bool {
        self.in_domain(Chamber::Plus, q) && self.in_domain(Chamber::Minus, q)
    }

    fn check_dim(&self, p: &ChartPoint) -> Result<(), MirrorError> {
        if p.y.len() != self.dim() {
            return Err(MirrorError::Dimension { expected: self.dim(), got: p.y.len() });
        }
        if p.y.iter().any(NovikovElement::is_zero) {
            return Err(MirrorError::NotInChart(p.chamber, "zero coordinate".into()));
        }
        Ok(())
    }

    fn base_with(&self, p: &ChartPoint, shift_plus: bool) -> Result<BasePoint, MirrorError> {
        self.check_dim(p)?;
        let v = p.valuations();
        let (vbar, vn) = v.split_at(v.len() - 1);
        let mut c = vn[0].clone();
        if p.chamber == Chamber::Plus && shift_plus {
            c += self.h_trop.value(vbar);
        }
        let qn = self
            .model
            .psi_inv(vbar, &Coord::Exact(c))
            .map_err(|e| MirrorError::NotInChart(p.chamber, e.to_string()))?;
        let q = BasePoint::new(vbar.to_vec(), qn);
        if !self.in_domain(p.chamber, &q) {
            return Err(MirrorError::NotInChart(p.chamber, q.to_string()));
        }
        Ok(q)
    }

    /// Base point encoded by a chart point: `q̄ = val ȳ` and `val y_n = ψ±(q)`.
    pub fn base_of(&self, p: &ChartPoint) -> Result<BasePoint, MirrorError> {
        self.base_with(p, true)
    }

    /// Chart point over `q` with the given units, `y_k = T^{q_k}u_k` and
    /// `y_n = T^{ψ±(q)}u_n`. Needs a rational `ψ±(q)`.
    pub fn lift(&self, chamber: Chamber, q: &BasePoint, units: &[NovikovElement]) -> Result<ChartPoint, MirrorError> {
        if units.len() != self.dim() {
            return Err(MirrorError::Dimension { expected: self.dim(), got: units.len() });
        }
        if !self.in_domain(chamber, q) {
            return Err(MirrorError::NotInChart(chamber, q.to_string()));
        }
        let Coord::Exact(vn) = self.psi_chart(chamber, q) else {
            return Err(MirrorError::NotInChart(chamber, "psi value is not rational".into()));
        };
        let mut y: Vec<NovikovElement> = q.qbar.iter().zip(units).map(|(v, u)| u.shift(v)).collect();
        y.push(units[self.dim() - 1].shift(&vn));
        Ok(ChartPoint { chamber, y })
    }

    fn h_at(&self, ybar: &[NovikovElement]) -> Result<NovikovElement, MirrorError> {
        Ok(self.h.eval(ybar)?)
    }

    /// `Φ(ȳ, y_n) = (ȳ, y_n h(ȳ))` from the Plus to the Minus chart.
    pub fn glue_phi(&self, p: &ChartPoint) -> Result<ChartPoint, MirrorError> {
        if p.chamber != Chamber::Plus {
            return Err(MirrorError::NotInOverlap("glue_phi expects a Plus chart point".into()));
        }
        let q = self.base_of(p)?;
        if !self.in_overlap(&q) {
            return Err(MirrorError::NotInOverlap(q.to_string()));
        }
        let n = self.dim();
        let mut y = p.y.clone();
        y[n - 1] = &p.y[n - 1] * &self.h_at(&p.y[..n - 1])?;
        Ok(ChartPoint { chamber: Chamber::Minus, y })
    }

    /// Inverse gluing `(ȳ, y_n) ↦ (ȳ, y_n / h(ȳ))`.
    pub fn glue_phi_inverse(&self, p: &ChartPoint) -> Result<ChartPoint, MirrorError> {
        if p.chamber != Chamber::Minus {
            return Err(MirrorError::NotInOverlap("glue_phi_inverse expects a Minus chart point".into()));
        }
        let q = self.base_of(p)?;
        if !self.in_overlap(&q) {
            return Err(MirrorError::NotInOverlap(q.to_string()));
        }
        let n = self.dim();
        let mut y = p.y.clone();
        y[n - 1] = &p.y[n - 1] * &self.h_at(&p.y[..n - 1])?.invert()?;
        Ok(ChartPoint { chamber: Chamber::Plus, y })
    }

    /// `g₊ = (1/y_n, y_n h, ȳ)`, `g₋ = (h/y_n, y_n, ȳ)`.
    pub fn g_embed(&self, p: &ChartPoint) -> Result<VarietyPoint, MirrorError> {
        self.base_of(p)?;
        self.g_embed_unchecked(p)
    }

    fn g_embed_unchecked(&self, p: &ChartPoint) -> Result<VarietyPoint, MirrorError> {
        self.check_dim(p)?;
        let n = self.dim();
        let yn = &p.y[n - 1];
        let ybar = p.y[..n - 1].to_vec();
        let hv = self.h_at(&ybar)?;
        let (x0, x1) = match p.chamber {
            Chamber::Plus => (yn.invert()?, yn * &hv),
            Chamber::Minus => (&hv * &yn.invert()?, yn.clone()),
        };
        Ok(VarietyPoint { x0, x1, y: ybar })
    }

    #[allow(non_snake_case)]
    pub fn F_map(&self, z: &VarietyPoint) -> Result<ImagePoint, FibrationError> {
        fibration::F_map(z, self.model(), &self.h, &self.h_trop)
    }

    pub fn j_embed(&self, q: &BasePoint) -> ImagePoint {
        fibration::j_embed(q, self.model(), &self.h_trop)
    }

    pub fn f_map(&self, z: &VarietyPoint) -> Result<BasePoint, FibrationError> {
        fibration::f_map(z, self.model(), &self.h, &self.h_trop)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Reads Plus chart points with the Minus convention `ψ₋` (negative control).
    pub inject_bug: bool,
}

/// Outcome of [`verify_commutation`]; deterministic for a fixed seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutationReport {
    pub n: usize,
    pub model: String,
    pub exact: bool,
    pub samples_per_chamber: usize,
    pub total: usize,
    pub mismatches: usize,
    pub section_failures: usize,
    pub overlap_checked: usize,
    pub overlap_failures: usize,
    pub branches: BTreeMap<String, usize>,
    pub failures: Vec<String>,
}

impl CommutationReport {
    pub fn all_branches_covered(&self) -> bool {
        Branch::ALL.iter().all(|b| self.branches.get(b.label()).copied().unwrap_or(0) > 0)
    }

    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.section_failures == 0 && self.overlap_failures == 0 && self.all_branches_covered()
    }
}

struct Outcome {
    branch: Branch,
    mismatch: Option<String>,
    section_ok: bool,
    overlap: Option<bool>,
}

fn check_sample(ctx: &MirrorContext, chamber: Chamber, seed: u64, index: u64, opts: VerifyOptions) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let on_pi = sampling::coin(&mut rng, 1, 4);
    let p = sampling::sample_chart_point(ctx, chamber, on_pi, &mut rng);
    let q = match ctx.base_with(&p, !opts.inject_bug) {
        Ok(q) => q,
        Err(e) => {
            return Outcome {
                branch: Branch::of(chamber, on_pi),
                mismatch: Some(format!("sample {index}: {e}")),
                section_ok: false,
                overlap: None,
            }
        }
    };
    let branch = Branch::of(chamber, ctx.h_trop.on_hypersurface(&q.qbar));
    let rhs = ctx.j_embed(&q);
    let result = ctx
        .g_embed_unchecked(&p)
        .map_err(|e| e.to_string())
        .and_then(|z| ctx.F_map(&z).map(|lhs| (z, lhs)).map_err(|e| e.to_string()));
    let (mismatch, section_ok) = match result {
        Ok((z, lhs)) => {
            let same = if ctx.model.is_exact() { lhs.eq_exact(&rhs) } else { lhs.eq_tol(&rhs) };
            let mismatch = (!same).then(|| format!("sample {index} [{}]: F(g(y)) = {lhs}, j(q) = {rhs}", branch.label()));
            let section_ok = ctx.f_map(&z).map(|b| b.eq_tol(&q)).unwrap_or(false);
            (mismatch, section_ok)
        }
        Err(e) => (Some(format!("sample {index}: {e}")), false),
    };
    let overlap = (chamber == Chamber::Plus && ctx.in_overlap(&q)).then(|| overlap_consistent(ctx, &p, &q));
    Outcome { branch, mismatch, section_ok, overlap }
}

/// Roundoff allowance per unit of majorant in float series arithmetic.
const ROUNDOFF_REL: f64 = 1e-12;

/// `g₊ = g₋ ∘ Φ` and `base_of ∘ Φ = base_of` at a Plus overlap point.
fn overlap_consistent(ctx: &MirrorContext, p: &ChartPoint, q: &BasePoint) -> bool {
    let Ok(m) = ctx.glue_phi(p) else {
        return false;
    };
    let same_base = ctx.base_of(&m).map(|b| b.eq_tol(q)).unwrap_or(false);
    let (Ok(a), Ok(b)) = (ctx.g_embed(p), ctx.g_embed(&m)) else {
        return false;
    };
    // On the Minus side x0 = h / (y_n h). Off the hypersurface the inverse
    // can have coefficients far larger than the result, so roundoff is
    // bounded by the majorant of that computation, not absolutely.
    let n = ctx.dim();
    let bound = match (ctx.h_at(&m.y[..n - 1]), m.y[n - 1].majorant_inverse()) {
        (Ok(hv), Ok(inv)) => &hv.abs_series() * &inv,
        _ => return false,
    };
    let tol = 1e-9;
    same_base
        && a.x0.approx_eq_bounded(&b.x0, tol, &bound, ROUNDOFF_REL)
        && a.x1.approx_eq(&b.x1, tol)
        && a.y == b.y
}

/// Samples `samples_per_chamber` chart points in each chamber and checks
/// `F(g(y)) = j(base_of(y))`, `f(g(y)) = base_of(y)` and the gluing.
pub fn verify_commutation(
    ctx: &MirrorContext,
    samples_per_chamber: usize,
    seed: u64,
    opts: VerifyOptions,
) -> CommutationReport {
    let outcomes: Vec<Outcome> = (0..2 * samples_per_chamber as u64)
        .into_par_iter()
        .map(|i| {
            let chamber = if i % 2 == 0 { Chamber::Plus } else { Chamber::Minus };
            check_sample(ctx, chamber, seed, i, opts)
        })
        .collect();
    let mut report = CommutationReport {
        n: ctx.dim(),
        model: ctx.model.name().to_string(),
        exact: ctx.model.is_exact(),
        samples_per_chamber,
        total: outcomes.len(),
        mismatches: 0,
        section_failures: 0,
        overlap_checked: 0,
        overlap_failures: 0,
        branches: Branch::ALL.iter().map(|b| (b.label().to_string(), 0)).collect(),
        failures: Vec::new(),
    };
    for o in outcomes {
        *report.branches.get_mut(o.branch.label()).expect("all labels present") += 1;
        if let Some(m) = o.mismatch {
            report.mismatches += 1;
            if report.failures.len() < 10 {
                report.failures.push(m);
            }
        }
        if !o.section_ok {
            report.section_failures += 1;
        }
        if let Some(ok) = o.overlap {
            report.overlap_checked += 1;
            if !ok {
                report.overlap_failures += 1;
            }
        }
    }
    report
}

/// `υ(c) = (c̄, c_n + h_trop(c̄))`, the tropical shadow of `Φ` off the hypersurface.
pub fn affine_transition(h_trop: &TropicalPolynomial, c: &[Q]) -> Vec<Q> {
    let (cbar, cn) = c.split_at(c.len() - 1);
    let mut out = cbar.to_vec();
    out.push(&cn[0] + h_trop.value(cbar));
    out
}

pub fn format_point(v: &[Q]) -> String {
    format!("({})", v.iter().map(fmt_q).collect::<Vec<_>>().join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::ExactPL;
    use crate::novikov::C;
    use crate::rational::q;

    fn lit(s: &str) -> NovikovElement {
        s.parse().unwrap()
    }

    fn ctx2() -> MirrorContext {
        MirrorContext::standard(2, Arc::new(ExactPL::default())).unwrap()
    }

    #[test]
    fn base_of_minus_and_plus() {
        let ctx = ctx2();
        let p = ChartPoint { chamber: Chamber::Minus, y: vec![lit("T^3"), lit("2*T^{1/2}")] };
        // ψ = 1/2 < ψ₀ = 1 so q_n = 1 − 2 = −1
        assert_eq!(ctx.base_of(&p).unwrap(), BasePoint::exact(vec![q(3)], q(-1)));
        // Plus at q̄ = −1: ψ₊ = ψ + 1
        let p = ChartPoint { chamber: Chamber::Plus, y: vec![lit("T^-1"), lit("T^3")] };
        assert_eq!(ctx.base_of(&p).unwrap(), BasePoint::exact(vec![q(-1)], q(1)));
        // on the wall both encodings give the same base point
        let p = ChartPoint { chamber: Chamber::Plus, y: vec![lit("T^-1"), lit("T^2")] };
        let m = ChartPoint { chamber: Chamber::Minus, y: vec![lit("T^-1"), lit("T")] };
        assert_eq!(ctx.base_of(&m).unwrap(), BasePoint::exact(vec![q(-1)], q(0)));
        assert_eq!(ctx.base_of(&m).unwrap(), ctx.base_of(&p).unwrap());
        // Plus chart excludes q_n < 0 over the hypersurface
        let bad = ChartPoint { chamber: Chamber::Plus, y: vec![lit("1"), lit("T^{20/21}")] };
        assert!(matches!(ctx.base_of(&bad), Err(MirrorError::NotInChart(..))));
    }

    #[test]
    fn gluing_and_embedding() {
        let ctx = ctx2();
        let p = ChartPoint { chamber: Chamber::Plus, y: vec![lit("3*T^2"), lit("T")] };
        let qp = ctx.base_of(&p).unwrap();
        assert_eq!(qp, BasePoint::exact(vec![q(2)], q(0)));
        let m = ctx.glue_phi(&p).unwrap();
        assert!(m.y[1].approx_eq(&lit("T + 3*T^3"), 1e-12));
        let back = ctx.glue_phi_inverse(&m).unwrap();
        assert!(back.y[1].approx_eq(&p.y[1], 1e-12));
        let a = ctx.g_embed(&p).unwrap();
        let b = ctx.g_embed(&m).unwrap();
        assert!(a.x0.approx_eq(&b.x0, 1e-12) && a.x1.approx_eq(&b.x1, 1e-12));
        assert_eq!(ctx.F_map(&a).unwrap(), ctx.j_embed(&qp));
        let deep = ChartPoint { chamber: Chamber::Plus, y: vec![lit("T^2"), lit("T^3")] };
        assert!(matches!(ctx.glue_phi(&deep), Err(MirrorError::NotInOverlap(_))));
    }

    #[test]
    fn hand_checked_commutation_points() {
        let ctx = ctx2();
        // Plus over the hypersurface with cancellation: y₁ = −1 + T
        let p = ChartPoint { chamber: Chamber::Plus, y: vec![lit("-1 + T"), lit("T^2")] };
        let z = ctx.g_embed(&p).unwrap();
        assert_eq!(ctx.F_map(&z).unwrap().u1, Coord::Exact(q(1)));
        assert_eq!(ctx.F_map(&z).unwrap(), ctx.j_embed(&ctx.base_of(&p).unwrap()));
        // Minus off the hypersurface
        let p = ChartPoint { chamber: Chamber::Minus, y: vec![lit("T^-2"), lit("T^{1/3}")] };
        let z = ctx.g_embed(&p).unwrap();
        assert_eq!(z.x0.val().finite().cloned(), Some(qr(-7, 3)));
        assert_eq!(ctx.F_map(&z).unwrap(), ctx.j_embed(&ctx.base_of(&p).unwrap()));
        let v = ctx.h().eval(&[lit("T^-2")]).unwrap();
        assert_eq!(v.val().finite().cloned(), Some(q(-2)));
        assert_eq!(v.leading_coeff(), C::new(1.0, 0.0));
    }

    #[test]
    fn lift_round_trip() {
        let ctx = ctx2();
        let qp = BasePoint::exact(vec![qr(1, 2)], qr(3, 4));
        let units = vec![lit("2 + T"), lit("(0+1i)")];
        let p = ctx.lift(Chamber::Plus, &qp, &units).unwrap();
        assert_eq!(ctx.base_of(&p).unwrap(), qp);
    }

    #[test]
    fn small_verification_run() {
        let ctx = ctx2();
        let r = verify_commutation(&ctx, 200, 7, VerifyOptions::default());
        assert!(r.passed(), "{r:?}");
        assert_eq!(r, verify_commutation(&ctx, 200, 7, VerifyOptions::default()));
        let bad = verify_commutation(&ctx, 200, 7, VerifyOptions { inject_bug: true });
        assert!(bad.mismatches > 0);
    }
}
