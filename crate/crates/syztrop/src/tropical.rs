//! Min-plus polynomials, tropicalization, tropical hypersurfaces and the
//! chamber decomposition of the base.

use crate::laurent::LaurentPolynomial;
use crate::lp;
use crate::rational::{dot_int, fmt_q, parse_q, Q};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TropicalError {
    #[error("a tropical polynomial needs at least one term")]
    Empty,
    #[error("duplicate exponent vector {0:?}")]
    DuplicateExponent(Vec<i64>),
    #[error("exponent vector {0:?} does not have {1} entries")]
    DimensionMismatch(Vec<i64>, usize),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("malformed tropical polynomial JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TropTerm {
    pub c: Q,
    pub e: Vec<i64>,
}

/// `min_k (c_k + ⟨e_k, q̄⟩)`. Term order is significant: indices returned by
/// [`TropicalPolynomial::eval`] and [`ChamberTag::Wall`] refer to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TropicalPolynomial {
    nvars: usize,
    terms: Vec<TropTerm>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    c: String,
    e: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    terms: Vec<TermJson>,
}

/// Position of a base point relative to the wall `q_n = 0` and `Π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChamberTag {
    Plus,
    Minus,
    /// On the wall, in the component where term `k` (1-based) is the unique
    /// minimizer.
    Wall(usize),
    Discriminant,
}

impl TropicalPolynomial {
    pub fn new(nvars: usize, terms: Vec<TropTerm>) -> Result<Self, TropicalError> {
        if terms.is_empty() {
            return Err(TropicalError::Empty);
        }
        let mut seen = BTreeSet::new();
        for t in &terms {
            if t.e.len() != nvars {
                return Err(TropicalError::DimensionMismatch(t.e.clone(), nvars));
            }
            if !seen.insert(t.e.clone()) {
                return Err(TropicalError::DuplicateExponent(t.e.clone()));
            }
        }
        Ok(TropicalPolynomial { nvars, terms })
    }

    /// `min{0, q₁, …, q_m}` with the constant term first.
    pub fn standard(m: usize) -> Self {
        let mut terms = vec![TropTerm {
            c: Q::zero(),
            e: vec![0; m],
        }];
        for k in 0..m {
            let mut e = vec![0; m];
            e[k] = 1;
            terms.push(TropTerm { c: Q::zero(), e });
        }
        TropicalPolynomial { nvars: m, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[TropTerm] {
        &self.terms
    }

    fn term_value(&self, k: usize, q: &[Q]) -> Q {
        &self.terms[k].c + dot_int(&self.terms[k].e, q)
    }

    /// Minimum value and the full set of minimizing term indices (0-based).
    pub fn eval(&self, q: &[Q]) -> (Q, Vec<usize>) {
        assert_eq!(q.len(), self.nvars, "dimension mismatch in trop_eval");
        let mut best: Option<Q> = None;
        let mut idx = Vec::new();
        for k in 0..self.terms.len() {
            let v = self.term_value(k, q);
            match best.as_ref().map(|b| v.cmp(b)) {
                None | Some(Ordering::Less) => {
                    best = Some(v);
                    idx.clear();
                    idx.push(k);
                }
                Some(Ordering::Equal) => idx.push(k),
                Some(Ordering::Greater) => {}
            }
        }
        (best.expect("nonempty"), idx)
    }

    pub fn value(&self, q: &[Q]) -> Q {
        self.eval(q).0
    }

    pub fn on_hypersurface(&self, q: &[Q]) -> bool {
        self.eval(q).1.len() >= 2
    }

    /// Equality as sets of terms.
    pub fn same_terms(&self, other: &Self) -> bool {
        let a: BTreeSet<&TropTerm> = self.terms.iter().collect();
        let b: BTreeSet<&TropTerm> = other.terms.iter().collect();
        self.nvars == other.nvars && a == b
    }

    /// Smallest `t ≥ 0` at which `p + t d` lies on the hypersurface, if any.
    pub fn first_hit_along(&self, p: &[Q], d: &[Q]) -> Option<Q> {
        let (_, arg) = self.eval(p);
        if arg.len() >= 2 {
            return Some(Q::zero());
        }
        let a = arg[0];
        let va = self.term_value(a, p);
        let sa = dot_int(&self.terms[a].e, d);
        let mut best: Option<Q> = None;
        for k in 0..self.terms.len() {
            if k == a {
                continue;
            }
            let sk = dot_int(&self.terms[k].e, d);
            if sk < sa {
                let t = (self.term_value(k, p) - &va) / (&sa - &sk);
                if best.as_ref().is_none_or(|b| t < *b) {
                    best = Some(t);
                }
            }
        }
        best
    }

    /// Exact parameters `t ∈ [t0, t1]` where `p + t d` meets the hypersurface,
    /// sorted. Segments lying inside the hypersurface contribute their
    /// endpoints only.
    pub fn hits_on_segment(&self, p: &[Q], d: &[Q], t0: &Q, t1: &Q) -> Vec<Q> {
        let vals: Vec<(Q, Q)> = (0..self.terms.len())
            .map(|k| (self.term_value(k, p), dot_int(&self.terms[k].e, d)))
            .collect();
        let mut ts = BTreeSet::new();
        for k in 0..vals.len() {
            for l in k + 1..vals.len() {
                let ds = &vals[k].1 - &vals[l].1;
                if ds.is_zero() {
                    continue;
                }
                let t = (&vals[l].0 - &vals[k].0) / ds;
                if &t >= t0 && &t <= t1 {
                    ts.insert(t);
                }
            }
        }
        ts.into_iter()
            .filter(|t| {
                let pt: Vec<Q> = p.iter().zip(d).map(|(a, b)| a + t * b).collect();
                self.on_hypersurface(&pt)
            })
            .collect()
    }

    /// Constraints `A x ≤ b` describing the closed cell where term `i` is
    /// minimal; with `slack` an extra last column for a uniform margin.
    fn cell_constraints(&self, i: usize, slack: bool) -> (Vec<Vec<Q>>, Vec<Q>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for j in 0..self.terms.len() {
            if j == i {
                continue;
            }
            let mut row: Vec<Q> = self.terms[i]
                .e
                .iter()
                .zip(&self.terms[j].e)
                .map(|(x, y)| Q::from_integer((x - y).into()))
                .collect();
            if slack {
                row.push(Q::from_integer(1.into()));
            }
            a.push(row);
            b.push(&self.terms[j].c - &self.terms[i].c);
        }
        (a, b)
    }

    /// Whether the region where term `i` is the unique minimizer has
    /// nonempty interior.
    pub fn cell_has_interior(&self, i: usize) -> bool {
        let (mut a, mut b) = self.cell_constraints(i, true);
        let mut cap = vec![Q::zero(); self.nvars + 1];
        cap[self.nvars] = Q::from_integer(1.into());
        a.push(cap.clone());
        b.push(Q::from_integer(1.into()));
        match lp::maximize(&cap, &a, &b) {
            lp::LpResult::Optimal { value, .. } => value.is_positive(),
            lp::LpResult::Unbounded => true,
            lp::LpResult::Infeasible => false,
        }
    }

    /// Whether the cell of term `i` is a bounded region with nonempty interior.
    pub fn cell_is_bounded(&self, i: usize) -> bool {
        if !self.cell_has_interior(i) {
            return false;
        }
        let (a, b) = self.cell_constraints(i, false);
        lp::bounded(&a, &b, self.nvars)
    }

    /// Indices of terms whose cells are bounded.
    pub fn bounded_cells(&self) -> BTreeSet<usize> {
        (0..self.terms.len()).filter(|&i| self.cell_is_bounded(i)).collect()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(PolyJson {
            terms: self
                .terms
                .iter()
                .map(|t| TermJson {
                    c: fmt_q(&t.c),
                    e: t.e.clone(),
                })
                .collect(),
        })
        .expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, TropicalError> {
        let pj: PolyJson = serde_json::from_str(s).map_err(|e| TropicalError::Json(e.to_string()))?;
        let nvars = pj.terms.first().map(|t| t.e.len()).ok_or(TropicalError::Empty)?;
        let mut terms = Vec::new();
        for t in pj.terms {
            let c = parse_q(&t.c).map_err(|e| TropicalError::Json(e.to_string()))?;
            terms.push(TropTerm { c, e: t.e });
        }
        Self::new(nvars, terms)
    }
}

/// Term-wise `(val(coefficient), exponent)`, in the polynomial's term order.
pub fn tropicalize(h: &LaurentPolynomial) -> Result<TropicalPolynomial, TropicalError> {
    let mut terms = Vec::with_capacity(h.len());
    for (e, c) in h.terms() {
        let v = c
            .val()
            .finite()
            .cloned()
            .ok_or_else(|| TropicalError::DomainError(format!("zero coefficient at {e:?}")))?;
        terms.push(TropTerm { c: v, e: e.clone() });
    }
    TropicalPolynomial::new(h.nvars(), terms)
}

/// Chamber of `q = (q̄, q_n)` given the sign of `q_n`.
pub fn classify_parts(h_trop: &TropicalPolynomial, qbar: &[Q], qn_sign: Ordering) -> ChamberTag {
    match qn_sign {
        Ordering::Greater => ChamberTag::Plus,
        Ordering::Less => ChamberTag::Minus,
        Ordering::Equal => {
            let (_, arg) = h_trop.eval(qbar);
            if arg.len() >= 2 {
                ChamberTag::Discriminant
            } else {
                ChamberTag::Wall(arg[0] + 1)
            }
        }
    }
}

/// Chamber of a rational base point `q = (q̄, q_n)`.
pub fn classify_base_point(h_trop: &TropicalPolynomial, q: &[Q]) -> ChamberTag {
    let (qbar, qn) = q.split_at(q.len() - 1);
    classify_parts(h_trop, qbar, qn[0].cmp(&Q::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::novikov::NovikovElement;
    use crate::rational::{q, qr};

    fn std2() -> TropicalPolynomial {
        TropicalPolynomial::standard(2)
    }

    #[test]
    fn eval_examples() {
        let h = std2();
        assert_eq!(h.eval(&[q(-1), q(2)]), (q(-1), vec![1]));
        assert_eq!(h.eval(&[q(0), q(0)]), (q(0), vec![0, 1, 2]));
    }

    #[test]
    fn hypersurface_examples() {
        assert!(TropicalPolynomial::standard(1).on_hypersurface(&[q(0)]));
        assert!(std2().on_hypersurface(&[q(-1), q(-1)]));
        assert!(!std2().on_hypersurface(&[q(-1), q(2)]));
    }

    #[test]
    fn classification_examples() {
        let h1 = TropicalPolynomial::standard(1);
        assert_eq!(classify_base_point(&h1, &[q(3), qr(1, 2)]), ChamberTag::Plus);
        assert_eq!(classify_base_point(&std2(), &[q(-1), q(2), q(0)]), ChamberTag::Wall(2));
        assert_eq!(classify_base_point(&h1, &[q(0), q(0)]), ChamberTag::Discriminant);
        assert_eq!(classify_base_point(&h1, &[q(0), q(-1)]), ChamberTag::Minus);
    }

    #[test]
    fn tropicalize_examples() {
        let p = crate::novikov::default_precision();
        let h = LaurentPolynomial::from_terms(
            1,
            vec![(vec![1], NovikovElement::t_pow(qr(3, 2), p.clone()))],
        )
        .unwrap();
        let t = tropicalize(&h).unwrap();
        assert_eq!(t.terms(), &[TropTerm { c: qr(3, 2), e: vec![1] }]);
        assert_eq!(t.value(&[q(1)]), qr(5, 2));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert_eq!(TropicalPolynomial::new(1, vec![]), Err(TropicalError::Empty));
        let t = TropTerm { c: q(0), e: vec![1] };
        assert!(matches!(
            TropicalPolynomial::new(1, vec![t.clone(), t]),
            Err(TropicalError::DuplicateExponent(_))
        ));
    }

    #[test]
    fn line_search_hits_hypersurface() {
        let h = std2();
        let p = vec![q(3), q(5)];
        let d = vec![q(-1), q(0)];
        let t = h.first_hit_along(&p, &d).unwrap();
        assert_eq!(t, q(3));
        let hits = h.hits_on_segment(&[q(-4), q(1)], &[q(1), q(0)], &q(0), &q(8));
        // crosses q₁ = 0 (tie of 0 and q₁) while q₂ = 1 > 0
        assert_eq!(hits, vec![q(4)]);
    }

    #[test]
    fn bounded_cell_of_local_p2() {
        // y1 + y2 + T^{-1} + 1/(y1 y2)
        let terms = vec![
            TropTerm { c: q(0), e: vec![1, 0] },
            TropTerm { c: q(0), e: vec![0, 1] },
            TropTerm { c: q(-1), e: vec![0, 0] },
            TropTerm { c: q(0), e: vec![-1, -1] },
        ];
        let h = TropicalPolynomial::new(2, terms).unwrap();
        assert_eq!(h.bounded_cells(), [2].into_iter().collect());
        assert!(std2().bounded_cells().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let s = r#"{"terms":[{"c":"0","e":[0]},{"c":"157/50","e":[1]}]}"#;
        let h = TropicalPolynomial::from_json_str(s).unwrap();
        let back = TropicalPolynomial::from_json_str(&h.to_json_value().to_string()).unwrap();
        assert_eq!(h, back);
    }
}
