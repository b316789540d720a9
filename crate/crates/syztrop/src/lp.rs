//! Exact rational linear programming: dense two-phase simplex with Bland's
//! rule. Problem sizes here are tiny (a handful of constraints), so clarity
//! wins over speed.

use crate::rational::Q;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { value: Q, x: Vec<Q> },
    Unbounded,
    Infeasible,
}

struct Tableau {
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Q {
        &self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for v in self.rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, p) in row.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `obj · z` over columns `< allowed`. Returns false if unbounded.
    fn run(&mut self, obj: &[Q], allowed: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut r = obj[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !obj[b].is_zero() && !self.rows[i][j].is_zero() {
                        r -= &obj[b] * &self.rows[i][j];
                    }
                }
                if r.is_positive() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return true;
            };
            let mut best: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][j];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return false,
                Some((i, _)) => self.pivot(i, j),
            }
        }
    }

    fn objective(&self, obj: &[Q]) -> Q {
        self.basis
            .iter()
            .enumerate()
            .fold(Q::zero(), |acc, (i, &b)| acc + &obj[b] * self.rhs(i))
    }
}

/// Maximizes `c · x` subject to `a x ≤ b` with `x` free.
pub fn maximize(c: &[Q], a: &[Vec<Q>], b: &[Q]) -> LpResult {
    let n = c.len();
    let m = a.len();
    let nz = 2 * n;
    let neg: Vec<usize> = (0..m).filter(|&i| b[i].is_negative()).collect();
    let nart = neg.len();
    let ncols = nz + m + nart;
    let mut rows = vec![vec![Q::zero(); ncols + 1]; m];
    let mut basis = vec![0; m];
    let mut k = 0;
    for i in 0..m {
        let sign = if b[i].is_negative() { -Q::one() } else { Q::one() };
        for j in 0..n {
            rows[i][j] = &sign * &a[i][j];
            rows[i][n + j] = -&rows[i][j];
        }
        rows[i][nz + i] = sign.clone();
        rows[i][ncols] = &sign * &b[i];
        if sign.is_negative() {
            rows[i][nz + m + k] = Q::one();
            basis[i] = nz + m + k;
            k += 1;
        } else {
            basis[i] = nz + i;
        }
    }
    let mut t = Tableau { rows, basis, ncols };
    if nart > 0 {
        let mut obj = vec![Q::zero(); ncols];
        for o in obj.iter_mut().skip(nz + m) {
            *o = -Q::one();
        }
        t.run(&obj, ncols);
        if t.objective(&obj).is_negative() {
            return LpResult::Infeasible;
        }
        for i in 0..m {
            if t.basis[i] >= nz + m {
                if let Some(j) = (0..nz + m).find(|&j| !t.rows[i][j].is_zero()) {
                    t.pivot(i, j);
                }
            }
        }
    }
    let mut obj = vec![Q::zero(); ncols];
    for j in 0..n {
        obj[j] = c[j].clone();
        obj[n + j] = -c[j].clone();
    }
    if !t.run(&obj, nz + m) {
        return LpResult::Unbounded;
    }
    let mut z = vec![Q::zero(); ncols];
    for (i, &bcol) in t.basis.iter().enumerate() {
        z[bcol] = t.rhs(i).clone();
    }
    let x: Vec<Q> = (0..n).map(|j| &z[j] - &z[n + j]).collect();
    LpResult::Optimal {
        value: t.objective(&obj),
        x,
    }
}

/// Whether `{x : a x ≤ b}` is nonempty.
pub fn feasible(a: &[Vec<Q>], b: &[Q], nvars: usize) -> bool {
    !matches!(maximize(&vec![Q::zero(); nvars], a, b), LpResult::Infeasible)
}

/// Whether a nonempty polyhedron `{x : a x ≤ b}` is bounded.
pub fn bounded(a: &[Vec<Q>], b: &[Q], nvars: usize) -> bool {
    for k in 0..nvars {
        for s in [Q::one(), -Q::one()] {
            let mut c = vec![Q::zero(); nvars];
            c[k] = s;
            if matches!(maximize(&c, a, b), LpResult::Unbounded) {
                return false;
            }
        }
    }
    true
}
