//! Total-degree homotopy continuation for square Laurent systems over ℂ.
//!
//! Each equation is shifted to a polynomial, paired with the start system
//! `c_k^{d_k} = 1` and tracked from `t = 0` to `t = 1` along
//! `(1 − t)·γ·G + t·P` with a fixed generic `γ`, so the result is
//! deterministic. Only roots in the complex torus are returned.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

/// One equation: `(exponent, coefficient)` pairs.
pub type ComplexSystem = Vec<Vec<(Vec<i64>, C)>>;

const MAX_PATHS: usize = 200_000;
const MAX_STEPS: usize = 4000;
const DIVERGED: f64 = 1e8;

#[derive(Debug, Clone, Copy)]
pub struct HomotopyOptions {
    /// Roots with a coordinate below this modulus are treated as lying off the torus.
    pub torus_tol: f64,
    /// Two roots closer than this (relative) are merged.
    pub dedup_tol: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            torus_tol: 1e-7,
            dedup_tol: 1e-6,
        }
    }
}

struct Poly {
    terms: Vec<(Vec<u32>, C)>,
    degree: u32,
}

impl Poly {
    fn from_laurent(eq: &[(Vec<i64>, C)], n: usize) -> Poly {
        let shift: Vec<i64> = (0..n).map(|i| eq.iter().map(|t| t.0[i]).min().unwrap_or(0)).collect();
        let terms: Vec<(Vec<u32>, C)> = eq
            .iter()
            .map(|(e, c)| (e.iter().zip(&shift).map(|(a, s)| (a - s) as u32).collect(), *c))
            .collect();
        let degree = terms.iter().map(|t| t.0.iter().sum::<u32>()).max().unwrap_or(0);
        Poly { terms, degree }
    }

    fn eval(&self, x: &[C]) -> C {
        self.terms.iter().map(|(e, c)| c * monomial(x, e)).sum()
    }

    fn grad(&self, x: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|g| *g = C::default());
        for (e, c) in &self.terms {
            for k in 0..x.len() {
                if e[k] == 0 {
                    continue;
                }
                let mut d = e.clone();
                d[k] -= 1;
                out[k] += c * (e[k] as f64) * monomial(x, &d);
            }
        }
    }
}

fn monomial(x: &[C], e: &[u32]) -> C {
    x.iter().zip(e).fold(C::new(1.0, 0.0), |acc, (xi, &k)| acc * xi.powu(k))
}

struct Tracker<'a> {
    target: &'a [Poly],
    gamma: C,
}

impl Tracker<'_> {
    fn h(&self, x: &[C], t: f64) -> DVector<C> {
        let g = self.gamma * (1.0 - t);
        DVector::from_iterator(
            x.len(),
            self.target
                .iter()
                .enumerate()
                .map(|(k, p)| g * (x[k].powu(p.degree) - 1.0) + p.eval(x) * t),
        )
    }

    fn h_x(&self, x: &[C], t: f64) -> DMatrix<C> {
        let n = x.len();
        let g = self.gamma * (1.0 - t);
        let mut m = DMatrix::from_element(n, n, C::default());
        let mut row = vec![C::default(); n];
        for (k, p) in self.target.iter().enumerate() {
            p.grad(x, &mut row);
            for j in 0..n {
                m[(k, j)] = row[j] * t;
            }
            m[(k, k)] += g * (p.degree as f64) * x[k].powu(p.degree - 1);
        }
        m
    }

    fn h_t(&self, x: &[C]) -> DVector<C> {
        DVector::from_iterator(
            x.len(),
            self.target
                .iter()
                .enumerate()
                .map(|(k, p)| p.eval(x) - self.gamma * (x[k].powu(p.degree) - 1.0)),
        )
    }

    fn correct(&self, x: &mut [C], t: f64, iters: usize, tol: f64) -> bool {
        for _ in 0..iters {
            let Some(dx) = self.h_x(x, t).lu().solve(&self.h(x, t)) else {
                return false;
            };
            let scale = 1.0 + norm(x);
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi -= d;
            }
            if dx.norm() <= tol * scale {
                return true;
            }
        }
        false
    }

    fn track(&self, mut x: Vec<C>) -> Option<Vec<C>> {
        let (mut t, mut dt, mut streak) = (0.0f64, 0.02f64, 0);
        for _ in 0..MAX_STEPS {
            if t >= 1.0 {
                return Some(x);
            }
            let step = dt.min(1.0 - t);
            let tangent = self.h_x(&x, t).lu().solve(&-self.h_t(&x));
            let mut trial = x.clone();
            if let Some(v) = tangent {
                for (xi, vi) in trial.iter_mut().zip(v.iter()) {
                    *xi += vi * step;
                }
            }
            if self.correct(&mut trial, t + step, 4, 1e-10) {
                x = trial;
                t += step;
                streak += 1;
                if streak >= 3 {
                    dt = (dt * 1.6).min(0.1);
                    streak = 0;
                }
                if norm(&x) > DIVERGED {
                    return None;
                }
            } else {
                dt /= 2.0;
                streak = 0;
                if dt < 1e-13 {
                    return None;
                }
            }
        }
        None
    }
}

fn norm(x: &[C]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Start roots of `c_k^{d_k} = 1`, in lexicographic order.
fn start_roots(degrees: &[u32]) -> Vec<Vec<C>> {
    let mut out = vec![Vec::new()];
    for &d in degrees {
        let roots: Vec<C> = (0..d)
            .map(|j| C::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / d as f64))
            .collect();
        out = out
            .into_iter()
            .flat_map(|p| {
                roots.iter().map(move |r| {
                    let mut q = p.clone();
                    q.push(*r);
                    q
                })
            })
            .collect();
    }
    out
}

/// Residual of `P` at `x` relative to the size of its terms.
pub fn relative_residual(system: &ComplexSystem, x: &[C]) -> f64 {
    system
        .iter()
        .map(|eq| {
            let val: C = eq.iter().map(|(e, c)| c * laurent_monomial(x, e)).sum();
            let size: f64 = eq.iter().map(|(e, c)| (c * laurent_monomial(x, e)).norm()).sum();
            val.norm() / (1e-300 + size)
        })
        .fold(0.0, f64::max)
}

pub fn laurent_monomial(x: &[C], e: &[i64]) -> C {
    x.iter().zip(e).fold(C::new(1.0, 0.0), |acc, (xi, &k)| acc * xi.powi(k as i32))
}

/// Isolated roots of a square Laurent system in `(ℂ*)ⁿ`. `None` if the
/// Bezout number exceeds the path budget.
pub fn solve_torus_roots(system: &ComplexSystem, n: usize, opts: HomotopyOptions) -> Option<Vec<Vec<C>>> {
    assert_eq!(system.len(), n, "square system expected");
    let polys: Vec<Poly> = system.iter().map(|eq| Poly::from_laurent(eq, n)).collect();
    if polys.iter().any(|p| p.degree == 0) {
        // a nonzero constant equation has no roots
        return Some(Vec::new());
    }
    let degrees: Vec<u32> = polys.iter().map(|p| p.degree).collect();
    let paths = degrees.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))?;
    if paths > MAX_PATHS {
        return None;
    }
    let tracker = Tracker {
        target: &polys,
        gamma: C::from_polar(1.0, 2.1935),
    };
    let mut roots: Vec<Vec<C>> = Vec::new();
    for start in start_roots(&degrees) {
        let Some(mut x) = tracker.track(start) else {
            continue;
        };
        if !tracker.correct(&mut x, 1.0, 30, 1e-14) {
            continue;
        }
        if x.iter().any(|v| v.norm() < opts.torus_tol) {
            continue;
        }
        if relative_residual(system, &x) > 1e-8 {
            continue;
        }
        let scale = 1.0 + norm(&x);
        let dup = roots.iter().any(|r| {
            let d: f64 = r.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            d <= opts.dedup_tol * scale
        });
        if !dup {
            roots.push(x);
        }
    }
    Some(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn quadratic_roots() {
        // c - 1/c = 0
        let sys = vec![vec![(vec![1], c(1.0)), (vec![-1], c(-1.0))]];
        let mut roots = solve_torus_roots(&sys, 1, HomotopyOptions::default()).unwrap();
        roots.sort_by(|a, b| a[0].re.total_cmp(&b[0].re));
        assert_eq!(roots.len(), 2);
        assert!((roots[0][0] + 1.0).norm() < 1e-12);
        assert!((roots[1][0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn drops_roots_off_the_torus() {
        // x*y = 0 has no torus roots; x - 1 = 0 pins x
        let sys = vec![vec![(vec![1, 1], c(1.0))], vec![(vec![1, 0], c(1.0)), (vec![0, 0], c(-1.0))]];
        assert!(solve_torus_roots(&sys, 2, HomotopyOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn two_variable_system() {
        // x^2 = y, y^2 = 4 -> four roots
        let sys = vec![
            vec![(vec![2, 0], c(1.0)), (vec![0, 1], c(-1.0))],
            vec![(vec![0, 2], c(1.0)), (vec![0, 0], c(-4.0))],
        ];
        let roots = solve_torus_roots(&sys, 2, HomotopyOptions::default()).unwrap();
        assert_eq!(roots.len(), 4);
        for r in &roots {
            assert!(relative_residual(&sys, r) < 1e-12);
        }
    }
}
