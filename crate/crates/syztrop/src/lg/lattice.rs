//! Unimodular column reduction of small integer matrices.

/// Returns a unimodular `U` (columns × columns) and the rank `r` such that
/// `p · U` vanishes outside its first `r` columns. Panics on overflow.
pub fn column_reduce(p: &[Vec<i64>], cols: usize) -> (Vec<Vec<i64>>, usize) {
    let mut a: Vec<Vec<i64>> = p.to_vec();
    let mut u: Vec<Vec<i64>> = (0..cols).map(|i| (0..cols).map(|j| i64::from(i == j)).collect()).collect();
    let mut piv = 0;
    for row in 0..a.len() {
        if piv == cols {
            break;
        }
        loop {
            // column in piv.. with the smallest nonzero entry in this row
            let best = (piv..cols).filter(|&j| a[row][j] != 0).min_by_key(|&j| a[row][j].abs());
            let Some(j) = best else {
                break;
            };
            swap_cols(&mut a, piv, j);
            swap_cols(&mut u, piv, j);
            let mut done = true;
            for k in piv + 1..cols {
                if a[row][k] != 0 {
                    let f = a[row][k].div_euclid(a[row][piv]);
                    sub_col(&mut a, k, piv, f);
                    sub_col(&mut u, k, piv, f);
                    if a[row][k] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                piv += 1;
                break;
            }
        }
    }
    (u, piv)
}

fn swap_cols(m: &mut [Vec<i64>], i: usize, j: usize) {
    if i != j {
        for r in m.iter_mut() {
            r.swap(i, j);
        }
    }
}

/// `col_k -= f · col_p`.
fn sub_col(m: &mut [Vec<i64>], k: usize, p: usize, f: i64) {
    for r in m.iter_mut() {
        r[k] = r[k].checked_sub(f.checked_mul(r[p]).expect("lattice overflow")).expect("lattice overflow");
    }
}

pub fn mat_vec_t(u: &[Vec<i64>], basis: &[Vec<i64>], j: usize) -> Vec<i64> {
    // Σ_i U[i][j] · basis[i]
    let n = basis[0].len();
    (0..n).map(|c| basis.iter().enumerate().map(|(i, b)| u[i][j] * b[c]).sum()).collect()
}

#[cfg(test)]
pub fn det_i64(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    // Bareiss fraction-free elimination
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(s) = (k + 1..n).find(|&s| a[s][k] != 0) else {
                return 0;
            };
            a.swap(k, s);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}
