use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::Assignment;

/// Maximum-score one-to-one assignment (Kuhn-Munkres with potentials).
///
/// Rectangular inputs are allowed; exactly `min(rows, cols)` matches are made.
pub fn hungarian(score: &DMatrix<f64>) -> Result<Assignment> {
    let (rows, cols) = score.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    if score.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hungarian scores must be finite".into()));
    }
    let matches = if rows <= cols {
        solve_min(rows, cols, |i, j| -score[(i, j)])
    } else {
        solve_min(cols, rows, |i, j| -score[(j, i)])
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect()
    };
    Assignment::from_matches(rows, cols, &matches)
}

/// Row assignment for each of the `n` rows of an `n x m` (`n <= m`) cost matrix.
fn solve_min(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) assigned to column j; p[0] is the row being inserted.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] > 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    out.sort_unstable();
    out
}
