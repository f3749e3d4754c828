use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sweep budget used inside the walker loop.
pub const LOOP_MAX_ITERS: usize = 30;
/// Tolerance used inside the walker loop.
pub const LOOP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    pub matrix: DMatrix<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Alternating row/column normalization of a nonnegative matrix.
///
/// For an `r x c` input with `r <= c` the row sums converge to 1 and the
/// column sums to `r / c` (and symmetrically when `r > c`). Each sweep scales
/// rows first and columns second; convergence is tested on the rows after the
/// column step. All-zero rows and columns are left untouched.
pub fn sinkhorn(m: &DMatrix<f64>, max_iters: usize, tol: f64) -> Result<SinkhornOutput> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite(
            "sinkhorn input must be finite and nonnegative".into(),
        ));
    }
    if m.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateDistribution);
    }

    let small = rows.min(cols) as f64;
    let row_target = small / rows as f64;
    let col_target = small / cols as f64;

    let mut x = m.clone();
    let mut row_sums = vec![0.0; rows];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iters {
        sweeps += 1;
        accumulate_row_sums(&x, &mut row_sums);
        for s in row_sums.iter_mut() {
            *s = if *s > 0.0 { row_target / *s } else { 1.0 };
        }
        for col in x.as_mut_slice().chunks_exact_mut(rows) {
            let mut s = 0.0;
            for (v, f) in col.iter_mut().zip(&row_sums) {
                *v *= f;
                s += *v;
            }
            if s > 0.0 {
                let f = col_target / s;
                col.iter_mut().for_each(|v| *v *= f);
            }
        }
        accumulate_row_sums(&x, &mut row_sums);
        let worst = row_sums
            .iter()
            .filter(|&&s| s > 0.0)
            .map(|s| (s - row_target).abs())
            .fold(0.0f64, f64::max);
        if worst <= tol {
            converged = true;
            break;
        }
    }
    Ok(SinkhornOutput {
        matrix: x,
        converged,
        sweeps,
    })
}

/// Row sums of a column-major matrix, accumulated column by column.
fn accumulate_row_sums(x: &DMatrix<f64>, out: &mut [f64]) {
    out.fill(0.0);
    for col in x.as_slice().chunks_exact(x.nrows()) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn run(m: &[f64], n: usize) -> DMatrix<f64> {
        sinkhorn(&DMatrix::from_row_slice(n, n, m), 10_000, 1e-12)
            .unwrap()
            .matrix
    }

    #[test]
    fn diagonal_scaling() {
        let out = run(&[2.0, 0.0, 0.0, 2.0], 2);
        assert_relative_eq!(out, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn uniform_input() {
        let out = run(&[1.0; 4], 2);
        assert_relative_eq!(out, DMatrix::from_element(2, 2, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn symmetric_two_by_two_limit() {
        // For [[a,b],[b,a]] one row pass already yields the bistochastic
        // fixed point [[a,b],[b,a]] / (a+b).
        let out = run(&[4.0, 1.0, 1.0, 4.0], 2);
        let expected = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8]);
        assert_relative_eq!(out, expected, epsilon = 1e-12);
    }

    #[test]
    fn rectangular_targets() {
        let m = DMatrix::from_fn(2, 4, |i, j| 1.0 + (i * 4 + j) as f64);
        let out = sinkhorn(&m, 1000, 1e-12).unwrap();
        assert!(out.converged);
        for r in out.matrix.row_iter() {
            assert_relative_eq!(r.sum(), 1.0, epsilon = 1e-10);
        }
        for c in out.matrix.column_iter() {
            assert_relative_eq!(c.sum(), 0.5, epsilon = 1e-10);
        }

        let tall = sinkhorn(&m.transpose(), 1000, 1e-12).unwrap();
        for c in tall.matrix.column_iter() {
            assert_relative_eq!(c.sum(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_input_is_degenerate() {
        let m = DMatrix::zeros(3, 3);
        assert!(matches!(
            sinkhorn(&m, 10, 1e-9),
            Err(Error::DegenerateDistribution)
        ));
    }

    #[test]
    fn budget_exhaustion_is_flagged_not_failed() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1e-6, 1e-6, 1e-9]);
        let out = sinkhorn(&m, 1, 1e-15).unwrap();
        assert!(!out.converged);
        assert_eq!(out.sweeps, 1);
    }

    #[test]
    fn preserves_zero_pattern() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 1.0, 2.0, 1.0, 0.0]);
        let out = sinkhorn(&m, 1000, 1e-12).unwrap();
        for (a, b) in m.iter().zip(out.matrix.iter()) {
            assert_eq!(*a == 0.0, *b == 0.0);
        }
    }
}
