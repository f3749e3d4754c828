//! Accuracy and cycle-consistency of a set of pairwise assignments.
//!
//! Assignments are always given for the `l < m` pairs in lexicographic order.

use crate::error::{Error, Result};
use crate::model::{compose, pair_list, Assignment, GroundTruth};

/// Fraction of ground-truth inlier correspondences recovered, pooled over pairs.
pub fn accuracy(assignments: &[Assignment], ground_truth: Option<&GroundTruth>) -> Result<f64> {
    let gt = ground_truth.ok_or(Error::MissingGroundTruth)?;
    let pairs = pair_list(gt.perms.len());
    if pairs.len() != assignments.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} ground-truth pairs",
            assignments.len(),
            pairs.len()
        )));
    }
    let mut hit = 0usize;
    let mut total = 0usize;
    for (&(l, m), x) in pairs.iter().zip(assignments) {
        let truth = gt.pairwise(l, m);
        if truth.rows() != x.rows() || truth.cols() != x.cols() {
            return Err(Error::DimensionMismatch(format!("pair ({l},{m}) shape")));
        }
        for (a, b) in truth.matrix().iter().zip(x.matrix().iter()) {
            if *a > 0.5 {
                total += 1;
                if *b > 0.5 {
                    hit += 1;
                }
            }
        }
    }
    Ok(if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    })
}

/// Agreement of `X_lm X_mn` with `X_ln` over every ordered triple of distinct
/// graphs: matched entries in both divided by matched entries in either.
/// Returns 1.0 when there is nothing to compare.
pub fn consistency(assignments: &[Assignment], sizes: &[usize]) -> Result<f64> {
    let n = sizes.len();
    let pairs = pair_list(n);
    if pairs.len() != assignments.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} pairs",
            assignments.len(),
            pairs.len()
        )));
    }
    if n < 3 {
        return Ok(1.0);
    }
    let mut table: Vec<Vec<Option<Assignment>>> = vec![vec![None; n]; n];
    for (&(l, m), x) in pairs.iter().zip(assignments) {
        table[m][l] = Some(x.transpose());
        table[l][m] = Some(x.clone());
    }
    let get = |l: usize, m: usize| table[l][m].as_ref().expect("pair present");

    let mut agree = 0usize;
    let mut either = 0usize;
    for l in 0..n {
        for m in 0..n {
            for k in 0..n {
                if l == m || m == k || l == k {
                    continue;
                }
                let composed = compose(get(l, m), get(m, k))?;
                let direct = get(l, k);
                for (a, b) in composed.matrix().iter().zip(direct.matrix().iter()) {
                    let (a, b) = (*a > 0.5, *b > 0.5);
                    if a || b {
                        either += 1;
                        if a && b {
                            agree += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(if either == 0 {
        1.0
    } else {
        agree as f64 / either as f64
    })
}
