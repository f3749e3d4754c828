mod common;

use common::{brute_force_assignment, injections, permutations, rng};
use mlsync::kernels::{hungarian, sinkhorn, top_eigenpairs};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn total(score: &DMatrix<f64>, x: &mlsync::Assignment) -> f64 {
    score.component_mul(x.matrix()).sum()
}

#[test]
fn hungarian_equals_exhaustive_search_up_to_six() {
    let mut r = rng(1);
    for case in 0..200 {
        let rows = r.random_range(1..=6);
        let cols = r.random_range(1..=6);
        let score = DMatrix::from_fn(rows, cols, |_, _| r.random_range(-5.0..5.0));
        let x = hungarian(&score).unwrap();
        assert!(x.is_one_to_one());
        assert_eq!(x.matches().len(), rows.min(cols), "case {case}");
        let best = brute_force_assignment(&score);
        assert!(
            (total(&score, &x) - best).abs() < 1e-12,
            "case {case}: {} vs {best}",
            total(&score, &x)
        );
    }
}

#[test]
fn hungarian_recovers_the_unique_argmax_on_5x5() {
    let mut r = rng(2);
    let perms = permutations(5);
    for _ in 0..20 {
        let score = DMatrix::from_fn(5, 5, |_, _| r.random::<f64>());
        let best = perms
            .iter()
            .max_by(|a, b| {
                let sa: f64 = a.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
                let sb: f64 = b.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        let expected: Vec<(usize, usize)> = best.iter().copied().enumerate().collect();
        assert_eq!(hungarian(&score).unwrap().matches(), expected);
    }
}

#[test]
fn hungarian_beats_random_feasible_assignments() {
    let mut r = rng(3);
    let n = 12;
    let score = DMatrix::from_fn(n, n, |_, _| r.random_range(0.0..1.0));
    let opt = total(&score, &hungarian(&score).unwrap());
    for _ in 0..1000 {
        let p = common::random_permutation(&mut r, n);
        let s: f64 = p.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
        assert!(opt >= s - 1e-12);
    }
    // Rectangular: all injections of 3 rows into 4 columns.
    let score = DMatrix::from_fn(3, 4, |_, _| r.random::<f64>());
    let opt = total(&score, &hungarian(&score).unwrap());
    for p in injections(3, 4) {
        let s: f64 = p.iter().enumerate().map(|(i, &j)| score[(i, j)]).sum();
        assert!(opt >= s - 1e-12);
    }
}

/// Plain alternating normalization with no early exit.
fn reference_sinkhorn(m: &DMatrix<f64>, sweeps: usize) -> DMatrix<f64> {
    let mut x = m.clone();
    for _ in 0..sweeps {
        for mut row in x.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        for mut col in x.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
    }
    x
}

#[test]
fn sinkhorn_symmetric_limit_matches_fixed_point_oracle() {
    let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 4.0]);
    let oracle = reference_sinkhorn(&m, 200);
    let out = sinkhorn(&m, 1000, 1e-12).unwrap();
    assert!(out.converged);
    assert!((&out.matrix - &oracle).abs().max() < 1e-12);
    assert!((out.matrix[(0, 0)] - 0.8).abs() < 1e-12);
}

#[test]
fn sinkhorn_random_positive_squares_reach_unit_margins() {
    let mut r = rng(4);
    for _ in 0..200 {
        let n = r.random_range(1..=12);
        let m = DMatrix::from_fn(n, n, |_, _| r.random_range(0.01..10.0));
        let out = sinkhorn(&m, 100_000, 1e-12).unwrap();
        assert!(out.converged);
        for row in out.matrix.row_iter() {
            assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
        for col in out.matrix.column_iter() {
            assert!((col.sum() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn sinkhorn_keeps_symmetry_and_zero_pattern() {
    let mut r = rng(5);
    let mut m = common::random_symmetric(&mut r, 6, 0.1, 1.0);
    m[(1, 4)] = 0.0;
    m[(4, 1)] = 0.0;
    let out = sinkhorn(&m, 10_000, 1e-12).unwrap().matrix;
    assert_eq!(out[(1, 4)], 0.0);
    assert!((&out - out.transpose()).abs().max() < 1e-10);
}

#[test]
fn top_eigenpair_of_rank_one_matrix() {
    let mut r = rng(6);
    for n in [2, 5, 17, 40] {
        let u = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0)).normalize();
        let a = &u * u.transpose();
        let e = top_eigenpairs(&a, 1).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-10);
        let v = e.vector(0);
        assert!((v.dot(&u).abs() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn top_eigenpairs_residuals_and_orthonormality() {
    let mut r = rng(7);
    for _ in 0..200 {
        let n = r.random_range(1..=40);
        let k = r.random_range(1..=n);
        let a = common::random_symmetric(&mut r, n, -1.0, 1.0);
        let e = top_eigenpairs(&a, k).unwrap();
        let fro = a.norm();
        for i in 0..k {
            let v = e.vector(i);
            assert!((&a * &v - &v * e.values[i]).norm() <= 1e-8 * fro.max(1e-300));
            assert!((v.dot(&(&a * &v)) - e.values[i]).abs() <= 1e-8 * fro.max(1.0));
            if i > 0 {
                assert!(e.values[i] <= e.values[i - 1]);
            }
        }
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::identity(k, k)).abs().max() < 1e-8);
    }
}
