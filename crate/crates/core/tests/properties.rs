mod common;

use common::{random_graph, random_pair, random_permutation, relabel, rng};
use mlsync::affinity::{build_pair_affinity, to_transition};
use mlsync::model::compose;
use mlsync::sync::{normalize_confidence, sync_confidence};
use mlsync::{mlrwm, Assignment, Kernel, WalkerParams};
use proptest::prelude::*;
use rand::Rng;

/// Random partial one-to-one assignment between `rows` and `cols` vertices.
fn random_assignment(seed: u64, rows: usize, cols: usize) -> Assignment {
    let mut r = rng(seed);
    let perm = random_permutation(&mut r, cols);
    let matches: Vec<_> = (0..rows.min(cols))
        .filter(|_| r.random_bool(0.7))
        .map(|i| (i, perm[i]))
        .collect();
    Assignment::from_matches(rows, cols, &matches).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_associative(seed in any::<u64>(), a in 1usize..=6, b in 1usize..=6, c in 1usize..=6, d in 1usize..=6) {
        let x = random_assignment(seed, a, b);
        let y = random_assignment(seed ^ 1, b, c);
        let z = random_assignment(seed ^ 2, c, d);
        let left = compose(&compose(&x, &y).unwrap(), &z).unwrap();
        let right = compose(&x, &compose(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn transition_rows_sum_to_one(
        seed in any::<u64>(),
        n_l in 1usize..=5,
        n_m in 1usize..=5,
        layers in 1usize..=4,
        w in prop_oneof![Just(0.0), 0.0f64..2.0],
        sparse in any::<bool>(),
    ) {
        let mut pair = random_pair(&mut rng(seed), n_l, n_m, layers, w);
        if sparse {
            // Zero a row and column pair to exercise the uniform fallback.
            let d = n_l * n_m;
            for block in &mut pair.intra {
                for k in 0..d {
                    block[(0, k)] = 0.0;
                    block[(k, 0)] = 0.0;
                }
            }
        }
        let t = to_transition(&pair);
        for s in t.row_sums().iter() {
            prop_assert!((s - 1.0).abs() <= 1e-12, "row sum {}", s);
        }
    }

    #[test]
    fn normalized_confidence_stays_in_range(raw in prop::collection::vec(-5.0f64..5.0, 1..8), tau in 0.0f64..1.0) {
        let s = normalize_confidence(&raw, tau).s;
        prop_assert!(s.iter().all(|&v| (tau..=1.0).contains(&v)));
        if raw.iter().any(|&c| c > 0.0) {
            prop_assert_eq!(s.iter().copied().fold(f64::MIN, f64::max), 1.0);
        }
    }

    #[test]
    fn identical_confidences_are_a_fixed_point(
        s in prop::collection::vec(0.1f64..=1.0, 1..6),
        copies in 1usize..5,
        mu in 0.0f64..=1.0,
    ) {
        let all = vec![s.clone(); copies];
        let (synced, merged) = sync_confidence(&all, mu).unwrap();
        for (a, b) in synced.iter().zip(&s) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
        for m in merged {
            for (a, b) in m.iter().zip(&s) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Relabeling the second graph permutes the matching accordingly.
    #[test]
    fn matching_is_equivariant_under_relabeling(seed in any::<u64>(), n in 3usize..=5) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 0, n, &[1.0, 0.6]);
        let h = random_graph(&mut r, 1, n, &[1.0, 0.6]);
        let perm = random_permutation(&mut r, n);
        let h_perm = relabel(&h, &perm, 1);

        let params = WalkerParams::default();
        let x = mlrwm(&build_pair_affinity(&g, &h, 0.3, Kernel::Beta, 1.0).unwrap(), &params).unwrap();
        let y = mlrwm(&build_pair_affinity(&g, &h_perm, 0.3, Kernel::Beta, 1.0).unwrap(), &params).unwrap();
        // Column v of the relabeled result is column perm[v] of the original.
        for i in 0..n {
            for v in 0..n {
                let (a, b) = (y.relaxed.matrix()[(i, v)], x.relaxed.matrix()[(i, perm[v])]);
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-12), "{} vs {}", a, b);
            }
        }
    }
}
