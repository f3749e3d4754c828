mod common;

use mlsync::affinity::build_pair_affinity;
use mlsync::engine::pair_objective;
use mlsync::metrics::accuracy;
use mlsync::model::pair_list;
use mlsync::synthgen::{derive_graph, generate_reference};
use mlsync::{
    generate_problem, mlrwm, solve, Assignment, GroundTruth, Kernel, MLSyncParams, ProblemSet,
    SynthConfig,
};

fn unsynchronized() -> MLSyncParams {
    MLSyncParams {
        omega: 0.0,
        mu: 0.0,
        bootstrap_iters: 0,
        ..MLSyncParams::default()
    }
}

/// Noise-free problem whose channels all have beta = 1, so the truth is the
/// kernel's maximum on every candidate pair.
fn sharp_problem(seed: u64, n_graphs: usize, n_inliers: usize, n_channels: usize) -> ProblemSet {
    let cfg = SynthConfig {
        n_graphs,
        n_inliers,
        n_outliers: 0,
        n_channels,
        epsilon: 0.0,
        seed,
        ..SynthConfig::default()
    };
    let reference = generate_reference(&cfg);
    let (graphs, perms): (Vec<_>, Vec<_>) = (0..n_graphs)
        .map(|g| {
            let (mut graph, u) = derive_graph(&reference, &cfg, g);
            graph.beta = Some(vec![1.0; n_channels]);
            (graph, u)
        })
        .unzip();
    let pairs = pair_list(n_graphs)
        .into_iter()
        .map(|(l, m)| {
            build_pair_affinity(&graphs[l], &graphs[m], cfg.sigma2, Kernel::Beta, 1.0).unwrap()
        })
        .collect();
    ProblemSet {
        graphs,
        pairs,
        ground_truth: Some(GroundTruth {
            n_ref: n_inliers,
            perms,
        }),
        master_seed: seed,
    }
}

#[test]
fn single_pair_sync_confidence_is_the_pair_confidence() {
    let p = generate_problem(&SynthConfig {
        n_graphs: 2,
        n_inliers: 6,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let params = MLSyncParams {
        mu: 0.0,
        omega: 0.5,
        trace: true,
        ..MLSyncParams::default()
    };
    let report = solve(&p, &params).unwrap();
    let trace = report.trace.unwrap();
    assert_eq!(trace.s_sync.len(), report.iterations);
    assert_eq!(trace.s_sync.last().unwrap(), &report.confidences[0].s);
}

#[test]
fn without_synchronization_solve_equals_independent_walks() {
    for seed in 0..4 {
        let p = generate_problem(&SynthConfig {
            n_graphs: 4,
            n_inliers: 6,
            n_outliers: 1,
            n_channels: 3,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut params = unsynchronized();
        params.max_iters = params.walker.max_iters;
        params.conv_tol = params.walker.conv_tol;
        let report = solve(&p, &params).unwrap();
        for (pair, x) in p.pairs.iter().zip(&report.assignments) {
            let walk = mlrwm(pair, &params.walker).unwrap();
            assert_eq!(
                &mlsync::kernels::hungarian(walk.relaxed.matrix()).unwrap(),
                x,
                "seed {seed}"
            );
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let p = generate_problem(&SynthConfig {
        n_graphs: 5,
        n_inliers: 6,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let params = MLSyncParams {
        trace: true,
        ..MLSyncParams::default()
    };
    let a = solve(&p, &params).unwrap();
    let b = solve(&p, &params).unwrap();
    assert_eq!(a.assignments, b.assignments);
    assert_eq!(a.relaxed, b.relaxed);
    assert_eq!(a.trace.unwrap().deltas, b.trace.unwrap().deltas);
    assert_eq!(a.objective, b.objective);
}

#[test]
fn noise_free_sharp_problems_are_solved_exactly() {
    for seed in 0..3 {
        let p = sharp_problem(seed, 5, 6, 3);
        let report = solve(&p, &MLSyncParams::default()).unwrap();
        assert_eq!(
            accuracy(&report.assignments, p.ground_truth.as_ref()).unwrap(),
            1.0,
            "seed {seed}"
        );
        assert_eq!(report.consistency, 1.0);
    }
}

#[test]
fn two_by_two_output_maximizes_the_objective() {
    // Empty, four singletons and two full matchings: the seven feasible 2x2 assignments.
    let match_sets: [&[(usize, usize)]; 7] = [
        &[],
        &[(0, 0)],
        &[(0, 1)],
        &[(1, 0)],
        &[(1, 1)],
        &[(0, 0), (1, 1)],
        &[(0, 1), (1, 0)],
    ];
    let feasible: Vec<Assignment> = match_sets
        .iter()
        .map(|m| Assignment::from_matches(2, 2, m).unwrap())
        .collect();
    assert_eq!(feasible.len(), 7);

    for seed in 0..5 {
        let p = sharp_problem(seed, 2, 2, 2);
        let report = solve(&p, &MLSyncParams::default()).unwrap();
        let s = &report.confidences[0].s;
        let best = feasible
            .iter()
            .map(|x| pair_objective(&p.pairs[0], x, s))
            .fold(f64::MIN, f64::max);
        assert!(
            (report.objective[0] - best).abs() <= 1e-12 * best.abs(),
            "seed {seed}"
        );
    }
}

#[test]
fn synchronization_does_not_lower_consistency() {
    let mut wins = 0;
    let trials = 50;
    for trial in 0..trials {
        let p = generate_problem(&SynthConfig {
            seed: 1000 + trial,
            ..SynthConfig::default()
        })
        .unwrap();
        let synced = solve(&p, &MLSyncParams::default()).unwrap();
        let plain = solve(&p, &unsynchronized()).unwrap();
        if synced.consistency >= plain.consistency {
            wins += 1;
        }
    }
    assert!(wins * 5 >= trials * 4, "{wins}/{trials}");
}
