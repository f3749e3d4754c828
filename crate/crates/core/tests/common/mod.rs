//! Shared helpers: seeded randomness and brute-force enumerations used as oracles.
#![allow(dead_code)]

use mlsync::model::{AttributedGraph, PairAffinity};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every permutation of `0..n`, in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Every injective map from `0..k` into `0..n` (`k <= n`).
pub fn injections(k: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(k: usize, prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(k, prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(k, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Best total of a one-to-one assignment making `min(rows, cols)` matches, by enumeration.
pub fn brute_force_assignment(score: &DMatrix<f64>) -> f64 {
    let (r, c) = score.shape();
    if r <= c {
        injections(r, c)
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| score[(i, j)])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        brute_force_assignment(&score.transpose())
    }
}

pub fn permutation_matrix(perm: &[usize], cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(perm.len(), cols);
    for (i, &j) in perm.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = rng.random_range(lo..hi);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Random graph with symmetric uniform attributes and the given betas.
pub fn random_graph(rng: &mut ChaCha8Rng, id: usize, n: usize, beta: &[f64]) -> AttributedGraph {
    AttributedGraph {
        id,
        n_vertices: n,
        channels: beta
            .iter()
            .map(|_| random_symmetric(rng, n, 0.0, 1.0))
            .collect(),
        beta: Some(beta.to_vec()),
    }
}

/// `g` with vertex `v` of the result taken from vertex `perm[v]` of `g`.
pub fn relabel(g: &AttributedGraph, perm: &[usize], id: usize) -> AttributedGraph {
    let n = g.n_vertices;
    AttributedGraph {
        id,
        n_vertices: n,
        channels: g
            .channels
            .iter()
            .map(|ch| DMatrix::from_fn(n, n, |i, j| ch[(perm[i], perm[j])]))
            .collect(),
        beta: g.beta.clone(),
    }
}

/// Single-pair affinity with arbitrary symmetric nonnegative layers.
pub fn random_pair(
    rng: &mut ChaCha8Rng,
    n_l: usize,
    n_m: usize,
    layers: usize,
    inter_weight: f64,
) -> PairAffinity {
    let d = n_l * n_m;
    PairAffinity {
        l: 0,
        m: 1,
        n_l,
        n_m,
        intra: (0..layers)
            .map(|_| random_symmetric(rng, d, 0.0, 1.0))
            .collect(),
        inter_weight,
    }
}

/// Layer-wise quadratic score `sum_alpha x' P_alpha x` of a binary assignment.
pub fn layer_sum_score(pair: &PairAffinity, x: &DMatrix<f64>) -> f64 {
    let v = nalgebra::DVector::from_column_slice(x.as_slice());
    pair.intra.iter().map(|p| v.dot(&(p * &v))).sum()
}
