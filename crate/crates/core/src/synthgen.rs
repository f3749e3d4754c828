//! Seeded synthetic multi-attributed graph sets with known ground truth.
//!
//! # Random streams
//!
//! Every random draw comes from a ChaCha8 generator seeded with
//! `derive_seed(master, stream, substream)`, where
//! `derive_seed = splitmix64(splitmix64(splitmix64(master) ^ stream) ^ substream)`.
//! Stream 0 is the reference graph and stream `g + 1` is derived graph `g`.
//! Substream 0 holds structural draws (per-channel beta for the reference,
//! the inlier permutation for derived graphs); substream `c + 1` holds the
//! attribute values of channel `c`. Attribute entries are drawn in row-major
//! order over the upper triangle (diagonal included) and mirrored.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{build_pair_affinity, Kernel};
use crate::error::{Error, Result};
use crate::model::{pair_list, AttributedGraph, GroundTruth, ProblemSet};

pub const BETA_MIN: f64 = 0.1;
pub const BETA_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_graphs: usize,
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub n_channels: usize,
    /// Standard deviation of the additive Gaussian attribute deformation.
    pub epsilon: f64,
    pub sigma2: f64,
    pub inter_weight: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_graphs: 10,
            n_inliers: 10,
            n_outliers: 2,
            n_channels: 5,
            epsilon: 0.1,
            sigma2: 0.3,
            inter_weight: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_inliers == 0 {
            return bad("n_inliers must be at least 1".into());
        }
        if self.n_channels == 0 {
            return bad("n_channels must be at least 1".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be > 0, got {}", self.sigma2));
        }
        if !(self.inter_weight >= 0.0 && self.inter_weight.is_finite()) {
            return bad(format!(
                "inter_weight must be >= 0, got {}",
                self.inter_weight
            ));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, substream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ substream)
}

fn stream_rng(master: u64, stream: u64, substream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, substream))
}

/// Symmetric `n x n` matrix filled over its upper triangle by `draw(i, j)`.
fn symmetric(n: usize, mut draw: impl FnMut(usize, usize) -> f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = draw(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Reference graph: `n_inliers` vertices, uniform `[0, 1]` attributes and a
/// per-channel beta uniform in `[0.1, 1]`.
pub fn generate_reference(cfg: &SynthConfig) -> AttributedGraph {
    let mut structure = stream_rng(cfg.seed, 0, 0);
    let beta = (0..cfg.n_channels)
        .map(|_| structure.random_range(BETA_MIN..=BETA_MAX))
        .collect();
    let channels = (0..cfg.n_channels)
        .map(|c| {
            let mut rng = stream_rng(cfg.seed, 0, c as u64 + 1);
            symmetric(cfg.n_inliers, |_, _| rng.random::<f64>())
        })
        .collect();
    AttributedGraph {
        id: 0,
        n_vertices: cfg.n_inliers,
        channels,
        beta: Some(beta),
    }
}

/// Derived graph `graph_index`: permuted, deformed inliers followed by fresh
/// outliers. Returns the graph and its `N_l x N_in` projection onto the reference.
pub fn derive_graph(
    reference: &AttributedGraph,
    cfg: &SynthConfig,
    graph_index: usize,
) -> (AttributedGraph, DMatrix<f64>) {
    let n_in = reference.n_vertices;
    let n = n_in + cfg.n_outliers;
    let stream = graph_index as u64 + 1;

    let mut perm: Vec<usize> = (0..n_in).collect();
    perm.shuffle(&mut stream_rng(cfg.seed, stream, 0));

    let noise =
        (cfg.epsilon > 0.0).then(|| Normal::new(0.0, cfg.epsilon).expect("epsilon validated"));
    let channels = reference
        .channels
        .iter()
        .enumerate()
        .map(|(c, ref_ch)| {
            let mut rng = stream_rng(cfg.seed, stream, c as u64 + 1);
            symmetric(n, |i, j| {
                if i < n_in && j < n_in {
                    let base = ref_ch[(perm[i], perm[j])];
                    match &noise {
                        Some(dist) => base + dist.sample(&mut rng),
                        None => base,
                    }
                } else {
                    rng.random::<f64>()
                }
            })
        })
        .collect();

    let mut u = DMatrix::zeros(n, n_in);
    for (v, &r) in perm.iter().enumerate() {
        u[(v, r)] = 1.0;
    }
    let graph = AttributedGraph {
        id: graph_index,
        n_vertices: n,
        channels,
        beta: reference.beta.clone(),
    };
    (graph, u)
}

/// Full problem: `n_graphs` derived graphs (the reference is not a member),
/// every pair's beta-kernel affinity and the ground-truth projections.
pub fn generate_problem(cfg: &SynthConfig) -> Result<ProblemSet> {
    cfg.validate()?;
    let reference = generate_reference(cfg);
    let (graphs, perms): (Vec<_>, Vec<_>) = (0..cfg.n_graphs)
        .into_par_iter()
        .map(|g| derive_graph(&reference, cfg, g))
        .unzip();
    let pairs = pair_list(cfg.n_graphs)
        .into_par_iter()
        .map(|(l, m)| {
            build_pair_affinity(
                &graphs[l],
                &graphs[m],
                cfg.sigma2,
                Kernel::Beta,
                cfg.inter_weight,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProblemSet {
        graphs,
        pairs,
        ground_truth: Some(GroundTruth {
            n_ref: cfg.n_inliers,
            perms,
        }),
        master_seed: cfg.seed,
    })
}
