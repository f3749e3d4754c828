//! Layer-confidence measurement and synchronization, and spectral permutation
//! synchronization of pairwise assignments.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{hungarian, top_eigenpairs};
use crate::model::pair_list;

const FLAT_STD: f64 = 1e-12;

/// How the selected and complementary affinities enter the layer confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceForm {
    /// `y' P y - ybar' P ybar`: raw quadratic forms.
    #[default]
    Sum,
    /// Each quadratic form divided by its number of entries (`|y|^2`, `|ybar|^2`).
    Mean,
}

/// Raw confidence of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerScore {
    pub value: f64,
    /// Set when the block has (near) zero spread and the score was forced to 0.
    pub flat: bool,
}

/// Per-pair layer confidences, normalized into `[tau, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfidence {
    pub s: Vec<f64>,
    pub raw: Vec<f64>,
}

/// Cached sums of one intra block so the confidence measure costs
/// `O(|y|^2 + |y|)` per call instead of a full quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockStats {
    total: f64,
    row_sums: Vec<f64>,
    std: f64,
}

impl BlockStats {
    pub(crate) fn new(block: &DMatrix<f64>) -> Self {
        let n = block.len() as f64;
        let mut row_sums = vec![0.0; block.nrows()];
        for col in block.as_slice().chunks_exact(block.nrows().max(1)) {
            for (r, v) in row_sums.iter_mut().zip(col) {
                *r += v;
            }
        }
        let total: f64 = row_sums.iter().sum();
        let mean = total / n;
        let var = block
            .as_slice()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        Self {
            total,
            row_sums,
            std: var.sqrt(),
        }
    }
}

/// Separation between tentatively true and false candidates of one layer:
/// `(y' P y - ybar' P ybar) / (2 Std(P))` with `y = hungarian(u_slice)`.
///
/// `Std` is the population standard deviation over every block entry.
pub fn layer_confidence(p_block: &DMatrix<f64>, u_slice: &DMatrix<f64>) -> Result<LayerScore> {
    layer_confidence_with(p_block, u_slice, ConfidenceForm::Sum)
}

/// [`layer_confidence`] with an explicit [`ConfidenceForm`].
pub fn layer_confidence_with(
    p_block: &DMatrix<f64>,
    u_slice: &DMatrix<f64>,
    form: ConfidenceForm,
) -> Result<LayerScore> {
    let d = u_slice.len();
    if p_block.nrows() != d || p_block.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "block is {}x{} but the slice has {} candidates",
            p_block.nrows(),
            p_block.ncols(),
            d
        )));
    }
    if u_slice.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument(
            "reweight slice must be nonnegative".into(),
        ));
    }
    layer_confidence_cached(p_block, &BlockStats::new(p_block), u_slice, form)
}

pub(crate) fn layer_confidence_cached(
    p_block: &DMatrix<f64>,
    stats: &BlockStats,
    u_slice: &DMatrix<f64>,
    form: ConfidenceForm,
) -> Result<LayerScore> {
    if stats.std < FLAT_STD {
        return Ok(LayerScore {
            value: 0.0,
            flat: true,
        });
    }
    let n_l = u_slice.nrows();
    let selected: Vec<usize> = hungarian(u_slice)?
        .matches()
        .into_iter()
        .map(|(i, a)| i + a * n_l)
        .collect();

    let mut inner = 0.0;
    let mut rows = 0.0;
    for &p in &selected {
        rows += stats.row_sums[p];
        for &q in &selected {
            inner += p_block[(p, q)];
        }
    }
    // ybar' P ybar = total - 2 * sum_{p in y} rowsum_p + y' P y for symmetric P.
    let complement = stats.total - 2.0 * rows + inner;
    let (inner, complement) = match form {
        ConfidenceForm::Sum => (inner, complement),
        ConfidenceForm::Mean => {
            let k = selected.len() as f64;
            let rest = stats.row_sums.len() as f64 - k;
            let mean = |sum: f64, n: f64| if n > 0.0 { sum / (n * n) } else { 0.0 };
            (mean(inner, k), mean(complement, rest))
        }
    };
    Ok(LayerScore {
        value: (inner - complement) / (2.0 * stats.std),
        flat: false,
    })
}

/// Affine map of raw confidences onto `[tau, 1]` by `(1 - tau) * raw / max + tau`,
/// then clamped. Evaluated as `1 - (1 - tau) * (1 - raw / max)` so the
/// maximum maps to exactly 1. When no raw value is positive every layer gets weight 1.
pub fn normalize_confidence(raw: &[f64], tau: f64) -> LayerConfidence {
    let c_max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = if c_max > 0.0 {
        raw.iter()
            .map(|&c| (1.0 - (1.0 - tau) * (1.0 - c / c_max)).clamp(tau, 1.0))
            .collect()
    } else {
        vec![1.0; raw.len()]
    };
    LayerConfidence {
        s,
        raw: raw.to_vec(),
    }
}

/// Mean confidence over all pairs, and every pair's vector merged with it as
/// `(1 - mu) * s + mu * s_sync`.
pub fn sync_confidence(all_s: &[Vec<f64>], mu: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let first = all_s
        .first()
        .ok_or_else(|| Error::InvalidArgument("no confidence vectors".into()))?;
    let n_layers = first.len();
    if all_s.iter().any(|s| s.len() != n_layers) {
        return Err(Error::DimensionMismatch(
            "confidence vectors differ in length".into(),
        ));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!(
            "mu must lie in [0,1], got {mu}"
        )));
    }
    let s_sync = mean_confidence(all_s);
    let merged = all_s
        .iter()
        .map(|s| merge_confidence(s, &s_sync, mu))
        .collect();
    Ok((s_sync, merged))
}

pub(crate) fn mean_confidence(all_s: &[Vec<f64>]) -> Vec<f64> {
    let n = all_s.len() as f64;
    let mut out = vec![0.0; all_s[0].len()];
    for s in all_s {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

pub(crate) fn merge_confidence(s: &[f64], s_sync: &[f64], mu: f64) -> Vec<f64> {
    s.iter()
        .zip(s_sync)
        .map(|(a, b)| (1.0 - mu) * a + mu * b)
        .collect()
}

/// Symmetric block matrix of pairwise assignments over a set of graphs.
///
/// Block `(l, m)` is the `N_l x N_m` assignment between graphs `l` and `m`;
/// `(m, l)` is its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAssignment {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    matrix: DMatrix<f64>,
}

impl BlockAssignment {
    /// Assembles from the `l < m` blocks in lexicographic pair order; the
    /// diagonal blocks are identities.
    pub fn from_pairs(sizes: &[usize], blocks: &[DMatrix<f64>]) -> Result<Self> {
        let pairs = pair_list(sizes.len());
        if pairs.len() != blocks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks for {} graph pairs",
                blocks.len(),
                pairs.len()
            )));
        }
        let offsets = offsets(sizes);
        let total: usize = sizes.iter().sum();
        let mut matrix = DMatrix::zeros(total, total);
        for (l, &n) in sizes.iter().enumerate() {
            matrix
                .view_mut((offsets[l], offsets[l]), (n, n))
                .fill_with_identity();
        }
        for (&(l, m), block) in pairs.iter().zip(blocks) {
            if block.shape() != (sizes[l], sizes[m]) {
                return Err(Error::DimensionMismatch(format!(
                    "block ({l},{m}) is {}x{}, expected {}x{}",
                    block.nrows(),
                    block.ncols(),
                    sizes[l],
                    sizes[m]
                )));
            }
            matrix
                .view_mut((offsets[l], offsets[m]), (sizes[l], sizes[m]))
                .copy_from(block);
            matrix
                .view_mut((offsets[m], offsets[l]), (sizes[m], sizes[l]))
                .copy_from(&block.transpose());
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            matrix,
        })
    }

    /// Wraps an already assembled symmetric matrix.
    pub fn from_matrix(sizes: &[usize], matrix: DMatrix<f64>) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if matrix.shape() != (total, total) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, sizes add up to {total}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets: offsets(sizes),
            matrix,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_graphs(&self) -> usize {
        self.sizes.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn block(&self, l: usize, m: usize) -> DMatrix<f64> {
        self.matrix
            .view(
                (self.offsets[l], self.offsets[m]),
                (self.sizes[l], self.sizes[m]),
            )
            .into_owned()
    }

    /// The `l < m` blocks in lexicographic order.
    pub fn pair_blocks(&self) -> Vec<DMatrix<f64>> {
        pair_list(self.n_graphs())
            .into_iter()
            .map(|(l, m)| self.block(l, m))
            .collect()
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &n| {
            let at = *acc;
            *acc += n;
            Some(at)
        })
        .collect()
}

/// Relaxed synchronization `X^ = U~ D U~^T` from the `n_ref` leading eigenpairs,
/// negative entries clamped to zero.
pub fn match_eig(x: &BlockAssignment, n_ref: usize) -> Result<BlockAssignment> {
    let total = x.matrix.nrows();
    if n_ref == 0 || n_ref > total {
        return Err(Error::InvalidArgument(format!(
            "n_ref = {n_ref} must lie in 1..={total}"
        )));
    }
    let eig = top_eigenpairs(&x.matrix, n_ref)?;
    let mut scaled = eig.vectors.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(&eig.values) {
        col.scale_mut(lambda);
    }
    let mut sync = scaled * eig.vectors.transpose();
    sync.apply(|v| *v = v.max(0.0));
    // Restore exact symmetry lost to rounding in the product.
    let sync = (&sync + sync.transpose()) * 0.5;
    BlockAssignment::from_matrix(&x.sizes, sync)
}

/// Spectral permutation synchronization with a known universe size.
///
/// Returns one binary `N_l x n_ref` projection per graph, aligned so that
/// graph 0's projection is the identity.
pub fn match_sync(x: &BlockAssignment, n_ref: usize) -> Result<Vec<DMatrix<f64>>> {
    if let Some((l, &n)) = x.sizes.iter().enumerate().find(|(_, &n)| n != n_ref) {
        return Err(Error::DimensionMismatch(format!(
            "graph {l} has {n} vertices but n_ref = {n_ref}"
        )));
    }
    let eig = top_eigenpairs(&x.matrix, n_ref)?;
    let v = &eig.vectors;
    let anchor = v.rows(x.offsets[0], n_ref);
    (0..x.n_graphs())
        .map(|l| {
            let block = v.rows(x.offsets[l], n_ref);
            let aligned = block * anchor.transpose();
            Ok(hungarian(&aligned)?.into_matrix())
        })
        .collect()
}

/// Pairwise products `U_l U_m^T` of per-graph projections, lexicographic order.
pub fn pairwise_from_projections(us: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    pair_list(us.len())
        .into_iter()
        .map(|(l, m)| &us[l] * us[m].transpose())
        .collect()
}

/// Pluggable permutation synchronizer used inside the solver loop.
pub trait Synchronizer: Send + Sync {
    /// Returns a relaxed synchronized block assignment with blocks shaped like `x`'s.
    fn synchronize(&self, x: &BlockAssignment, n_ref: usize) -> Result<BlockAssignment>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MatchEig;

impl Synchronizer for MatchEig {
    fn synchronize(&self, x: &BlockAssignment, n_ref: usize) -> Result<BlockAssignment> {
        match_eig(x, n_ref)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MatchSync;

impl Synchronizer for MatchSync {
    fn synchronize(&self, x: &BlockAssignment, n_ref: usize) -> Result<BlockAssignment> {
        let us = match_sync(x, n_ref)?;
        let u = stack(&us);
        BlockAssignment::from_matrix(&x.sizes, &u * u.transpose())
    }
}

fn stack(us: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = us.iter().map(|u| u.nrows()).sum();
    let cols = us.first().map_or(0, |u| u.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for u in us {
        out.rows_mut(at, u.nrows()).copy_from(u);
        at += u.nrows();
    }
    out
}

/// Synchronized reweight blocks from the current per-pair reweight slices.
///
/// Each output block is divided by its maximum so it lies in `[0, 1]`; a block
/// with no positive entry becomes uniform.
pub fn sync_reweights(
    u_all: &[DMatrix<f64>],
    sizes: &[usize],
    n_ref: usize,
    synchronizer: &dyn Synchronizer,
) -> Result<Vec<DMatrix<f64>>> {
    let x = BlockAssignment::from_pairs(sizes, u_all)?;
    let synced = synchronizer.synchronize(&x, n_ref)?;
    Ok(synced
        .pair_blocks()
        .into_iter()
        .map(|mut b| {
            let max = b.max();
            if max > 0.0 {
                b /= max;
            } else {
                b.fill(1.0);
            }
            b
        })
        .collect())
}

/// `(1 - omega) * u + omega * u_sync`.
pub fn merge_reweights(u: &DMatrix<f64>, u_sync: &DMatrix<f64>, omega: f64) -> DMatrix<f64> {
    u * (1.0 - omega) + u_sync * omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_block_hits_guard() {
        let p = DMatrix::from_element(4, 4, 0.7);
        let u = DMatrix::identity(2, 2);
        let score = layer_confidence(&p, &u).unwrap();
        assert_eq!(
            score,
            LayerScore {
                value: 0.0,
                flat: true
            }
        );
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_confidence(&[3.0, 0.0], 0.1).s, vec![1.0, 0.1]);
        let s = normalize_confidence(&[2.0, 1.0], 0.1).s;
        assert_relative_eq!(s[0], 1.0);
        assert_relative_eq!(s[1], 0.55, epsilon = 1e-15);
        assert_eq!(normalize_confidence(&[1.0, -0.5], 0.1).s, vec![1.0, 0.1]);
        assert_eq!(normalize_confidence(&[-1.0, -0.5], 0.1).s, vec![1.0, 1.0]);
    }

    #[test]
    fn sync_confidence_examples() {
        let (s_sync, merged) = sync_confidence(&[vec![1.0, 0.1], vec![0.1, 1.0]], 0.0).unwrap();
        assert_relative_eq!(s_sync[0], 0.55, epsilon = 1e-15);
        assert_relative_eq!(s_sync[1], 0.55, epsilon = 1e-15);
        assert_eq!(merged, vec![vec![1.0, 0.1], vec![0.1, 1.0]]);

        let m = merge_confidence(&[1.0, 0.1], &[0.55, 0.55], 0.5);
        assert_relative_eq!(m[0], 0.775, epsilon = 1e-15);
        assert_relative_eq!(m[1], 0.325, epsilon = 1e-15);

        assert!(sync_confidence(&[], 0.5).is_err());
    }

    #[test]
    fn single_graph_match_eig_is_identity() {
        let x = BlockAssignment::from_pairs(&[3], &[]).unwrap();
        let out = match_eig(&x, 3).unwrap();
        assert_relative_eq!(out.block(0, 0), DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn match_eig_rejects_large_n_ref() {
        let x = BlockAssignment::from_pairs(&[2, 2], &[DMatrix::identity(2, 2)]).unwrap();
        assert!(match_eig(&x, 5).is_err());
    }

    #[test]
    fn match_sync_identity_pair() {
        let x = BlockAssignment::from_pairs(&[3, 3], &[DMatrix::identity(3, 3)]).unwrap();
        let us = match_sync(&x, 3).unwrap();
        assert_eq!(us[0], us[1]);
        assert_eq!(pairwise_from_projections(&us)[0], DMatrix::identity(3, 3));
    }

    #[test]
    fn match_sync_requires_exact_size() {
        let x = BlockAssignment::from_pairs(&[3, 2], &[DMatrix::zeros(3, 2)]).unwrap();
        assert!(matches!(
            match_sync(&x, 3),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn omega_zero_merge_is_identity() {
        let u = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.6, 0.4]);
        let s = DMatrix::from_element(2, 2, 0.9);
        assert_eq!(merge_reweights(&u, &s, 0.0), u);
    }
}
