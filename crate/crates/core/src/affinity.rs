//! Intra-layer affinity blocks, supra-adjacency assembly and the walker
//! transition matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributedGraph, PairAffinity};

/// Affinity kernel applied to attribute differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-(a_l - a_m)^2 / sigma2)`
    Plain,
    /// `exp(-((1 - beta) + beta * (a_l - a_m))^2 / sigma2)`, beta taken from the first graph.
    #[default]
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityConfig {
    pub sigma2: f64,
    pub kernel: Kernel,
    pub inter_weight: f64,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            sigma2: 0.3,
            kernel: Kernel::Beta,
            inter_weight: 1.0,
        }
    }
}

/// Affinity block of one channel: entry `(ia, jb)` compares edge `(i, j)` of
/// `g_l` with edge `(a, b)` of `g_m`.
pub fn intra_block(
    g_l: &AttributedGraph,
    g_m: &AttributedGraph,
    channel: usize,
    sigma2: f64,
    kernel: Kernel,
) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let (al, am) = match (g_l.channels.get(channel), g_m.channels.get(channel)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "channel {channel} missing in graph {} or {}",
                g_l.id, g_m.id
            )))
        }
    };
    if al.iter().chain(am.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "attribute in channel {channel} of graph {} or {}",
            g_l.id, g_m.id
        )));
    }
    let beta = match kernel {
        Kernel::Plain => 1.0,
        Kernel::Beta => *g_l
            .beta
            .as_ref()
            .and_then(|b| b.get(channel))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "beta kernel needs beta for graph {} channel {channel}",
                    g_l.id
                ))
            })?,
    };
    let offset = 1.0 - beta;

    let kernel_value = |x: f64, y: f64| {
        let diff = offset + beta * (x - y);
        (-diff * diff / sigma2).exp()
    };

    let (n_l, n_m) = (g_l.n_vertices, g_m.n_vertices);
    let d = n_l * n_m;
    let mut out = DMatrix::zeros(d, d);
    if al == &al.transpose() && am == &am.transpose() {
        // Symmetric attributes: the value depends only on the unordered edges
        // {i, j} and {a, b}, so evaluate each combination once.
        let edge = |i: usize, j: usize| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            hi * (hi + 1) / 2 + lo
        };
        let (el, em) = (n_l * (n_l + 1) / 2, n_m * (n_m + 1) / 2);
        let mut table = vec![0.0; el * em];
        for b in 0..n_m {
            for a in 0..=b {
                let y = am[(a, b)];
                let row = edge(a, b) * el;
                for j in 0..n_l {
                    for i in 0..=j {
                        table[row + edge(i, j)] = kernel_value(al[(i, j)], y);
                    }
                }
            }
        }
        let edges_l: Vec<usize> = (0..n_l * n_l).map(|k| edge(k % n_l, k / n_l)).collect();
        let dst = out.as_mut_slice();
        for b in 0..n_m {
            for j in 0..n_l {
                let col = &mut dst[(j + b * n_l) * d..(j + b * n_l + 1) * d];
                let col_edges = &edges_l[j * n_l..(j + 1) * n_l];
                for (a, chunk) in col.chunks_exact_mut(n_l).enumerate() {
                    let row = &table[edge(a, b) * el..(edge(a, b) + 1) * el];
                    for (v, &e) in chunk.iter_mut().zip(col_edges) {
                        *v = row[e];
                    }
                }
            }
        }
        return Ok(out);
    }
    // Column (jb) outer so writes walk memory in order.
    for b in 0..n_m {
        for j in 0..n_l {
            let col = j + b * n_l;
            for a in 0..n_m {
                let amv = am[(a, b)];
                for i in 0..n_l {
                    out[(i + a * n_l, col)] = kernel_value(al[(i, j)], amv);
                }
            }
        }
    }
    Ok(out)
}

/// One intra block per channel, coupled by `inter_weight` between co-indexed candidates.
pub fn build_pair_affinity(
    g_l: &AttributedGraph,
    g_m: &AttributedGraph,
    sigma2: f64,
    kernel: Kernel,
    inter_weight: f64,
) -> Result<PairAffinity> {
    if g_l.n_channels() != g_m.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "graph {} has {} channels, graph {} has {}",
            g_l.id,
            g_l.n_channels(),
            g_m.id,
            g_m.n_channels()
        )));
    }
    if !(inter_weight >= 0.0 && inter_weight.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inter_weight must be >= 0, got {inter_weight}"
        )));
    }
    let intra = (0..g_l.n_channels())
        .map(|c| intra_block(g_l, g_m, c, sigma2, kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairAffinity {
        l: g_l.id,
        m: g_m.id,
        n_l: g_l.n_vertices,
        n_m: g_m.n_vertices,
        intra,
        inter_weight,
    })
}

/// Single-layer affinity from per-channel blocks, each divided by its maximum
/// and then summed. This is the input for single-layer baselines.
pub fn integrated_affinity(p: &PairAffinity) -> PairAffinity {
    let d = p.block_dim();
    let mut sum = DMatrix::zeros(d, d);
    for block in &p.intra {
        let max = block.max();
        if max > 0.0 {
            sum += block / max;
        }
    }
    PairAffinity {
        intra: vec![sum],
        inter_weight: 0.0,
        ..p.clone()
    }
}

/// Row-stochastic supra-transition matrix in factored form.
///
/// Row `(alpha, i)` of layer `alpha` is `P[i, :] / total_i` within the layer
/// and `inter_weight / total_i` toward every other layer's copy of `i`, where
/// `total_i` is the intra row sum plus all outgoing inter-layer weight. Intra
/// blocks are symmetric, so only their upper triangle is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    block_dim: usize,
    layers: Vec<LayerTransition>,
}

#[derive(Debug, Clone, PartialEq)]
struct LayerTransition {
    /// Upper triangle of the intra block, column by column, in single precision.
    packed: Vec<f32>,
    /// `1 / total_i`, or 0 for zero-degree rows.
    scale: Vec<f64>,
    /// Zero-degree rows; they spread their mass uniformly over the layer.
    uniform: Vec<usize>,
    cross: Vec<f64>,
}

impl LayerTransition {
    fn entry(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        f64::from(self.packed[c * (c + 1) / 2 + r])
    }

    /// `out += (t^T W)` for this layer's within-layer block `W`.
    fn apply(&self, t: &[f64], out: &mut [f64]) {
        let d = t.len();
        // t^T diag(scale) P = P (scale .* t) by symmetry.
        let x: Vec<f64> = t.iter().zip(&self.scale).map(|(a, b)| a * b).collect();
        packed_symv(&self.packed, &x, out);
        if !self.uniform.is_empty() {
            let spread = self.uniform.iter().map(|&i| t[i]).sum::<f64>() / d as f64;
            out.iter_mut().for_each(|o| *o += spread);
        }
    }
}

/// `out += P x` for a symmetric `P` stored as its packed upper triangle.
fn packed_symv(packed: &[f32], x: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2. No FMA is enabled, so results match
            // the portable path bit for bit.
            unsafe { packed_symv_avx2(packed, x, out) };
            return;
        }
    }
    packed_symv_portable(packed, x, out);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn packed_symv_avx2(packed: &[f32], x: &[f64], out: &mut [f64]) {
    packed_symv_portable(packed, x, out);
}

#[inline(always)]
fn packed_symv_portable(packed: &[f32], x: &[f64], out: &mut [f64]) {
    let mut off = 0;
    for j in 0..x.len() {
        let col = &packed[off..off + j + 1];
        off += j + 1;
        let (head, diag) = col.split_at(j);
        let xj = x[j];
        let mut acc = [0.0f64; 4];
        let mut ys = out[..j].chunks_exact_mut(4);
        let mut hs = head.chunks_exact(4);
        let mut xs = x[..j].chunks_exact(4);
        for ((y, h), xx) in (&mut ys).zip(&mut hs).zip(&mut xs) {
            for k in 0..4 {
                let h = f64::from(h[k]);
                acc[k] += h * xx[k];
                y[k] += h * xj;
            }
        }
        let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
        for ((y, h), xx) in ys
            .into_remainder()
            .iter_mut()
            .zip(hs.remainder())
            .zip(xs.remainder())
        {
            let h = f64::from(*h);
            s += h * xx;
            *y += h * xj;
        }
        out[j] += s + f64::from(diag[0]) * xj;
    }
}

impl TransitionMatrix {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.n_layers()
    }

    /// Within-layer transition block of `layer`.
    pub fn intra(&self, layer: usize) -> DMatrix<f64> {
        let l = &self.layers[layer];
        let d = self.block_dim;
        let mut w = DMatrix::from_fn(d, d, |i, j| l.entry(i, j) * l.scale[i]);
        for &i in &l.uniform {
            w.row_mut(i).fill(1.0 / d as f64);
        }
        w
    }

    /// Next distribution `t^T P~` for a layer-major vector `t`.
    pub fn step(&self, t: &DVector<f64>) -> DVector<f64> {
        let d = self.block_dim;
        let n_layers = self.n_layers();
        debug_assert_eq!(t.len(), d * n_layers);

        let t = t.as_slice();
        let mut out = DVector::zeros(d * n_layers);
        let out_s = out.as_mut_slice();
        for (alpha, layer) in self.layers.iter().enumerate() {
            layer.apply(
                &t[alpha * d..(alpha + 1) * d],
                &mut out_s[alpha * d..(alpha + 1) * d],
            );
        }
        if n_layers > 1 {
            // Mass leaving candidate c of layer alpha reaches c on every other layer.
            let mut leaving = vec![0.0; d];
            for (alpha, layer) in self.layers.iter().enumerate() {
                for ((l, c), v) in leaving
                    .iter_mut()
                    .zip(&layer.cross)
                    .zip(&t[alpha * d..(alpha + 1) * d])
                {
                    *l += c * v;
                }
            }
            for (beta, layer) in self.layers.iter().enumerate() {
                let range = beta * d..(beta + 1) * d;
                for (((o, l), c), v) in out_s[range.clone()]
                    .iter_mut()
                    .zip(&leaving)
                    .zip(&layer.cross)
                    .zip(&t[range])
                {
                    *o += l - c * v;
                }
            }
        }
        out
    }

    /// Row sums of the full transition, layer-major; every entry is 1 up to rounding.
    pub fn row_sums(&self) -> DVector<f64> {
        let d = self.block_dim;
        let n_layers = self.n_layers();
        let mut out = DVector::zeros(d * n_layers);
        for (alpha, layer) in self.layers.iter().enumerate() {
            let dst = &mut out.as_mut_slice()[alpha * d..(alpha + 1) * d];
            packed_symv(&layer.packed, &vec![1.0; d], dst);
            for ((o, s), c) in dst.iter_mut().zip(&layer.scale).zip(&layer.cross) {
                *o = *o * s + c * (n_layers - 1) as f64;
            }
            for &i in &layer.uniform {
                dst[i] = 1.0;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.block_dim;
        let n_layers = self.n_layers();
        let mut out = DMatrix::zeros(d * n_layers, d * n_layers);
        for alpha in 0..n_layers {
            out.view_mut((alpha * d, alpha * d), (d, d))
                .copy_from(&self.intra(alpha));
            for beta in 0..n_layers {
                if beta != alpha {
                    for c in 0..d {
                        out[(alpha * d + c, beta * d + c)] = self.layers[alpha].cross[c];
                    }
                }
            }
        }
        out
    }
}

/// Two-step normalization of a pair's supra-adjacency into walker transitions.
///
/// Step one row-normalizes each intra block. Step two splits every source
/// node's mass between staying in its layer (weight = intra row sum) and
/// crossing to each other layer (weight = `inter_weight`). Nodes with zero
/// total weight move uniformly within their own layer.
///
/// Intra blocks must be symmetric; only their upper triangle is read.
pub fn to_transition(p: &PairAffinity) -> TransitionMatrix {
    let d = p.block_dim();
    let n_layers = p.n_layers();
    let cross_weight = p.inter_weight * (n_layers.saturating_sub(1)) as f64;
    let layers = p
        .intra
        .iter()
        .map(|block| {
            let mut packed = Vec::with_capacity(d * (d + 1) / 2);
            for (j, col) in block.as_slice().chunks_exact(d).enumerate() {
                packed.extend(col[..=j].iter().map(|&v| v as f32));
            }
            let mut scale = vec![0.0; d];
            let mut cross = vec![0.0; d];
            let mut uniform = Vec::new();
            // Row sums equal column sums for a symmetric block.
            let mut row_sums = vec![0.0f64; d];
            let mut off = 0;
            for j in 0..d {
                for i in 0..=j {
                    let v = f64::from(packed[off + i]);
                    row_sums[i] += v;
                    if i != j {
                        row_sums[j] += v;
                    }
                }
                off += j + 1;
            }
            for (i, &row_sum) in row_sums.iter().enumerate() {
                let total = row_sum + cross_weight;
                if total > 0.0 {
                    scale[i] = 1.0 / total;
                    if n_layers > 1 {
                        cross[i] = p.inter_weight / total;
                    }
                } else {
                    uniform.push(i);
                }
            }
            LayerTransition {
                packed,
                scale,
                uniform,
                cross,
            }
        })
        .collect();
    TransitionMatrix {
        block_dim: d,
        layers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn graph(id: usize, channels: Vec<DMatrix<f64>>, beta: Option<Vec<f64>>) -> AttributedGraph {
        AttributedGraph {
            id,
            n_vertices: channels[0].nrows(),
            channels,
            beta,
        }
    }

    #[test]
    fn identical_attributes_give_ones() {
        let g = graph(0, vec![DMatrix::from_element(2, 2, 0.4)], None);
        let b = intra_block(&g, &g, 0, 0.3, Kernel::Plain).unwrap();
        assert_eq!(b, DMatrix::from_element(4, 4, 1.0));
    }

    #[test]
    fn single_difference() {
        let g1 = graph(0, vec![DMatrix::from_element(1, 1, 0.3)], None);
        let g2 = graph(1, vec![DMatrix::from_element(1, 1, 0.0)], None);
        let b = intra_block(&g1, &g2, 0, 0.3, Kernel::Plain).unwrap();
        assert_relative_eq!(b[(0, 0)], 0.740_818_220_681_717_9, epsilon = 1e-12);
    }

    #[test]
    fn beta_one_equals_plain() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.7, 0.7, 0.4]);
        let c = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.5]);
        let g1 = graph(0, vec![a], Some(vec![1.0]));
        let g2 = graph(1, vec![c], Some(vec![1.0]));
        let plain = intra_block(&g1, &g2, 0, 0.3, Kernel::Plain).unwrap();
        let beta = intra_block(&g1, &g2, 0, 0.3, Kernel::Beta).unwrap();
        assert_relative_eq!(plain, beta, epsilon = 1e-15);
    }

    #[test]
    fn beta_kernel_requires_beta() {
        let g = graph(0, vec![DMatrix::zeros(1, 1)], None);
        assert!(intra_block(&g, &g, 0, 0.3, Kernel::Beta).is_err());
    }

    #[test]
    fn non_finite_attribute_is_rejected() {
        let g = graph(0, vec![DMatrix::from_element(1, 1, f64::NAN)], None);
        assert!(matches!(
            intra_block(&g, &g, 0, 0.3, Kernel::Plain),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn pair_shapes_and_decoupling() {
        let ch = || DMatrix::from_row_slice(2, 2, &[0.1, 0.5, 0.5, 0.9]);
        let g1 = graph(0, vec![ch(), ch()], None);
        let g2 = graph(1, vec![ch(), ch()], None);
        let p = build_pair_affinity(&g1, &g2, 0.3, Kernel::Plain, 0.0).unwrap();
        assert_eq!(p.n_layers(), 2);
        assert_eq!(p.block_dim(), 4);
        let s = p.supra_adjacency();
        assert!(s.view((0, 4), (4, 4)).iter().all(|&v| v == 0.0));

        let single = build_pair_affinity(
            &graph(0, vec![ch()], None),
            &graph(1, vec![ch()], None),
            0.3,
            Kernel::Plain,
            1.0,
        )
        .unwrap();
        assert_eq!(single.supra_adjacency(), single.intra[0]);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let g1 = graph(0, vec![DMatrix::zeros(1, 1)], None);
        let g2 = graph(1, vec![DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)], None);
        assert!(matches!(
            build_pair_affinity(&g1, &g2, 0.3, Kernel::Plain, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn toy_pair(blocks: Vec<DMatrix<f64>>, inter_weight: f64) -> PairAffinity {
        PairAffinity {
            l: 0,
            m: 1,
            n_l: 2,
            n_m: 1,
            intra: blocks,
            inter_weight,
        }
    }

    #[test]
    fn two_layer_hand_computation() {
        // Layer 0 rows sum to 3 and 2; layer 1 rows sum to 2 and 4; w = 1.
        let p = toy_pair(
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 3.0]),
            ],
            1.0,
        );
        let t = to_transition(&p).to_dense();
        // Row (0,0): stay 3/4 split 1:2, cross 1/4.
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.25,
                0.5,
                0.25,
                0.0, //
                2.0 / 3.0,
                0.0,
                0.0,
                1.0 / 3.0, //
                1.0 / 3.0,
                0.0,
                1.0 / 3.0,
                1.0 / 3.0, //
                0.0,
                1.0 / 5.0,
                1.0 / 5.0,
                3.0 / 5.0,
            ],
        );
        assert_relative_eq!(t, expected, epsilon = 1e-15);
    }

    #[test]
    fn zero_degree_row_is_uniform_within_layer() {
        let p = toy_pair(
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])],
            0.0,
        );
        let t = to_transition(&p).to_dense();
        assert_eq!(t.row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
    }

    #[test]
    fn step_matches_dense_product() {
        let p = toy_pair(
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
                DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 3.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]),
            ],
            0.7,
        );
        let tm = to_transition(&p);
        let t = DVector::from_vec(vec![0.1, 0.2, 0.05, 0.15, 0.3, 0.2]);
        let dense = tm.to_dense().transpose() * &t;
        assert_relative_eq!(tm.step(&t), dense, epsilon = 1e-15);
    }
}
