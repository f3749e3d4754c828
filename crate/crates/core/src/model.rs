//! Domain types shared by the matchers, the generator and the benchmark.
//!
//! Candidate ordering everywhere is the column-major vectorization of an
//! `N_l x N_m` assignment matrix: candidate `(i, a)` lives at index
//! `i + a * N_l`. Multi-layer vectors are layer-major, so layer `alpha`
//! occupies `[alpha * N_l * N_m, (alpha + 1) * N_l * N_m)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Index of candidate `(i, a)` in a column-major vectorized `n_l x n_m` matrix.
#[inline]
pub fn candidate_index(i: usize, a: usize, n_l: usize) -> usize {
    i + a * n_l
}

/// A graph with `n_channels` dense attribute channels.
///
/// Channel entry `(i, j)` holds the attribute of edge `(i, j)`; the diagonal
/// holds vertex attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    pub id: usize,
    pub n_vertices: usize,
    pub channels: Vec<DMatrix<f64>>,
    /// Per-channel blend factor for the synthetic kernel.
    pub beta: Option<Vec<f64>>,
}

impl AttributedGraph {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Invariant violations of this graph alone, prefixed with its id.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.channels.is_empty() {
            out.push(format!("graph {}: no attribute channels", self.id));
        }
        for (c, ch) in self.channels.iter().enumerate() {
            if ch.nrows() != self.n_vertices || ch.ncols() != self.n_vertices {
                out.push(format!(
                    "graph {} channel {}: shape {}x{} but n_vertices = {}",
                    self.id,
                    c,
                    ch.nrows(),
                    ch.ncols(),
                    self.n_vertices
                ));
            }
            if ch.iter().any(|v| !v.is_finite()) {
                out.push(format!(
                    "graph {} channel {}: non-finite attribute",
                    self.id, c
                ));
            }
        }
        if let Some(beta) = &self.beta {
            if beta.len() != self.channels.len() {
                out.push(format!(
                    "graph {}: {} beta values for {} channels",
                    self.id,
                    beta.len(),
                    self.channels.len()
                ));
            }
            for (c, b) in beta.iter().enumerate() {
                if !(0.0..=1.0).contains(b) {
                    out.push(format!(
                        "graph {} channel {}: beta {} outside [0,1]",
                        self.id, c, b
                    ));
                }
            }
        }
        out
    }
}

/// An `N_l x N_m` matching matrix, binary or relaxed.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    entries: DMatrix<f64>,
}

impl Assignment {
    /// Wraps a relaxed matrix; entries must be finite and within `[0, 1]`.
    pub fn relaxed(entries: DMatrix<f64>) -> Result<Self> {
        if let Some(v) = entries
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "assignment entry {v} outside [0,1]"
            )));
        }
        Ok(Self { entries })
    }

    /// Binary assignment from a list of `(row, col)` matches.
    pub fn from_matches(rows: usize, cols: usize, matches: &[(usize, usize)]) -> Result<Self> {
        let mut entries = DMatrix::zeros(rows, cols);
        for &(i, a) in matches {
            if i >= rows || a >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "match ({i},{a}) outside {rows}x{cols}"
                )));
            }
            entries[(i, a)] = 1.0;
        }
        let out = Self { entries };
        if !out.is_one_to_one() {
            return Err(Error::InvalidArgument("matches are not one-to-one".into()));
        }
        Ok(out)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            entries: DMatrix::zeros(rows, cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Every row sum and every column sum is at most one.
    pub fn is_one_to_one(&self) -> bool {
        let rows_ok = self.entries.row_iter().all(|r| r.sum() <= 1.0 + 1e-12);
        let cols_ok = self.entries.column_iter().all(|c| c.sum() <= 1.0 + 1e-12);
        rows_ok && cols_ok
    }

    /// Matched `(row, col)` pairs of a binary assignment, row-major order.
    pub fn matches(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.rows() {
            for a in 0..self.cols() {
                if self.entries[(i, a)] > 0.5 {
                    out.push((i, a));
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
        }
    }

    /// Column-major vectorization, `vec(X)`.
    pub fn vectorized(&self) -> Vec<f64> {
        self.entries.as_slice().to_vec()
    }
}

/// Composes two binary assignments: `x_lm * x_mn`, clamped back to `{0, 1}`.
pub fn compose(x_lm: &Assignment, x_mn: &Assignment) -> Result<Assignment> {
    if x_lm.cols() != x_mn.rows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compose {}x{} with {}x{}",
            x_lm.rows(),
            x_lm.cols(),
            x_mn.rows(),
            x_mn.cols()
        )));
    }
    let product = x_lm.matrix() * x_mn.matrix();
    Ok(Assignment {
        entries: product.map(|v| if v > 0.5 { 1.0 } else { 0.0 }),
    })
}

/// Supra-adjacency of one graph pair: one intra-layer block per attribute
/// channel plus uniform inter-layer coupling between co-indexed candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAffinity {
    /// Index of the first graph in the problem (`l < m`).
    pub l: usize,
    pub m: usize,
    pub n_l: usize,
    pub n_m: usize,
    pub intra: Vec<DMatrix<f64>>,
    pub inter_weight: f64,
}

impl PairAffinity {
    pub fn n_layers(&self) -> usize {
        self.intra.len()
    }

    /// Number of matching candidates per layer, `N_l * N_m`.
    pub fn block_dim(&self) -> usize {
        self.n_l * self.n_m
    }

    /// Dense supra-adjacency of dimension `n_layers * block_dim`.
    pub fn supra_adjacency(&self) -> DMatrix<f64> {
        let d = self.block_dim();
        let n_layers = self.n_layers();
        let mut out = DMatrix::zeros(n_layers * d, n_layers * d);
        for (alpha, block) in self.intra.iter().enumerate() {
            out.view_mut((alpha * d, alpha * d), (d, d))
                .copy_from(block);
        }
        if self.inter_weight != 0.0 {
            for alpha in 0..n_layers {
                for beta in 0..n_layers {
                    if alpha != beta {
                        for c in 0..d {
                            out[(alpha * d + c, beta * d + c)] = self.inter_weight;
                        }
                    }
                }
            }
        }
        out
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = self.block_dim();
        if self.intra.is_empty() {
            out.push(format!("pair ({},{}): no layers", self.l, self.m));
        }
        if !(self.inter_weight >= 0.0 && self.inter_weight.is_finite()) {
            out.push(format!(
                "pair ({},{}): inter_weight {} is not a nonnegative real",
                self.l, self.m, self.inter_weight
            ));
        }
        for (alpha, block) in self.intra.iter().enumerate() {
            let tag = format!("pair ({},{}) channel {}", self.l, self.m, alpha);
            if block.nrows() != d || block.ncols() != d {
                out.push(format!(
                    "{tag}: block is {}x{}, expected {d}x{d}",
                    block.nrows(),
                    block.ncols()
                ));
                continue;
            }
            if !all_finite_nonnegative(block.as_slice()) {
                out.push(format!("{tag}: negative or non-finite affinity"));
            }
            let asym = max_asymmetry(block);
            if asym > SYMMETRY_TOL {
                out.push(format!(
                    "{tag}: intra block not symmetric (max |P - P^T| = {asym:e})"
                ));
            }
        }
        out
    }
}

/// `v * 0.0` is NaN exactly for non-finite `v`; both reductions vectorize.
fn all_finite_nonnegative(values: &[f64]) -> bool {
    let mut poison = [0.0f64; 4];
    let mut low = [0.0f64; 4];
    let chunks = values.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        for k in 0..4 {
            poison[k] += c[k] * 0.0;
            low[k] = if c[k] < low[k] { c[k] } else { low[k] };
        }
    }
    for v in tail {
        poison[0] += v * 0.0;
        low[0] = low[0].min(*v);
    }
    poison.iter().all(|p| *p == 0.0) && low.iter().all(|l| *l >= 0.0)
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    // Tiled so both the tile and its mirror stay in cache.
    const TILE: usize = 32;
    let n = m.nrows().min(m.ncols());
    let rows = m.nrows();
    let data = m.as_slice();
    let mut worst = 0.0f64;
    for jb in (0..n).step_by(TILE) {
        for ib in (0..=jb).step_by(TILE) {
            for j in jb..(jb + TILE).min(n) {
                let col = &data[j * rows..j * rows + n];
                for i in ib..(ib + TILE).min(j) {
                    let mirror = data[i * rows + j];
                    if col[i] != mirror {
                        worst = worst.max((col[i] - mirror).abs());
                    }
                }
            }
        }
    }
    worst
}

/// Ground truth stored as projections `U_l` (`N_l x n_ref`) onto a reference graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub n_ref: usize,
    pub perms: Vec<DMatrix<f64>>,
}

impl GroundTruth {
    /// Pairwise ground truth `U_l U_m^T`.
    pub fn pairwise(&self, l: usize, m: usize) -> Assignment {
        let product = &self.perms[l] * self.perms[m].transpose();
        Assignment {
            entries: product.map(|v| if v > 0.5 { 1.0 } else { 0.0 }),
        }
    }

    /// Inlier count of graph `l` (rows with a reference match).
    pub fn inliers(&self, l: usize) -> usize {
        self.perms[l].iter().filter(|&&v| v > 0.5).count()
    }
}

/// A full multi-graph matching instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSet {
    pub graphs: Vec<AttributedGraph>,
    /// All unordered pairs `(l, m)`, `l < m`, in lexicographic order.
    pub pairs: Vec<PairAffinity>,
    pub ground_truth: Option<GroundTruth>,
    pub master_seed: u64,
}

impl ProblemSet {
    pub fn n_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.n_vertices).collect()
    }

    /// Position of pair `(l, m)` (`l < m`) in [`ProblemSet::pairs`].
    pub fn pair_index(&self, l: usize, m: usize) -> Option<usize> {
        self.pairs.iter().position(|p| p.l == l && p.m == m)
    }
}

/// Lexicographic list of unordered pairs over `n` graphs.
pub fn pair_list(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for l in 0..n {
        for m in (l + 1)..n {
            out.push((l, m));
        }
    }
    out
}

/// Checks every type invariant of a problem. Returns an empty list iff it is well formed.
pub fn validate_problem(p: &ProblemSet) -> Vec<String> {
    let mut out = Vec::new();
    for g in &p.graphs {
        out.extend(g.violations());
    }

    let n = p.graphs.len();
    let expected = pair_list(n);
    let present: Vec<(usize, usize)> = p.pairs.iter().map(|q| (q.l, q.m)).collect();
    let mut sorted = present.clone();
    sorted.sort_unstable();
    if sorted != expected {
        out.push(format!(
            "pairs cover {} entries, expected the {} unordered pairs of {} graphs",
            present.len(),
            expected.len(),
            n
        ));
    }
    for pair in &p.pairs {
        if pair.l < n && pair.m < n {
            let (gl, gm) = (&p.graphs[pair.l], &p.graphs[pair.m]);
            if pair.n_l != gl.n_vertices || pair.n_m != gm.n_vertices {
                out.push(format!(
                    "pair ({},{}): sizes {}x{} disagree with graphs ({}x{})",
                    pair.l, pair.m, pair.n_l, pair.n_m, gl.n_vertices, gm.n_vertices
                ));
            }
        }
        out.extend(pair.violations());
    }

    if let Some(gt) = &p.ground_truth {
        if gt.perms.len() != n {
            out.push(format!(
                "ground truth has {} permutations for {} graphs",
                gt.perms.len(),
                n
            ));
        }
        for (l, u) in gt.perms.iter().enumerate() {
            let tag = format!("ground truth graph {l}");
            let n_l = p.graphs.get(l).map(|g| g.n_vertices).unwrap_or(u.nrows());
            if u.nrows() != n_l || u.ncols() != gt.n_ref {
                out.push(format!(
                    "{tag}: shape {}x{}, expected {}x{}",
                    u.nrows(),
                    u.ncols(),
                    n_l,
                    gt.n_ref
                ));
                continue;
            }
            if u.iter().any(|&v| v != 0.0 && v != 1.0) {
                out.push(format!("{tag}: entries must be binary"));
            }
            for (r, row) in u.row_iter().enumerate() {
                if row.sum() > 1.0 {
                    out.push(format!("{tag}: row {r} has {} ones", row.sum()));
                }
            }
            for (c, col) in u.column_iter().enumerate() {
                if col.sum() > 1.0 {
                    out.push(format!(
                        "{tag}: reference column {c} used {} times",
                        col.sum()
                    ));
                }
            }
            let ones = u.sum();
            let expected_ones = n_l.min(gt.n_ref) as f64;
            if ones != expected_ones {
                out.push(format!(
                    "{tag}: {ones} matches, expected min(N_l, N_ref) = {expected_ones}"
                ));
            }
        }
    }
    out
}
