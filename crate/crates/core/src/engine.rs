//! Synchronized multi-layer random walks over every graph pair of a problem.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::hungarian;
use crate::metrics::consistency;
use crate::model::{validate_problem, Assignment, PairAffinity, ProblemSet};
use crate::sync::{mean_confidence, sync_reweights, LayerConfidence, MatchEig, Synchronizer};
use crate::walkers::{PairUpdate, PairWalker, SyncInputs, WalkerParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MLSyncParams {
    pub walker: WalkerParams,
    /// Reweight synchronizing factor.
    pub omega: f64,
    /// Confidence synchronizing factor.
    pub mu: f64,
    /// Unsynchronized warm-up iterations; not counted against `max_iters`.
    pub bootstrap_iters: usize,
    /// Universe size for the synchronizer; `None` means the largest graph.
    pub n_ref: Option<usize>,
    pub max_iters: usize,
    /// Converged once the largest per-pair L1 change is at most this.
    pub conv_tol: f64,
    pub trace: bool,
}

impl Default for MLSyncParams {
    fn default() -> Self {
        Self {
            walker: WalkerParams::default(),
            omega: 0.8,
            mu: 0.5,
            bootstrap_iters: 5,
            n_ref: None,
            max_iters: 100,
            conv_tol: 1e-7,
            trace: false,
        }
    }
}

impl MLSyncParams {
    pub fn validate(&self) -> Result<()> {
        self.walker.validate()?;
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::InvalidArgument(format!(
                "omega must lie in [0,1], got {}",
                self.omega
            )));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidArgument(format!(
                "mu must lie in [0,1], got {}",
                self.mu
            )));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "conv_tol must be positive, got {}",
                self.conv_tol
            )));
        }
        if self.n_ref == Some(0) {
            return Err(Error::InvalidArgument("n_ref must be at least 1".into()));
        }
        Ok(())
    }

    fn synchronizes(&self) -> bool {
        self.omega > 0.0 || self.mu > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    /// Largest per-pair L1 change, one entry per iteration (bootstrap included).
    pub deltas: Vec<f64>,
    /// Synchronized confidence after each synchronized iteration.
    pub s_sync: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Binary assignment per pair, in [`ProblemSet::pairs`] order.
    pub assignments: Vec<Assignment>,
    /// Layer-summed walker distribution per pair before discretization.
    pub relaxed: Vec<Assignment>,
    /// Layer confidence used in each pair's last update.
    pub confidences: Vec<LayerConfidence>,
    pub bootstrap_iterations: usize,
    /// Main-loop iterations.
    pub iterations: usize,
    pub converged: bool,
    /// Per-pair summand of the multi-layer objective at the returned assignments.
    pub objective: Vec<f64>,
    pub consistency: f64,
    pub trace: Option<SolveTrace>,
}

impl SolveReport {
    pub fn total_objective(&self) -> f64 {
        self.objective.iter().sum()
    }
}

/// Solves a problem with MatchEIG as the reweight synchronizer.
pub fn solve(p: &ProblemSet, params: &MLSyncParams) -> Result<SolveReport> {
    solve_with(p, params, &MatchEig)
}

struct SyncState {
    s_sync: Vec<f64>,
    u_sync: Vec<DMatrix<f64>>,
}

pub fn solve_with(
    p: &ProblemSet,
    params: &MLSyncParams,
    synchronizer: &dyn Synchronizer,
) -> Result<SolveReport> {
    let violations = validate_problem(p);
    if !violations.is_empty() {
        return Err(Error::InvalidProblem(violations));
    }
    params.validate()?;

    let sizes = p.sizes();
    let n_ref = params
        .n_ref
        .unwrap_or_else(|| sizes.iter().copied().max().unwrap_or(0));
    let mut walkers = p
        .pairs
        .iter()
        .map(PairWalker::new)
        .collect::<Result<Vec<_>>>()?;
    let mut trace = SolveTrace::default();

    let mut last = Vec::new();
    for _ in 0..params.bootstrap_iters {
        last = step_all(&mut walkers, &params.walker, None)?;
        trace.deltas.push(max_delta(&last));
    }

    let mut state = None;
    if params.synchronizes() && !last.is_empty() {
        state = Some(synchronize(&last, &sizes, n_ref, synchronizer)?);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        iterations += 1;
        let updates = step_all(
            &mut walkers,
            &params.walker,
            state.as_ref().map(|s| (s, params)),
        )?;
        let delta = max_delta(&updates);
        trace.deltas.push(delta);
        if params.synchronizes() {
            let next = synchronize(&updates, &sizes, n_ref, synchronizer)?;
            trace.s_sync.push(next.s_sync.clone());
            state = Some(next);
        }
        if delta <= params.conv_tol {
            converged = true;
            break;
        }
    }

    let relaxed = walkers
        .iter()
        .map(|w| w.relaxed())
        .collect::<Result<Vec<_>>>()?;
    let assignments = relaxed
        .iter()
        .map(|r| hungarian(r.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let confidences: Vec<LayerConfidence> =
        walkers.iter().map(|w| w.confidence().clone()).collect();
    let objective = p
        .pairs
        .iter()
        .zip(&assignments)
        .zip(&confidences)
        .map(|((pair, x), c)| pair_objective(pair, x, &c.s))
        .collect();
    let consistency = consistency(&assignments, &sizes)?;

    Ok(SolveReport {
        assignments,
        relaxed,
        confidences,
        bootstrap_iterations: params.bootstrap_iters,
        iterations,
        converged,
        objective,
        consistency,
        trace: params.trace.then_some(trace),
    })
}

fn step_all(
    walkers: &mut [PairWalker<'_>],
    walker_params: &WalkerParams,
    state: Option<(&SyncState, &MLSyncParams)>,
) -> Result<Vec<PairUpdate>> {
    walkers
        .par_iter_mut()
        .enumerate()
        .map(|(k, w)| {
            let inputs = state.map(|(s, params)| SyncInputs {
                s_sync: &s.s_sync,
                mu: params.mu,
                u_sync: &s.u_sync[k],
                omega: params.omega,
            });
            w.step(walker_params, inputs)
        })
        .collect()
}

fn max_delta(updates: &[PairUpdate]) -> f64 {
    updates.iter().map(|u| u.delta).fold(0.0, f64::max)
}

fn synchronize(
    updates: &[PairUpdate],
    sizes: &[usize],
    n_ref: usize,
    synchronizer: &dyn Synchronizer,
) -> Result<SyncState> {
    let own: Vec<Vec<f64>> = updates.iter().map(|u| u.own_confidence.s.clone()).collect();
    let slices: Vec<DMatrix<f64>> = updates.iter().map(|u| u.aggregated.clone()).collect();
    Ok(SyncState {
        s_sync: mean_confidence(&own),
        u_sync: sync_reweights(&slices, sizes, n_ref, synchronizer)?,
    })
}

/// `(s (x) vec(X))^T P (s (x) vec(X))` for one pair.
pub fn pair_objective(pair: &PairAffinity, x: &Assignment, s: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x.matrix().as_slice());
    let mut total = 0.0;
    for (block, &w) in pair.intra.iter().zip(s) {
        total += w * w * v.dot(&(block * &v));
    }
    if pair.n_layers() > 1 && pair.inter_weight != 0.0 {
        let s_sum: f64 = s.iter().sum();
        let s_sq: f64 = s.iter().map(|w| w * w).sum();
        total += pair.inter_weight * (s_sum * s_sum - s_sq) * v.norm_squared();
    }
    total
}

/// Multi-layer objective summed over all pairs.
pub fn objective(
    p: &ProblemSet,
    assignments: &[Assignment],
    confidences: &[Vec<f64>],
) -> Result<f64> {
    if assignments.len() != p.pairs.len() || confidences.len() != p.pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments and {} confidence vectors for {} pairs",
            assignments.len(),
            confidences.len(),
            p.pairs.len()
        )));
    }
    let mut total = 0.0;
    for ((pair, x), s) in p.pairs.iter().zip(assignments).zip(confidences) {
        if x.rows() != pair.n_l || x.cols() != pair.n_m || s.len() != pair.n_layers() {
            return Err(Error::DimensionMismatch(format!(
                "pair ({},{}) shapes",
                pair.l, pair.m
            )));
        }
        total += pair_objective(pair, x, s);
    }
    Ok(total)
}
