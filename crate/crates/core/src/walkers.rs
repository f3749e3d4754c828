//! Reweighted random-walk matchers for a single graph pair.
//!
//! [`rrwm`] walks one layer; [`mlrwm`] walks every attribute layer, weighs
//! the per-layer reweights by layer confidence and diffuses the aggregate
//! back to all layers. [`PairWalker`] holds the per-pair state and is reused
//! by the synchronized multi-graph solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::affinity::{to_transition, TransitionMatrix};
use crate::error::{Error, Result};
use crate::kernels::{sinkhorn, LOOP_MAX_ITERS, LOOP_TOL};
use crate::model::{Assignment, PairAffinity};
use crate::sync::{
    layer_confidence_cached, merge_confidence, normalize_confidence, BlockStats, ConfidenceForm,
    LayerConfidence,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkerParams {
    /// Inflation factor.
    pub rho: f64,
    /// Weight of the plain walk against the reweighted jump.
    pub theta: f64,
    /// Minimum layer confidence.
    pub tau: f64,
    pub max_iters: usize,
    /// L1 distance between successive distributions that counts as converged.
    pub conv_tol: f64,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
    /// Sum or mean form of the layer confidence.
    pub confidence: ConfidenceForm,
    /// Keep every iterate in [`WalkResult::trajectory`].
    pub trace: bool,
}

impl Default for WalkerParams {
    fn default() -> Self {
        Self {
            rho: 100.0,
            theta: 0.2,
            tau: 0.1,
            max_iters: 300,
            conv_tol: 1e-8,
            sinkhorn_iters: LOOP_MAX_ITERS,
            sinkhorn_tol: LOOP_TOL,
            confidence: ConfidenceForm::Sum,
            trace: false,
        }
    }
}

impl WalkerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0,1], got {}", self.theta));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0,1), got {}", self.tau));
        }
        if !(self.conv_tol > 0.0) {
            return bad(format!("conv_tol must be positive, got {}", self.conv_tol));
        }
        Ok(())
    }
}

/// Outcome of a pairwise walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkResult {
    /// Layer-summed final distribution reshaped to `N_l x N_m`.
    pub relaxed: Assignment,
    /// Final confidence (always `[1]` for [`rrwm`]).
    pub confidence: LayerConfidence,
    pub iterations: usize,
    pub converged: bool,
    /// L1 change of the distribution at each iteration.
    pub deltas: Vec<f64>,
    /// Iterates after each update, when tracing.
    pub trajectory: Vec<DVector<f64>>,
}

/// Single-layer reweighted random walks.
pub fn rrwm(affinity: &PairAffinity, params: &WalkerParams) -> Result<WalkResult> {
    params.validate()?;
    if affinity.n_layers() != 1 {
        return Err(Error::InvalidArgument(format!(
            "rrwm needs a single-layer affinity, got {} layers",
            affinity.n_layers()
        )));
    }
    ensure_nondegenerate(affinity)?;
    let (n_l, n_m) = (affinity.n_l, affinity.n_m);
    let d = affinity.block_dim();
    let transition = to_transition(affinity);

    let mut t = DVector::from_element(d, 1.0 / d as f64);
    let mut deltas = Vec::new();
    let mut trajectory = Vec::new();
    let mut converged = false;
    while deltas.len() < params.max_iters {
        let t_bar = transition.step(&t);
        let u = reweight(t_bar.as_slice(), n_l, n_m, params)?;
        let u = DVector::from_column_slice(u.as_slice());
        let next = jump(&t_bar, &u, params.theta);
        let delta = (&next - &t).lp_norm(1);
        t = next;
        deltas.push(delta);
        if params.trace {
            trajectory.push(t.clone());
        }
        if delta <= params.conv_tol {
            converged = true;
            break;
        }
    }
    Ok(WalkResult {
        relaxed: Assignment::relaxed(DMatrix::from_column_slice(n_l, n_m, t.as_slice()))?,
        confidence: LayerConfidence {
            s: vec![1.0],
            raw: vec![0.0],
        },
        iterations: deltas.len(),
        converged,
        deltas,
        trajectory,
    })
}

/// Multi-layer reweighted random walks with confidence-weighted aggregation.
pub fn mlrwm(affinity: &PairAffinity, params: &WalkerParams) -> Result<WalkResult> {
    params.validate()?;
    let mut walker = PairWalker::new(affinity)?;
    let mut deltas = Vec::new();
    let mut trajectory = Vec::new();
    let mut converged = false;
    while deltas.len() < params.max_iters {
        let update = walker.step(params, None)?;
        deltas.push(update.delta);
        if params.trace {
            trajectory.push(walker.distribution().clone());
        }
        if update.delta <= params.conv_tol {
            converged = true;
            break;
        }
    }
    Ok(WalkResult {
        relaxed: walker.relaxed()?,
        confidence: walker.confidence().clone(),
        iterations: deltas.len(),
        converged,
        deltas,
        trajectory,
    })
}

fn ensure_nondegenerate(affinity: &PairAffinity) -> Result<()> {
    if affinity.block_dim() == 0 {
        return Err(Error::DegenerateAffinity(format!(
            "pair ({},{}) has no candidates",
            affinity.l, affinity.m
        )));
    }
    if affinity.intra.iter().all(|b| b.iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateAffinity(format!(
            "pair ({},{}) has an all-zero affinity",
            affinity.l, affinity.m
        )));
    }
    Ok(())
}

/// Inflation `exp(rho * t / max t)` followed by Sinkhorn balancing, as an
/// `n_l x n_m` matrix. A slice with no mass reweights uniformly.
fn reweight(slice: &[f64], n_l: usize, n_m: usize, params: &WalkerParams) -> Result<DMatrix<f64>> {
    let max = slice.iter().copied().fold(0.0f64, f64::max);
    let inflated = if max > 0.0 {
        DMatrix::from_iterator(
            n_l,
            n_m,
            slice.iter().map(|&v| (params.rho * v / max).exp()),
        )
    } else {
        DMatrix::from_element(n_l, n_m, 1.0)
    };
    Ok(sinkhorn(&inflated, params.sinkhorn_iters, params.sinkhorn_tol)?.matrix)
}

/// `theta * t_bar + (1 - theta) * u / sum(u)`, renormalized to a probability vector.
fn jump(t_bar: &DVector<f64>, u: &DVector<f64>, theta: f64) -> DVector<f64> {
    let u_mass = u.sum();
    let mut next = t_bar * theta + u * ((1.0 - theta) / u_mass);
    let total = next.sum();
    next /= total;
    next
}

/// Synchronization inputs for one pair update.
#[derive(Debug, Clone, Copy)]
pub struct SyncInputs<'a> {
    pub s_sync: &'a [f64],
    pub mu: f64,
    pub u_sync: &'a DMatrix<f64>,
    pub omega: f64,
}

/// What one pair update hands to the synchronization barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PairUpdate {
    pub delta: f64,
    /// Confidence normalized from this pair's own evidence, before merging.
    pub own_confidence: LayerConfidence,
    /// Confidence-weighted reweight slice before the synchronized merge.
    pub aggregated: DMatrix<f64>,
}

/// Walker state of one graph pair across all layers.
#[derive(Debug, Clone)]
pub struct PairWalker<'a> {
    affinity: &'a PairAffinity,
    transition: TransitionMatrix,
    stats: Vec<BlockStats>,
    t: DVector<f64>,
    confidence: LayerConfidence,
}

impl<'a> PairWalker<'a> {
    /// Uniform start distribution over every layer's candidates.
    pub fn new(affinity: &'a PairAffinity) -> Result<Self> {
        ensure_nondegenerate(affinity)?;
        let dim = affinity.block_dim() * affinity.n_layers();
        let n_layers = affinity.n_layers();
        Ok(Self {
            affinity,
            transition: to_transition(affinity),
            stats: affinity.intra.iter().map(BlockStats::new).collect(),
            t: DVector::from_element(dim, 1.0 / dim as f64),
            confidence: LayerConfidence {
                s: vec![1.0; n_layers],
                raw: vec![0.0; n_layers],
            },
        })
    }

    pub fn distribution(&self) -> &DVector<f64> {
        &self.t
    }

    /// Confidence used in the most recent update (after any synchronized merge).
    pub fn confidence(&self) -> &LayerConfidence {
        &self.confidence
    }

    /// Layer-summed distribution as an `N_l x N_m` relaxed assignment.
    pub fn relaxed(&self) -> Result<Assignment> {
        let d = self.affinity.block_dim();
        let mut sum = DVector::zeros(d);
        for alpha in 0..self.affinity.n_layers() {
            sum += self.t.rows(alpha * d, d);
        }
        Assignment::relaxed(DMatrix::from_column_slice(
            self.affinity.n_l,
            self.affinity.n_m,
            sum.as_slice(),
        ))
    }

    /// One iteration: walk, reweight every layer, weigh layers by confidence,
    /// optionally merge with the synchronized quantities, diffuse and jump.
    pub fn step(
        &mut self,
        params: &WalkerParams,
        sync: Option<SyncInputs<'_>>,
    ) -> Result<PairUpdate> {
        let (n_l, n_m) = (self.affinity.n_l, self.affinity.n_m);
        let d = self.affinity.block_dim();
        let n_layers = self.affinity.n_layers();

        let t_bar = self.transition.step(&self.t);

        let mut layer_u = Vec::with_capacity(n_layers);
        let mut raw = Vec::with_capacity(n_layers);
        for alpha in 0..n_layers {
            let u = reweight(
                &t_bar.as_slice()[alpha * d..(alpha + 1) * d],
                n_l,
                n_m,
                params,
            )?;
            raw.push(
                layer_confidence_cached(
                    &self.affinity.intra[alpha],
                    &self.stats[alpha],
                    &u,
                    params.confidence,
                )?
                .value,
            );
            layer_u.push(u);
        }
        let own = normalize_confidence(&raw, params.tau);
        let s = match sync {
            Some(inputs) => merge_confidence(&own.s, inputs.s_sync, inputs.mu),
            None => own.s.clone(),
        };

        let weight: f64 = s.iter().sum();
        let mut aggregated = DMatrix::zeros(n_l, n_m);
        for (u, &w) in layer_u.iter().zip(&s) {
            aggregated += u * w;
        }
        aggregated /= weight;

        let merged = match sync {
            Some(inputs) => crate::sync::merge_reweights(&aggregated, inputs.u_sync, inputs.omega),
            None => aggregated.clone(),
        };

        let mut u = DVector::zeros(d * n_layers);
        for alpha in 0..n_layers {
            u.rows_mut(alpha * d, d).copy_from_slice(merged.as_slice());
        }
        let next = jump(&t_bar, &u, params.theta);
        debug_assert!(next.iter().all(|&v| v >= 0.0));
        debug_assert!((next.sum() - 1.0).abs() < 1e-9);

        let delta = (&next - &self.t).lp_norm(1);
        self.t = next;
        self.confidence = LayerConfidence {
            s,
            raw: own.raw.clone(),
        };
        Ok(PairUpdate {
            delta,
            own_confidence: own,
            aggregated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::hungarian;

    /// Candidates on the diagonal of a 2x2 assignment support each other.
    fn diagonal_favoring() -> PairAffinity {
        // Candidate order: (0,0)=0, (1,0)=1, (0,1)=2, (1,1)=3.
        let mut block = DMatrix::from_element(4, 4, 0.1);
        block[(0, 3)] = 1.0;
        block[(3, 0)] = 1.0;
        block[(0, 0)] = 1.0;
        block[(3, 3)] = 1.0;
        PairAffinity {
            l: 0,
            m: 1,
            n_l: 2,
            n_m: 2,
            intra: vec![block],
            inter_weight: 1.0,
        }
    }

    #[test]
    fn rrwm_prefers_diagonal() {
        let r = rrwm(&diagonal_favoring(), &WalkerParams::default()).unwrap();
        let x = r.relaxed.matrix();
        assert!(x[(0, 0)] > x[(0, 1)] && x[(1, 1)] > x[(1, 0)]);
        assert_eq!(hungarian(x).unwrap().matches(), vec![(0, 0), (1, 1)]);
        assert!(r.converged);
    }

    #[test]
    fn rrwm_rejects_multi_layer() {
        let mut p = diagonal_favoring();
        p.intra.push(p.intra[0].clone());
        assert!(rrwm(&p, &WalkerParams::default()).is_err());
    }

    #[test]
    fn zero_affinity_is_degenerate() {
        let mut p = diagonal_favoring();
        p.intra[0].fill(0.0);
        assert!(matches!(
            mlrwm(&p, &WalkerParams::default()),
            Err(Error::DegenerateAffinity(_))
        ));
    }

    #[test]
    fn iterations_bounded_by_budget() {
        let params = WalkerParams {
            max_iters: 3,
            conv_tol: 1e-300,
            ..Default::default()
        };
        let r = mlrwm(&diagonal_favoring(), &params).unwrap();
        assert_eq!(r.iterations, 3);
        assert!(!r.converged);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let params = WalkerParams {
            theta: 1.5,
            ..Default::default()
        };
        assert!(rrwm(&diagonal_favoring(), &params).is_err());
    }
}
