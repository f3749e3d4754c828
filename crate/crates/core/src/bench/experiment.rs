use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::integrated_affinity;
use crate::engine::{solve, MLSyncParams};
use crate::error::{Error, Result};
use crate::kernels::hungarian;
use crate::metrics::{accuracy, consistency};
use crate::model::{Assignment, ProblemSet};
use crate::sync::{match_eig, match_sync, pairwise_from_projections, BlockAssignment};
use crate::synthgen::{derive_seed, generate_problem, SynthConfig};
use crate::walkers::{mlrwm, rrwm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Deformation,
    Outlier,
    GraphSetSize,
}

impl ExperimentKind {
    fn apply(self, base: &SynthConfig, value: f64) -> Result<SynthConfig> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidArgument(format!(
                    "{self} sweep needs whole numbers, got {value}"
                )))
            }
        };
        Ok(match self {
            Self::Deformation => SynthConfig {
                epsilon: value,
                ..*base
            },
            Self::Outlier => SynthConfig {
                n_outliers: count()?,
                ..*base
            },
            Self::GraphSetSize => SynthConfig {
                n_graphs: count()?,
                ..*base
            },
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Deformation => "deformation",
            Self::Outlier => "outlier",
            Self::GraphSetSize => "graph_set_size",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RrwmIntegrated,
    MlrwmMulti,
    MlsyncMulti,
    MatcheigPost,
    MatchsyncPost,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RrwmIntegrated,
        Method::MlrwmMulti,
        Method::MlsyncMulti,
        Method::MatcheigPost,
        Method::MatchsyncPost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RrwmIntegrated => "rrwm_integrated",
            Self::MlrwmMulti => "mlrwm_multi",
            Self::MlsyncMulti => "mlsync_multi",
            Self::MatcheigPost => "matcheig_post",
            Self::MatchsyncPost => "matchsync_post",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

fn default_trials() -> usize {
    50
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// One sweep: a parameter varied over `values` with everything else fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Label written into the `experiment` CSV column; defaults to the kind.
    #[serde(default)]
    pub name: Option<String>,
    pub kind: ExperimentKind,
    pub values: Vec<f64>,
    #[serde(default)]
    pub fixed: SynthConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Master seed; trial `k` uses `derive_seed(seed, k, 0)` for every swept value.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: MLSyncParams,
}

impl ExperimentSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "experiment {} sweeps no values",
                self.label()
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "experiment {} runs no methods",
                self.label()
            )));
        }
        self.params.validate()?;
        for &v in &self.values {
            self.kind.apply(&self.fixed, v)?.validate()?;
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64, 0)
    }
}

/// Named benchmark sweeps. Each expands to one experiment per attribute count.
pub fn preset(name: &str, seed: u64) -> Result<Vec<ExperimentSpec>> {
    let (kind, values): (ExperimentKind, Vec<f64>) = match name {
        "paper-deformation" => (
            ExperimentKind::Deformation,
            vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        ),
        "paper-outlier" => (ExperimentKind::Outlier, (0..=10).map(f64::from).collect()),
        "paper-graph-set-size" => (ExperimentKind::GraphSetSize, GRAPH_SET_SIZES.to_vec()),
        other => return Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
    };
    Ok([5usize, 10]
        .into_iter()
        .map(|n_channels| ExperimentSpec {
            name: Some(format!("{kind}_natt{n_channels}")),
            kind,
            values: values.clone(),
            fixed: SynthConfig {
                n_channels,
                ..SynthConfig::default()
            },
            trials: default_trials(),
            methods: default_methods(),
            seed,
            params: MLSyncParams::default(),
        })
        .collect())
}

pub const PRESETS: [&str; 3] = ["paper-deformation", "paper-outlier", "paper-graph-set-size"];

/// Graph-set sizes swept by the `paper-graph-set-size` preset.
pub const GRAPH_SET_SIZES: [f64; 6] = [4.0, 8.0, 10.0, 12.0, 16.0, 20.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: Method,
    pub swept_value: f64,
    pub trial: usize,
    pub accuracy: f64,
    pub consistency: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
}

/// Outcome of one method on one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub assignments: Vec<Assignment>,
    pub iterations: usize,
    pub runtime_ms: f64,
}

/// Runs each method on `p`, in the given order. RRWM results are computed once
/// and shared by the post-synchronization baselines.
pub fn run_methods(
    p: &ProblemSet,
    methods: &[Method],
    params: &MLSyncParams,
) -> Result<Vec<(Method, MethodOutcome)>> {
    let mut rrwm_cache: Option<MethodOutcome> = None;
    let mut out = Vec::with_capacity(methods.len());
    let sizes = p.sizes();
    let n_ref = sizes.iter().copied().max().unwrap_or(0);
    for &method in methods {
        let start = Instant::now();
        let rrwm_base = |cache: &mut Option<MethodOutcome>| -> Result<MethodOutcome> {
            if let Some(c) = cache {
                return Ok(c.clone());
            }
            let t0 = Instant::now();
            let mut iterations = 0;
            let assignments = p
                .pairs
                .iter()
                .map(|pair| {
                    let r = rrwm(&integrated_affinity(pair), &params.walker)?;
                    iterations = iterations.max(r.iterations);
                    hungarian(r.relaxed.matrix())
                })
                .collect::<Result<Vec<_>>>()?;
            let outcome = MethodOutcome {
                assignments,
                iterations,
                runtime_ms: ms(t0),
            };
            *cache = Some(outcome.clone());
            Ok(outcome)
        };
        let outcome = match method {
            Method::RrwmIntegrated => rrwm_base(&mut rrwm_cache)?,
            Method::MlrwmMulti => {
                let mut iterations = 0;
                let assignments = p
                    .pairs
                    .iter()
                    .map(|pair| {
                        let r = mlrwm(pair, &params.walker)?;
                        iterations = iterations.max(r.iterations);
                        hungarian(r.relaxed.matrix())
                    })
                    .collect::<Result<Vec<_>>>()?;
                MethodOutcome {
                    assignments,
                    iterations,
                    runtime_ms: ms(start),
                }
            }
            Method::MlsyncMulti => {
                let report = solve(p, params)?;
                MethodOutcome {
                    assignments: report.assignments,
                    iterations: report.bootstrap_iterations + report.iterations,
                    runtime_ms: ms(start),
                }
            }
            Method::MatcheigPost => {
                let base = rrwm_base(&mut rrwm_cache)?;
                let t0 = Instant::now();
                let x = block_assignment(&sizes, &base.assignments)?;
                let synced = match_eig(&x, n_ref)?;
                let assignments = synced
                    .pair_blocks()
                    .iter()
                    .map(hungarian)
                    .collect::<Result<Vec<_>>>()?;
                MethodOutcome {
                    assignments,
                    iterations: base.iterations,
                    runtime_ms: base.runtime_ms + ms(t0),
                }
            }
            Method::MatchsyncPost => {
                let base = rrwm_base(&mut rrwm_cache)?;
                let t0 = Instant::now();
                let x = block_assignment(&sizes, &base.assignments)?;
                let us = match_sync(&x, n_ref)?;
                let assignments = pairwise_from_projections(&us)
                    .into_iter()
                    .map(|b| Assignment::relaxed(b.map(|v| if v > 0.5 { 1.0 } else { 0.0 })))
                    .collect::<Result<Vec<_>>>()?;
                MethodOutcome {
                    assignments,
                    iterations: base.iterations,
                    runtime_ms: base.runtime_ms + ms(t0),
                }
            }
        };
        out.push((method, outcome));
    }
    Ok(out)
}

fn block_assignment(sizes: &[usize], xs: &[Assignment]) -> Result<BlockAssignment> {
    let blocks: Vec<DMatrix<f64>> = xs.iter().map(|x| x.matrix().clone()).collect();
    BlockAssignment::from_pairs(sizes, &blocks)
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Generates every `(value, trial)` problem and scores each method on it.
/// Rows are ordered by swept value, then trial, then method (spec order).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let label = spec.label();
    let tasks: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let chunks = tasks
        .par_iter()
        .map(|&(vi, trial)| -> Result<Vec<ResultRow>> {
            let value = spec.values[vi];
            let cfg = SynthConfig {
                seed: spec.trial_seed(trial),
                ..spec.kind.apply(&spec.fixed, value)?
            };
            let problem = generate_problem(&cfg)?;
            let sizes = problem.sizes();
            run_methods(&problem, &spec.methods, &spec.params)?
                .into_iter()
                .map(|(method, o)| {
                    Ok(ResultRow {
                        experiment: label.clone(),
                        method,
                        swept_value: value,
                        trial,
                        accuracy: accuracy(&o.assignments, problem.ground_truth.as_ref())?,
                        consistency: consistency(&o.assignments, &sizes)?,
                        iterations: o.iterations,
                        runtime_ms: o.runtime_ms,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
