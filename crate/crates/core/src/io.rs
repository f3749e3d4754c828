//! JSON documents for problems and solutions.
//!
//! Problem file:
//! `{"graphs":[{"id":int,"n":int,"channels":[[row-major floats]...],"beta":[floats]?}...],
//!   "ground_truth":{"n_ref":int,"perms":[[row-major 0/1]...]}?, "seed":int}`

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{build_pair_affinity, AffinityConfig};
use crate::engine::SolveReport;
use crate::error::{Error, Result};
use crate::model::{pair_list, Assignment, AttributedGraph, GroundTruth, ProblemSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub id: usize,
    pub n: usize,
    pub channels: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDocument {
    pub n_ref: usize,
    pub perms: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub graphs: Vec<GraphDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthDocument>,
    pub seed: u64,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl ProblemDocument {
    pub fn from_problem(p: &ProblemSet) -> Self {
        let graphs = p
            .graphs
            .iter()
            .map(|g| GraphDocument {
                id: g.id,
                n: g.n_vertices,
                channels: g.channels.iter().map(row_major).collect(),
                beta: g.beta.clone(),
            })
            .collect();
        let ground_truth = p.ground_truth.as_ref().map(|gt| GroundTruthDocument {
            n_ref: gt.n_ref,
            perms: gt
                .perms
                .iter()
                .map(|u| row_major(u).into_iter().map(|v| v as u8).collect())
                .collect(),
        });
        Self {
            graphs,
            ground_truth,
            seed: p.master_seed,
        }
    }

    /// Graphs without pair affinities; shape errors are reported together.
    pub fn graphs(&self) -> Result<Vec<AttributedGraph>> {
        let mut problems = Vec::new();
        for (pos, g) in self.graphs.iter().enumerate() {
            if g.id != pos {
                problems.push(format!("graph at position {pos} has id {}", g.id));
            }
            for (c, ch) in g.channels.iter().enumerate() {
                if ch.len() != g.n * g.n {
                    problems.push(format!(
                        "graph {} channel {c}: {} values for n = {}",
                        g.id,
                        ch.len(),
                        g.n
                    ));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidProblem(problems));
        }
        Ok(self
            .graphs
            .iter()
            .map(|g| AttributedGraph {
                id: g.id,
                n_vertices: g.n,
                channels: g
                    .channels
                    .iter()
                    .map(|ch| DMatrix::from_row_slice(g.n, g.n, ch))
                    .collect(),
                beta: g.beta.clone(),
            })
            .collect())
    }

    /// Builds the full problem, computing every pair affinity with `cfg`.
    pub fn to_problem(&self, cfg: &AffinityConfig) -> Result<ProblemSet> {
        let graphs = self.graphs()?;
        let ground_truth = match &self.ground_truth {
            None => None,
            Some(doc) => {
                let mut perms = Vec::with_capacity(doc.perms.len());
                for (l, flat) in doc.perms.iter().enumerate() {
                    let rows = graphs.get(l).map_or(0, |g| g.n_vertices);
                    if flat.len() != rows * doc.n_ref {
                        return Err(Error::InvalidProblem(vec![format!(
                            "ground truth graph {l}: {} values, expected {}x{}",
                            flat.len(),
                            rows,
                            doc.n_ref
                        )]));
                    }
                    let vals: Vec<f64> = flat.iter().map(|&v| v as f64).collect();
                    perms.push(DMatrix::from_row_slice(rows, doc.n_ref, &vals));
                }
                Some(GroundTruth {
                    n_ref: doc.n_ref,
                    perms,
                })
            }
        };
        let pairs = pair_list(graphs.len())
            .into_par_iter()
            .map(|(l, m)| {
                build_pair_affinity(
                    &graphs[l],
                    &graphs[m],
                    cfg.sigma2,
                    cfg.kernel,
                    cfg.inter_weight,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProblemSet {
            graphs,
            pairs,
            ground_truth,
            master_seed: self.seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub l: usize,
    pub m: usize,
    pub rows: usize,
    pub cols: usize,
    pub matches: Vec<(usize, usize)>,
    pub confidence: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub pairs: Vec<PairSolution>,
    pub iterations: usize,
    pub bootstrap_iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub consistency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl SolutionDocument {
    pub fn from_report(p: &ProblemSet, report: &SolveReport, accuracy: Option<f64>) -> Self {
        let pairs = p
            .pairs
            .iter()
            .zip(&report.assignments)
            .zip(&report.confidences)
            .zip(&report.objective)
            .map(|(((pair, x), c), &obj)| PairSolution {
                l: pair.l,
                m: pair.m,
                rows: x.rows(),
                cols: x.cols(),
                matches: x.matches(),
                confidence: c.s.clone(),
                objective: obj,
            })
            .collect();
        Self {
            pairs,
            iterations: report.iterations,
            bootstrap_iterations: report.bootstrap_iterations,
            converged: report.converged,
            objective: report.total_objective(),
            consistency: report.consistency,
            accuracy,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn assignments(&self) -> Result<Vec<Assignment>> {
        self.pairs
            .iter()
            .map(|p| Assignment::from_matches(p.rows, p.cols, &p.matches))
            .collect()
    }
}
