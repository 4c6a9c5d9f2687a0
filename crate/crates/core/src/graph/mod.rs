//! Immutable graphs: normalised adjacency, node features, labels and splits.

mod csr;
mod io;
mod sbm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use csr::{normalize_adjacency, spmm, spmm_count, CsrMatrix};
pub use io::{load_graph, write_graph};
pub use sbm::{generate_sbm, split_for, SbmSpec};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::nn::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: CsrMatrix,
    features: DenseMatrix,
    labels: DenseMatrix,
    splits: Vec<Split>,
    task: Task,
}

impl Graph {
    /// Assembles a graph from an already-normalised adjacency and checks every
    /// invariant.
    pub fn new(
        adjacency: CsrMatrix,
        features: DenseMatrix,
        labels: DenseMatrix,
        splits: Vec<Split>,
        task: Task,
    ) -> Result<Self> {
        let g = Self {
            adjacency,
            features,
            labels,
            splits,
            task,
        };
        g.validate()?;
        Ok(g)
    }

    /// Normalises `edges` and assembles the graph.
    pub fn from_edges(
        edges: &[(usize, usize)],
        features: DenseMatrix,
        labels: DenseMatrix,
        splits: Vec<Split>,
        task: Task,
    ) -> Result<Self> {
        let adjacency = normalize_adjacency(edges, features.rows())?;
        Self::new(adjacency, features, labels, splits, task)
    }

    fn validate(&self) -> Result<()> {
        let n = self.adjacency.num_rows();
        if self.features.rows() != n || self.labels.rows() != n || self.splits.len() != n {
            return Err(Error::Validation(format!(
                "row counts disagree: adjacency {n}, features {}, labels {}, splits {}",
                self.features.rows(),
                self.labels.rows(),
                self.splits.len()
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        for r in 0..n {
            if self.adjacency.row_indices(r).is_empty() {
                return Err(Error::Validation(format!("adjacency row {r} is empty")));
            }
            for (c, v) in self.adjacency.row(r) {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::Validation(format!(
                        "adjacency entry ({r},{c}) = {v} outside (0,1]"
                    )));
                }
                if self.adjacency.get(c, r) != v {
                    return Err(Error::Validation(format!(
                        "adjacency not symmetric at ({r},{c})"
                    )));
                }
            }
            let row = self.labels.row(r);
            if row.iter().any(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::Validation(format!("label row {r} is not 0/1")));
            }
            if self.task == Task::Multiclass && row.iter().sum::<f64>() != 1.0 {
                return Err(Error::Validation(format!(
                    "multiclass label row {r} does not sum to 1"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_rows()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.labels.cols()
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &DenseMatrix {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Node ids carrying `split`, ascending.
    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn all_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).collect()
    }

    /// Undirected edges `(i, j)` with `i < j`, recovered from the adjacency
    /// pattern; the implicit self-loops are omitted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.num_nodes() {
            for &j in self.adjacency.row_indices(i) {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Nodes within one hop of `nodes` (self included), ascending.
    pub fn expand_one_hop(&self, nodes: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.num_nodes()];
        for &i in nodes {
            for &j in self.adjacency.row_indices(i) {
                mark[j] = true;
            }
        }
        mark.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect()
    }

    /// Class index per node for multi-class graphs.
    pub fn class_of(&self, node: usize) -> Option<usize> {
        if self.task != Task::Multiclass {
            return None;
        }
        self.labels.row(node).iter().position(|&y| y == 1.0)
    }
}
