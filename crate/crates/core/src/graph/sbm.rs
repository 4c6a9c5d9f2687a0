//! Stochastic block model generator for synthetic node-classification tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::matrix::DenseMatrix;
use crate::nn::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub num_nodes: usize,
    pub num_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise around each block's mean.
    pub feature_noise: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks < 2 {
            return Err(Error::Config("num_blocks must be at least 2".into()));
        }
        if self.num_nodes < self.num_blocks {
            return Err(Error::Config("num_nodes must be at least num_blocks".into()));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if !(self.feature_noise >= 0.0) || !self.feature_noise.is_finite() {
            return Err(Error::Config("feature_noise must be a finite stddev".into()));
        }
        Ok(())
    }

    /// Block of `node`: contiguous blocks whose sizes differ by at most one.
    pub fn block_of(&self, node: usize) -> usize {
        node * self.num_blocks / self.num_nodes
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// 60/20/20 train/val/test as a pure function of `(node, seed)`.
pub fn split_for(node: usize, seed: u64) -> Split {
    let h = splitmix64(seed ^ splitmix64(node as u64)) % 100;
    match h {
        0..=59 => Split::Train,
        60..=79 => Split::Val,
        _ => Split::Test,
    }
}

/// Draws a multi-class SBM graph. Labels are block ids; features are a
/// per-block Gaussian mean vector plus isotropic noise.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.num_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut edges = Vec::new();
    for i in 0..n {
        let bi = spec.block_of(i);
        for j in (i + 1)..n {
            let p = if spec.block_of(j) == bi {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }

    let means: Vec<Vec<f64>> = (0..spec.num_blocks)
        .map(|_| {
            (0..spec.feature_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut features = DenseMatrix::zeros(n, spec.feature_dim);
    for i in 0..n {
        let mean = &means[spec.block_of(i)];
        for (x, &mu) in features.row_mut(i).iter_mut().zip(mean) {
            *x = mu + spec.feature_noise * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let labels = DenseMatrix::from_fn(n, spec.num_blocks, |i, c| {
        if spec.block_of(i) == c {
            1.0
        } else {
            0.0
        }
    });
    let splits = (0..n).map(|i| split_for(i, spec.seed)).collect();
    Graph::from_edges(&edges, features, labels, splits, Task::Multiclass)
}
