//! K-layer GCN: parameters, cached embeddings, single-layer primitives.
//!
//! Layer `k` (1-based, `1..=K`) maps `X^{k-1}` to `X^k = σ(Ā X^{k-1} W^k)`.
//! The classifier produces `Ŷ = X^K W^{K+1}`. Neither layers nor classifier
//! carry a bias.

mod checkpoint;
mod layer;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use layer::{ClassicalLayer, GraphLayer, LayerOutput};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{spmm, Graph};
use crate::matrix::{matmul, matmul_tn, DenseMatrix};
use crate::nn::{Activation, LossDerivative};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `W^1..W^K`, `W^k` is `d_{k-1} x d_k`.
    pub layers: Vec<DenseMatrix>,
    /// `W^{K+1}`, `d_K x C`.
    pub classifier: DenseMatrix,
    pub activation: Activation,
}

/// Identifies one parameter matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    /// `W^k` with `k` in `1..=K`.
    Layer(usize),
    Classifier,
}

impl ModelParams {
    /// Glorot-uniform initialisation. `hidden` lists `d_1..d_K`.
    pub fn glorot(
        feature_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-limit..=limit))
        };
        let mut layers = Vec::with_capacity(hidden.len());
        let mut prev = feature_dim;
        for &d in hidden {
            layers.push(init(prev, d));
            prev = d;
        }
        let classifier = init(prev, num_classes);
        Self {
            layers,
            classifier,
            activation,
        }
    }

    /// Number of graph layers `K`.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `[d_0, d_1, .., d_K, C]`
    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(DenseMatrix::rows).collect();
        dims.push(self.classifier.rows());
        dims.push(self.classifier.cols());
        dims
    }

    pub fn layer(&self, k: usize) -> &DenseMatrix {
        &self.layers[k - 1]
    }

    pub fn get(&self, id: ParamId) -> &DenseMatrix {
        match id {
            ParamId::Layer(k) => &self.layers[k - 1],
            ParamId::Classifier => &self.classifier,
        }
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        match id {
            ParamId::Layer(k) => &mut self.layers[k - 1],
            ParamId::Classifier => &mut self.classifier,
        }
    }

    /// All parameter ids, input side first.
    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = (1..=self.num_layers()).map(ParamId::Layer).collect();
        ids.push(ParamId::Classifier);
        ids
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseMatrix::is_finite) && self.classifier.is_finite()
    }

    /// Checks chained dimensions and agreement with `graph`.
    pub fn check_against(&self, graph: &Graph) -> Result<()> {
        let mut prev = graph.feature_dim();
        for (i, w) in self.layers.iter().enumerate() {
            if w.rows() != prev {
                return Err(Error::shape(
                    "model",
                    format!("W^{} has {} rows, expected {prev}", i + 1, w.rows()),
                ));
            }
            prev = w.cols();
        }
        if self.classifier.rows() != prev || self.classifier.cols() != graph.num_classes() {
            return Err(Error::shape(
                "model",
                format!(
                    "classifier is {:?}, expected ({prev}, {})",
                    self.classifier.shape(),
                    graph.num_classes()
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn classical(&self, k: usize) -> ClassicalLayer<'_> {
        ClassicalLayer {
            weight: self.layer(k),
            activation: self.activation,
        }
    }
}

/// Gradients for every parameter matrix, shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub layers: Vec<DenseMatrix>,
    pub classifier: DenseMatrix,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            classifier: DenseMatrix::zeros(params.classifier.rows(), params.classifier.cols()),
        }
    }

    pub fn get(&self, id: ParamId) -> &DenseMatrix {
        match id {
            ParamId::Layer(k) => &self.layers[k - 1],
            ParamId::Classifier => &self.classifier,
        }
    }

    fn iter(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.layers.iter().chain(std::iter::once(&self.classifier))
    }

    /// L2 norm of all gradients concatenated.
    pub fn l2_norm(&self) -> f64 {
        self.iter().map(DenseMatrix::frobenius_sq).sum::<f64>().sqrt()
    }

    /// L2 norm of `self - other` over all parameters.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("l2_distance", "different layer counts"));
        }
        let mut sq = 0.0;
        for (a, b) in self.iter().zip(other.iter()) {
            sq += a.sub(b)?.frobenius_sq();
        }
        Ok(sq.sqrt())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (a, b) in self.iter().zip(other.iter()) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }
}

/// Stacked embeddings `X^0..X^K` with their pre-activations `Z^1..Z^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    x: Vec<DenseMatrix>,
    pre: Vec<DenseMatrix>,
    stamp: Vec<u64>,
}

impl EmbeddingCache {
    /// `X^k` for `k` in `0..=K`.
    pub fn x(&self, k: usize) -> &DenseMatrix {
        &self.x[k]
    }

    /// `Z^k = Ā X^{k-1} W^k` for `k` in `1..=K`.
    pub fn pre_activation(&self, k: usize) -> &DenseMatrix {
        &self.pre[k - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.pre.len()
    }

    /// Refresh counter of `X^k`, `k` in `1..=K`.
    pub fn stamp(&self, k: usize) -> u64 {
        self.stamp[k - 1]
    }

    pub fn stamps(&self) -> &[u64] {
        &self.stamp
    }

    /// Recomputes `X^k` (and `Z^k`) from the cached `X^{k-1}` and current
    /// parameters.
    pub fn refresh_layer(
        &mut self,
        k: usize,
        graph: &Graph,
        params: &ModelParams,
        stamp: u64,
    ) -> Result<()> {
        let out = params.classical(k).forward(graph, &self.x[k - 1])?;
        self.install(k, out, stamp);
        Ok(())
    }

    /// Installs an already computed layer output as `X^k`.
    pub(crate) fn install(&mut self, k: usize, out: LayerOutput, stamp: u64) {
        self.pre[k - 1] = out.pre_activation;
        self.x[k] = out.output;
        self.stamp[k - 1] = stamp;
    }

    /// Recomputes `X^from..X^K` in order.
    pub fn refresh_from(
        &mut self,
        from: usize,
        graph: &Graph,
        params: &ModelParams,
        stamp: u64,
    ) -> Result<()> {
        for k in from..=self.num_layers() {
            self.refresh_layer(k, graph, params, stamp)?;
        }
        Ok(())
    }

    /// `Ŷ = X^K W^{K+1}`
    pub fn predictions(&self, params: &ModelParams) -> Result<DenseMatrix> {
        matmul(&self.x[self.num_layers()], &params.classifier)
    }
}

/// `X^k = σ(Ā X^{k-1} W^k)`, returning the pre-activation as well.
pub fn layer_forward(
    x_prev: &DenseMatrix,
    w: &DenseMatrix,
    graph: &Graph,
    act: Activation,
) -> Result<LayerOutput> {
    ClassicalLayer {
        weight: w,
        activation: act,
    }
    .forward(graph, x_prev)
}

/// Forward pass through all layers; every cache stamp is set to 0.
pub fn full_forward(graph: &Graph, params: &ModelParams) -> Result<(EmbeddingCache, DenseMatrix)> {
    full_forward_stamped(graph, params, 0)
}

pub(crate) fn full_forward_stamped(
    graph: &Graph,
    params: &ModelParams,
    stamp: u64,
) -> Result<(EmbeddingCache, DenseMatrix)> {
    params.check_against(graph)?;
    let k_layers = params.num_layers();
    let mut x = Vec::with_capacity(k_layers + 1);
    let mut pre = Vec::with_capacity(k_layers);
    x.push(graph.features().clone());
    for k in 1..=k_layers {
        let out = params.classical(k).forward(graph, &x[k - 1])?;
        pre.push(out.pre_activation);
        x.push(out.output);
    }
    let cache = EmbeddingCache {
        x,
        pre,
        stamp: vec![stamp; k_layers],
    };
    let y_hat = cache.predictions(params)?;
    Ok((cache, y_hat))
}

/// `∂L/∂W^k` with `α^k` held constant:
/// `(Ā X^{k-1})^T (α^k ⊙ σ'(Z^k))`.
pub fn layer_param_grad(
    alpha_k: &DenseMatrix,
    x_prev: &DenseMatrix,
    pre_act: &DenseMatrix,
    w: &DenseMatrix,
    graph: &Graph,
    act: Activation,
) -> Result<DenseMatrix> {
    ClassicalLayer {
        weight: w,
        activation: act,
    }
    .param_grad(graph, alpha_k, x_prev, pre_act)
}

/// `∂L/∂W^{K+1} = (X^K)^T G`
pub fn classifier_grad(x_k: &DenseMatrix, g: &LossDerivative) -> Result<DenseMatrix> {
    matmul_tn(x_k, &g.g)
}

/// `Ā X` aggregation, exposed so callers can reuse it across mini-batches.
pub fn aggregate(graph: &Graph, x: &DenseMatrix) -> Result<DenseMatrix> {
    spmm(graph.adjacency(), x)
}
