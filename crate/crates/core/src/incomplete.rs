//! Incomplete task gradients.
//!
//! For layer `k`, `α^k_jp = Σ_{i,c} g_ic ∂ŷ_ic/∂X^k_jp` with the loss
//! derivative `G` held fixed. They obey a single-hop recursion
//!
//! ```text
//! α^K = G (W^{K+1})^T
//! α^k = ∂(α^{k+1} ⊙ X^{k+1}) / ∂X^k  |_{α^{k+1}}
//!     = Ā^T (α^{k+1} ⊙ σ'(Z^{k+1})) (W^{k+1})^T
//! ```
//!
//! and, once known, give every layer's parameter gradient from that layer's
//! inputs alone: `∂L/∂W^k = (Ā X^{k-1})^T (α^k ⊙ σ'(Z^k))`.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::{matmul_nt, DenseMatrix};
use crate::model::{
    classifier_grad, full_forward, ClassicalLayer, EmbeddingCache, GraphLayer, ModelGrads,
    ModelParams,
};
use crate::nn::{loss_derivative_on, Activation, LossDerivative};

/// Cached `α^1..α^K`, each stamped with the refresh that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteGradCache {
    alpha: Vec<DenseMatrix>,
    stamp: Vec<u64>,
}

impl IncompleteGradCache {
    /// Zero-filled cache shaped for `params` on an `n`-node graph.
    pub fn zeros(n: usize, params: &ModelParams) -> Self {
        Self {
            alpha: params
                .layers
                .iter()
                .map(|w| DenseMatrix::zeros(n, w.cols()))
                .collect(),
            stamp: vec![0; params.num_layers()],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.alpha.len()
    }

    /// `α^k`, `k` in `1..=K`.
    pub fn alpha(&self, k: usize) -> &DenseMatrix {
        &self.alpha[k - 1]
    }

    pub fn stamp(&self, k: usize) -> u64 {
        self.stamp[k - 1]
    }

    pub fn stamps(&self) -> &[u64] {
        &self.stamp
    }

    pub fn set(&mut self, k: usize, alpha: DenseMatrix, stamp: u64) -> Result<()> {
        if alpha.shape() != self.alpha[k - 1].shape() {
            return Err(Error::shape(
                "IncompleteGradCache::set",
                format!(
                    "alpha^{k} is {:?}, got {:?}",
                    self.alpha[k - 1].shape(),
                    alpha.shape()
                ),
            ));
        }
        self.alpha[k - 1] = alpha;
        self.stamp[k - 1] = stamp;
        Ok(())
    }
}

/// `α^K = G (W^{K+1})^T`
pub fn alpha_top(g: &LossDerivative, w_cls: &DenseMatrix) -> Result<DenseMatrix> {
    matmul_nt(&g.g, w_cls)
}

/// `α^k` from `α^{k+1}`, the pre-activation `Z^{k+1}` and `W^{k+1}`. Costs
/// exactly one sparse aggregation.
pub fn alpha_backstep(
    alpha_next: &DenseMatrix,
    pre_act_next: &DenseMatrix,
    w_next: &DenseMatrix,
    graph: &Graph,
    act: Activation,
) -> Result<DenseMatrix> {
    ClassicalLayer {
        weight: w_next,
        activation: act,
    }
    .input_grad(graph, alpha_next, pre_act_next)
}

/// Recomputes `G` on `nodes` from the cached embeddings, then every `α^k`
/// top-down from one parameter snapshot. Returns the `G` used.
///
/// `emb` must be fresh with respect to `params` for the result to be the
/// exact incomplete gradient.
pub fn refresh_all_alpha(
    cache: &mut IncompleteGradCache,
    emb: &EmbeddingCache,
    params: &ModelParams,
    graph: &Graph,
    nodes: &[usize],
    stamp: u64,
) -> Result<LossDerivative> {
    let k_layers = params.num_layers();
    let y_hat = emb.predictions(params)?;
    let g = loss_derivative_on(&y_hat, graph.labels(), graph.task(), nodes)?;
    cache.set(k_layers, alpha_top(&g, &params.classifier)?, stamp)?;
    for k in (1..k_layers).rev() {
        let next = alpha_backstep(
            cache.alpha(k + 1),
            emb.pre_activation(k + 1),
            params.layer(k + 1),
            graph,
            params.activation,
        )?;
        cache.set(k, next, stamp)?;
    }
    Ok(g)
}

/// Exact gradient of the loss restricted to `nodes` (normalised by
/// `|nodes|`) at the current parameters: a fresh forward pass, a full α
/// refresh and the per-layer gradient formulas.
pub fn exact_full_gradient(graph: &Graph, params: &ModelParams, nodes: &[usize]) -> Result<ModelGrads> {
    let (emb, _) = full_forward(graph, params)?;
    let mut cache = IncompleteGradCache::zeros(graph.num_nodes(), params);
    let g = refresh_all_alpha(&mut cache, &emb, params, graph, nodes, 0)?;
    let mut layers = Vec::with_capacity(params.num_layers());
    for k in 1..=params.num_layers() {
        layers.push(params.classical(k).param_grad(
            graph,
            cache.alpha(k),
            emb.x(k - 1),
            emb.pre_activation(k),
        )?);
    }
    Ok(ModelGrads {
        layers,
        classifier: classifier_grad(emb.x(params.num_layers()), &g)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, spmm_count, CsrMatrix, SbmSpec, Split};
    use crate::matrix::{matmul, transpose};
    use crate::nn::Task;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sbm(n: usize, seed: u64) -> Graph {
        generate_sbm(&SbmSpec {
            num_nodes: n,
            num_blocks: 2,
            p_in: 0.5,
            p_out: 0.1,
            feature_dim: 3,
            feature_noise: 0.8,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn alpha_top_cases() {
        let g = LossDerivative {
            g: DenseMatrix::from_rows(&[vec![0.1, -0.2], vec![0.0, 0.3]]),
        };
        assert_eq!(alpha_top(&g, &DenseMatrix::identity(2)).unwrap(), g.g);
        let zero = LossDerivative { g: DenseMatrix::zeros(2, 2) };
        let w = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(alpha_top(&zero, &w).unwrap(), DenseMatrix::zeros(2, 3));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = LossDerivative { g: DenseMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.0..1.0)) };
        let w = DenseMatrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let want = matmul(&g.g, &transpose(&w)).unwrap();
        assert!(alpha_top(&g, &w).unwrap().max_abs_diff(&want).unwrap() <= 1e-12);
    }

    #[test]
    fn backstep_passes_alpha_through_identity_layer() {
        let x = DenseMatrix::zeros(3, 2);
        let labels = DenseMatrix::from_fn(3, 1, |_, _| 1.0);
        let g = Graph::new(CsrMatrix::identity(3), x, labels, vec![Split::Train; 3], Task::Multiclass).unwrap();
        let alpha = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0], vec![3.0, 1.0]]);
        let pre = DenseMatrix::from_rows(&[vec![9.0, -9.0], vec![0.1, 0.2], vec![0.0, 0.0]]);
        let out = alpha_backstep(&alpha, &pre, &DenseMatrix::identity(2), &g, Activation::Linear).unwrap();
        assert_eq!(out, alpha);
        let zero = alpha_backstep(&DenseMatrix::zeros(3, 2), &pre, &DenseMatrix::identity(2), &g, Activation::Gelu).unwrap();
        assert_eq!(zero, DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn backstep_uses_exactly_one_aggregation() {
        let graph = sbm(10, 1);
        let params = ModelParams::glorot(3, &[4, 3], 2, Activation::Gelu, 2);
        let (emb, _) = full_forward(&graph, &params).unwrap();
        let alpha = DenseMatrix::from_fn(10, 3, |r, c| (r as f64 - c as f64) * 0.1);
        let before = spmm_count();
        alpha_backstep(&alpha, emb.pre_activation(2), params.layer(2), &graph, params.activation).unwrap();
        assert_eq!(spmm_count() - before, 1);
    }

    #[test]
    fn refresh_is_idempotent() {
        let graph = sbm(10, 4);
        let params = ModelParams::glorot(3, &[4, 4, 3], 2, Activation::Sigmoid, 2);
        let (emb, _) = full_forward(&graph, &params).unwrap();
        let nodes = graph.nodes_in(Split::Train);
        let mut a = IncompleteGradCache::zeros(10, &params);
        let mut b = a.clone();
        refresh_all_alpha(&mut a, &emb, &params, &graph, &nodes, 3).unwrap();
        refresh_all_alpha(&mut b, &emb, &params, &graph, &nodes, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.stamps(), &[3, 3, 3]);
    }

    #[test]
    fn saturated_fit_has_vanishing_alpha_and_gradient() {
        // One node per class, identity adjacency and features: a huge diagonal
        // classifier drives every softmax to its true class.
        let n = 3;
        let graph = Graph::new(
            CsrMatrix::identity(n),
            DenseMatrix::identity(n),
            DenseMatrix::identity(n),
            vec![Split::Train; n],
            Task::Multiclass,
        )
        .unwrap();
        let mut classifier = DenseMatrix::identity(n);
        classifier.scale(60.0);
        let params = ModelParams {
            layers: vec![DenseMatrix::identity(n), DenseMatrix::identity(n)],
            classifier,
            activation: Activation::Relu,
        };
        let (emb, _) = full_forward(&graph, &params).unwrap();
        let mut cache = IncompleteGradCache::zeros(n, &params);
        refresh_all_alpha(&mut cache, &emb, &params, &graph, &graph.all_nodes(), 1).unwrap();
        for k in 1..=2 {
            assert!(cache.alpha(k).as_slice().iter().all(|v| v.abs() < 1e-9));
        }
        let grads = exact_full_gradient(&graph, &params, &graph.all_nodes()).unwrap();
        assert!(grads.l2_norm() < 1e-9);
    }

    #[test]
    fn full_set_gradient_is_weighted_sum_of_singletons() {
        let graph = sbm(8, 6);
        let params = ModelParams::glorot(3, &[3, 2], 2, Activation::Gelu, 9);
        let all = graph.all_nodes();
        let full = exact_full_gradient(&graph, &params, &all).unwrap();
        let mut acc = ModelGrads::zeros_like(&params);
        for &i in &all {
            let single = exact_full_gradient(&graph, &params, &[i]).unwrap();
            for (a, s) in acc.layers.iter_mut().zip(&single.layers) {
                a.add_scaled(s, 1.0 / all.len() as f64).unwrap();
            }
            acc.classifier.add_scaled(&single.classifier, 1.0 / all.len() as f64).unwrap();
        }
        assert!(full.max_abs_diff(&acc).unwrap() <= 1e-9);
    }
}
