use crate::error::Result;
use crate::graph::{generate_sbm, Graph, SbmSpec, Split};
use crate::incomplete::{exact_full_gradient, refresh_all_alpha, IncompleteGradCache};
use crate::matrix::matmul;
use crate::model::{aggregate, classifier_grad, full_forward, EmbeddingCache, ModelGrads, ModelParams};
use crate::nn::{loss_derivative_on, Activation};

/// The gradient of the loss on `nodes` as assembled from cached `α` and cached
/// embeddings at the current parameters.
pub fn stale_gradient(
    graph: &Graph,
    params: &ModelParams,
    alpha: &IncompleteGradCache,
    emb: &EmbeddingCache,
    nodes: &[usize],
) -> Result<ModelGrads> {
    let k_layers = params.num_layers();
    let all = graph.all_nodes();
    let mut layers = Vec::with_capacity(k_layers);
    for k in 1..=k_layers {
        let agg = aggregate(graph, emb.x(k - 1))?;
        layers.push(params.classical(k).param_grad_rows(&agg, alpha.alpha(k), &all, 1.0)?);
    }
    let x_k = emb.x(k_layers);
    let g = loss_derivative_on(&matmul(x_k, &params.classifier)?, graph.labels(), graph.task(), nodes)?;
    Ok(ModelGrads {
        layers,
        classifier: classifier_grad(x_k, &g)?,
    })
}

/// `‖∇̃L − ∇L‖₂` over the training nodes, concatenating every parameter.
/// Zero when both caches are fresh.
pub fn measure_grad_bias(
    graph: &Graph,
    params: &ModelParams,
    stale_alpha: &IncompleteGradCache,
    emb: &EmbeddingCache,
) -> Result<f64> {
    let train = graph.nodes_in(Split::Train);
    let stale = stale_gradient(graph, params, stale_alpha, emb, &train)?;
    let exact = exact_full_gradient(graph, params, &train)?;
    stale.l2_distance(&exact)
}

/// Refreshes `α` once at `params`, then takes plain gradient steps of size
/// `lr` using that frozen `α` with fresh embeddings. Returns the bias after
/// each step count listed in `checkpoints`.
pub fn bias_trajectory(
    graph: &Graph,
    params: &ModelParams,
    lr: f64,
    checkpoints: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let train = graph.nodes_in(Split::Train);
    let mut params = params.clone();
    let (emb, _) = full_forward(graph, &params)?;
    let mut alpha = IncompleteGradCache::zeros(graph.num_nodes(), &params);
    refresh_all_alpha(&mut alpha, &emb, &params, graph, &train, 1)?;

    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(checkpoints.len());
    if checkpoints.contains(&0) {
        out.push((0, measure_grad_bias(graph, &params, &alpha, &emb)?));
    }
    for t in 1..=last {
        let (emb, _) = full_forward(graph, &params)?;
        let step = stale_gradient(graph, &params, &alpha, &emb, &train)?;
        for (w, g) in params.layers.iter_mut().zip(&step.layers) {
            w.add_scaled(g, -lr)?;
        }
        params.classifier.add_scaled(&step.classifier, -lr)?;
        if checkpoints.contains(&t) {
            let (emb, _) = full_forward(graph, &params)?;
            out.push((t, measure_grad_bias(graph, &params, &alpha, &emb)?));
        }
    }
    Ok(out)
}

/// A fixed 20-node two-block graph with gelu parameters drawn from `seed`.
pub fn bias_sweep_instance(seed: u64) -> Result<(Graph, ModelParams)> {
    let graph = generate_sbm(&SbmSpec {
        num_nodes: 20,
        num_blocks: 2,
        p_in: 0.4,
        p_out: 0.1,
        feature_dim: 4,
        feature_noise: 1.0,
        seed: 0,
    })?;
    let params = ModelParams::glorot(4, &[6, 5], 2, Activation::Gelu, seed);
    Ok((graph, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> (Graph, ModelParams) {
        let graph = generate_sbm(&SbmSpec {
            num_nodes: 20,
            num_blocks: 2,
            p_in: 0.4,
            p_out: 0.1,
            feature_dim: 4,
            feature_noise: 1.0,
            seed,
        })
        .unwrap();
        let params = ModelParams::glorot(4, &[6, 5], 2, Activation::Gelu, seed + 100);
        (graph, params)
    }

    #[test]
    fn fresh_caches_have_no_bias() {
        let (graph, params) = tiny(1);
        let (emb, _) = full_forward(&graph, &params).unwrap();
        let mut alpha = IncompleteGradCache::zeros(20, &params);
        refresh_all_alpha(&mut alpha, &emb, &params, &graph, &graph.nodes_in(Split::Train), 1).unwrap();
        assert!(measure_grad_bias(&graph, &params, &alpha, &emb).unwrap() < 1e-12);
    }

    #[test]
    fn bias_grows_roughly_linearly_in_step_size() {
        let (graph, params) = tiny(2);
        let small = bias_trajectory(&graph, &params, 0.01, &[4]).unwrap()[0].1;
        let large = bias_trajectory(&graph, &params, 0.02, &[4]).unwrap()[0].1;
        let ratio = large / small;
        assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_steps_means_zero_bias() {
        let (graph, params) = tiny(3);
        let traj = bias_trajectory(&graph, &params, 0.05, &[0, 1]).unwrap();
        assert!(traj[0].1 < 1e-12);
        assert!(traj[1].1 > 0.0);
    }
}
