//! Central finite-difference check of the exact gradient on small random
//! instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::graph::{Graph, Split};
use crate::incomplete::exact_full_gradient;
use crate::matrix::DenseMatrix;
use crate::model::{full_forward, ModelGrads, ModelParams, ParamId};
use crate::nn::{task_loss_on, Activation, Task};

pub const STEP: f64 = 1e-5;
pub const ABS_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, ABS_FLOOR)`
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ABS_FLOOR)
}

/// A random graph with `N ≤ 10`, `K ∈ {1,2,3}`, widths `≤ 4`, a smooth
/// activation and either task type. Every node is a training node.
pub fn random_instance(seed: u64, index: u64) -> Result<(Graph, ModelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = rng.gen_range(3..=10);
    let d0 = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=3);
    let classes = rng.gen_range(2..=4);
    let task = if index % 2 == 0 { Task::Multiclass } else { Task::Multilabel };
    let act = if rng.gen_bool(0.5) { Activation::Gelu } else { Activation::Sigmoid };

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    let features = DenseMatrix::from_fn(n, d0, |_, _| rng.sample(StandardNormal));
    let labels = match task {
        Task::Multiclass => {
            let mut y = DenseMatrix::zeros(n, classes);
            for i in 0..n {
                y.set(i, rng.gen_range(0..classes), 1.0);
            }
            y
        }
        Task::Multilabel => DenseMatrix::from_fn(n, classes, |_, _| f64::from(u8::from(rng.gen_bool(0.5)))),
    };
    let graph = Graph::from_edges(&edges, features, labels, vec![Split::Train; n], task)?;
    let hidden: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let params = ModelParams::glorot(d0, &hidden, classes, act, rng.gen());
    Ok((graph, params))
}

/// Central differences of the mean loss over `nodes`, one parameter entry at
/// a time.
pub fn finite_difference_gradient(
    graph: &Graph,
    params: &ModelParams,
    nodes: &[usize],
    h: f64,
) -> Result<ModelGrads> {
    let loss = |p: &ModelParams| -> Result<f64> {
        let (_, y_hat) = full_forward(graph, p)?;
        task_loss_on(&y_hat, graph.labels(), graph.task(), nodes)
    };
    let mut out = ModelGrads::zeros_like(params);
    let mut probe = params.clone();
    for id in params.ids() {
        let (rows, cols) = params.get(id).shape();
        let mut grad = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let orig = params.get(id).get(r, c);
                probe.get_mut(id).set(r, c, orig + h);
                let up = loss(&probe)?;
                probe.get_mut(id).set(r, c, orig - h);
                let down = loss(&probe)?;
                probe.get_mut(id).set(r, c, orig);
                grad.set(r, c, (up - down) / (2.0 * h));
            }
        }
        match id {
            ParamId::Layer(k) => out.layers[k - 1] = grad,
            ParamId::Classifier => out.classifier = grad,
        }
    }
    Ok(out)
}

/// Largest entrywise [`rel_error`] between two gradients.
pub fn max_rel_error(a: &ModelGrads, b: &ModelGrads) -> f64 {
    let pairs = a
        .layers
        .iter()
        .chain(std::iter::once(&a.classifier))
        .zip(b.layers.iter().chain(std::iter::once(&b.classifier)));
    pairs
        .flat_map(|(x, y)| x.as_slice().iter().zip(y.as_slice()))
        .map(|(&p, &q)| rel_error(p, q))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub instances: usize,
    pub entries: usize,
    pub max_rel_error: f64,
}

/// Compares the exact gradient with finite differences on `instances`
/// random instances.
pub fn run_suite(seed: u64, instances: usize) -> Result<GradcheckReport> {
    let mut report = GradcheckReport {
        instances,
        entries: 0,
        max_rel_error: 0.0,
    };
    for i in 0..instances {
        let (graph, params) = random_instance(seed, i as u64)?;
        let nodes = graph.all_nodes();
        let exact = exact_full_gradient(&graph, &params, &nodes)?;
        let fd = finite_difference_gradient(&graph, &params, &nodes, STEP)?;
        report.entries += params.dims().windows(2).map(|w| w[0] * w[1]).sum::<usize>();
        report.max_rel_error = report.max_rel_error.max(max_rel_error(&exact, &fd));
    }
    Ok(report)
}
