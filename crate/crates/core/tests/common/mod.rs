//! Dense reference implementations used as oracles. Nothing here calls the
//! crate's sparse kernels, layer code or loss code.

#![allow(dead_code)]

use iglu::model::{ModelParams, ParamId};
use iglu::{Activation, DenseMatrix, Graph, Task};

pub type Dense = Vec<Vec<f64>>;

/// `D^{-1/2} (A + I) D^{-1/2}` built from the edge list.
pub fn dense_adjacency(graph: &Graph) -> Dense {
    let n = graph.num_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for (i, j) in graph.edges() {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

pub fn to_dense(m: &DenseMatrix) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn mm(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

pub fn act(kind: Activation, z: f64) -> f64 {
    match kind {
        Activation::Relu => z.max(0.0),
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Linear => z,
        Activation::Gelu => 0.5 * z * (1.0 + libm::erf(z / std::f64::consts::SQRT_2)),
    }
}

pub fn map(m: &Dense, f: impl Fn(f64) -> f64) -> Dense {
    m.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()
}

/// `X^k` for `k = from..=K` starting from a given `X^{from-1}`, then `Ŷ`.
pub fn forward_from(a: &Dense, params: &ModelParams, x_prev: Dense, from: usize) -> Dense {
    let mut x = x_prev;
    for k in from..=params.num_layers() {
        let z = mm(&mm(a, &x), &to_dense(params.layer(k)));
        x = map(&z, |v| act(params.activation, v));
    }
    mm(&x, &to_dense(&params.classifier))
}

/// Embedding `X^k` (k = 0 gives the features).
pub fn embedding(a: &Dense, graph: &Graph, params: &ModelParams, k: usize) -> Dense {
    let mut x = to_dense(graph.features());
    for m in 1..=k {
        let z = mm(&mm(a, &x), &to_dense(params.layer(m)));
        x = map(&z, |v| act(params.activation, v));
    }
    x
}

pub fn row_loss(z: &[f64], y: &[f64], task: Task) -> f64 {
    match task {
        Task::Multiclass => {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            z.iter().zip(y).map(|(zc, yc)| -yc * (zc - lse)).sum()
        }
        Task::Multilabel => z
            .iter()
            .zip(y)
            .map(|(&zc, &yc)| {
                let p = 1.0 / (1.0 + (-zc).exp());
                -(yc * p.ln() + (1.0 - yc) * (1.0 - p).ln())
            })
            .sum(),
    }
}

/// Mean loss over `nodes` (divided by `|nodes|·C` for multi-label).
pub fn loss(graph: &Graph, params: &ModelParams, nodes: &[usize]) -> f64 {
    let a = dense_adjacency(graph);
    let y_hat = forward_from(&a, params, to_dense(graph.features()), 1);
    let y = to_dense(graph.labels());
    let total: f64 = nodes.iter().map(|&i| row_loss(&y_hat[i], &y[i], graph.task())).sum();
    let norm = match graph.task() {
        Task::Multiclass => nodes.len() as f64,
        Task::Multilabel => (nodes.len() * graph.num_classes()) as f64,
    };
    total / norm
}

/// Central differences (step `h`) of [`loss`] for every parameter entry.
pub fn fd_gradient(graph: &Graph, params: &ModelParams, nodes: &[usize], h: f64) -> Vec<(ParamId, Dense)> {
    let mut out = Vec::new();
    let mut probe = params.clone();
    for id in params.ids() {
        let (rows, cols) = params.get(id).shape();
        let mut g = vec![vec![0.0; cols]; rows];
        for r in 0..rows {
            for c in 0..cols {
                let orig = params.get(id).get(r, c);
                probe.get_mut(id).set(r, c, orig + h);
                let up = loss(graph, &probe, nodes);
                probe.get_mut(id).set(r, c, orig - h);
                let down = loss(graph, &probe, nodes);
                probe.get_mut(id).set(r, c, orig);
                g[r][c] = (up - down) / (2.0 * h);
            }
        }
        out.push((id, g));
    }
    out
}

/// Loss derivative `G` over `nodes` from the dense forward pass.
pub fn loss_derivative(graph: &Graph, params: &ModelParams, nodes: &[usize]) -> Dense {
    let a = dense_adjacency(graph);
    let y_hat = forward_from(&a, params, to_dense(graph.features()), 1);
    let y = to_dense(graph.labels());
    let c = graph.num_classes();
    let mut g = vec![vec![0.0; c]; graph.num_nodes()];
    for &i in nodes {
        let z = &y_hat[i];
        match graph.task() {
            Task::Multiclass => {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                let mass: f64 = y[i].iter().sum();
                for j in 0..c {
                    g[i][j] = mass * e[j] / s - y[i][j];
                }
            }
            Task::Multilabel => {
                for j in 0..c {
                    g[i][j] = 1.0 / (1.0 + (-z[j]).exp()) - y[i][j];
                }
            }
        }
    }
    let norm = match graph.task() {
        Task::Multiclass => nodes.len() as f64,
        Task::Multilabel => (nodes.len() * c) as f64,
    };
    map(&g, |v| v / norm)
}

/// Incomplete task gradient `α^k_jp = Σ_ic g_ic ∂ŷ_ic/∂X^k_jp` with `G` held
/// fixed, by central differences over every entry of `X^k`.
pub fn alpha_oracle(graph: &Graph, params: &ModelParams, g: &Dense, k: usize, h: f64) -> Dense {
    let a = dense_adjacency(graph);
    let x_k = embedding(&a, graph, params, k);
    let phi = |x: &Dense| -> f64 {
        let y_hat = forward_from(&a, params, x.clone(), k + 1);
        y_hat
            .iter()
            .zip(g)
            .map(|(yr, gr)| yr.iter().zip(gr).map(|(y, g)| y * g).sum::<f64>())
            .sum()
    };
    let mut out = vec![vec![0.0; x_k[0].len()]; x_k.len()];
    for j in 0..x_k.len() {
        for p in 0..x_k[0].len() {
            let mut up = x_k.clone();
            up[j][p] += h;
            let mut down = x_k.clone();
            down[j][p] -= h;
            out[j][p] = (phi(&up) - phi(&down)) / (2.0 * h);
        }
    }
    out
}

/// `|a - b| / max(|a|, |b|, floor)`, maximised over entries.
pub fn max_rel(a: &Dense, b: &Dense, floor: f64) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// `P(s_pos > s_neg) + ½ P(tie)` over all positive/negative pairs.
pub fn auc_brute_force(scores: &[f64], labels: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1.0 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0.0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
