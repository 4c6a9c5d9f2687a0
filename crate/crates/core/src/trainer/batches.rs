use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

fn keyed_rng(seed: u64, epoch: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ epoch as u64);
    rng
}

/// Shuffles `train_nodes` with a generator keyed by `(seed, epoch)` and cuts
/// it into consecutive batches of `batch_size` (the last may be smaller).
/// Every batch is sorted ascending.
pub fn sample_minibatches(
    train_nodes: &[usize],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<usize>> {
    let size = batch_size.max(1);
    if size >= train_nodes.len() {
        let mut all = train_nodes.to_vec();
        all.sort_unstable();
        return vec![all];
    }
    let mut order = train_nodes.to_vec();
    order.shuffle(&mut keyed_rng(seed, epoch, 0));
    order
        .chunks(size)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect()
}

/// Splits `rows` into `count` near-equal sorted chunks after a shuffle keyed
/// by `(seed, epoch, stream)`. Empty chunks are dropped.
pub(crate) fn split_rows(
    rows: &[usize],
    count: usize,
    seed: u64,
    epoch: usize,
    stream: u64,
) -> Vec<Vec<usize>> {
    let count = count.max(1);
    if count == 1 {
        return vec![rows.to_vec()];
    }
    let mut order = rows.to_vec();
    order.shuffle(&mut keyed_rng(seed, epoch, stream));
    let (base, extra) = (order.len() / count, order.len() % count);
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for i in 0..count {
        let len = base + usize::from(i < extra);
        if len == 0 {
            continue;
        }
        let mut c = order[start..start + len].to_vec();
        c.sort_unstable();
        out.push(c);
        start += len;
    }
    out
}

/// Rows on which `α^k` can be nonzero, for `k = 1..=K`.
///
/// `α^K = G W^T` lives on the loss nodes; every backstep aggregates over one
/// hop, so `α^k` lives on the `(K-k)`-hop neighbourhood of the loss nodes.
pub(crate) fn alpha_support(graph: &Graph, loss_nodes: &[usize], num_layers: usize) -> Vec<Vec<usize>> {
    let mut support = vec![Vec::new(); num_layers];
    let mut current = loss_nodes.to_vec();
    current.sort_unstable();
    current.dedup();
    for k in (1..=num_layers).rev() {
        support[k - 1] = current.clone();
        if k > 1 {
            current = graph.expand_one_hop(&current);
        }
    }
    support
}
