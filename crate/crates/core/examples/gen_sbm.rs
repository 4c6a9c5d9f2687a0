//! Write a two-block SBM dataset to disk and load it back.
//!
//! cargo run --example gen_sbm -- /tmp/sbm

use iglu::graph::{generate_sbm, load_graph, write_graph};
use iglu::{SbmSpec, Split};

fn main() -> iglu::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("iglu-sbm").display().to_string());
    let spec = SbmSpec {
        num_nodes: 100,
        num_blocks: 2,
        p_in: 0.5,
        p_out: 0.05,
        feature_dim: 8,
        feature_noise: 1.0,
        seed: 0,
    };
    write_graph(&generate_sbm(&spec)?, &out)?;

    let graph = load_graph(&out)?;
    println!("{out}: {} nodes, {} edges", graph.num_nodes(), graph.edges().len());
    for split in [Split::Train, Split::Val, Split::Test] {
        println!("  {:<5} {}", split.as_str(), graph.nodes_in(split).len());
    }
    Ok(())
}
