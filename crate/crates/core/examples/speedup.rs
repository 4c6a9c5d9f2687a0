//! Time-to-accuracy speedup of the inverted variant over exact training,
//! computed from the JSONL logs the trainer writes.

use iglu::graph::generate_sbm;
use iglu::metrics::speedup;
use iglu::trainer::{parse_log, train, JsonlWriter};
use iglu::{SbmSpec, TrainConfig, Variant};

fn logged_run(graph: &iglu::Graph, variant: Variant) -> iglu::Result<String> {
    let cfg = TrainConfig {
        variant,
        epochs: 30,
        hidden: vec![16, 16, 16],
        ..TrainConfig::default()
    };
    let mut w = JsonlWriter::new(Vec::new());
    train(graph, cfg.init_params(graph), &cfg, &mut w)?;
    Ok(String::from_utf8(w.into_inner()).expect("json is utf-8"))
}

fn main() -> iglu::Result<()> {
    let graph = generate_sbm(&SbmSpec {
        num_nodes: 1000,
        num_blocks: 2,
        p_in: 0.02,
        p_out: 0.004,
        feature_dim: 8,
        feature_noise: 1.0,
        seed: 0,
    })?;
    let exact = parse_log(&logged_run(&graph, Variant::Exact)?, "exact")?;
    let inverted = parse_log(&logged_run(&graph, Variant::Inverted)?, "inverted")?;
    println!("inverted vs exact: {}", speedup(&exact, &inverted)?);
    Ok(())
}
