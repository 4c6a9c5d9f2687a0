//! Train a two-layer GCN with the inverted lazy-update order and print the
//! per-epoch log.

use iglu::graph::generate_sbm;
use iglu::trainer::train_inverted;
use iglu::{SbmSpec, TrainConfig};

fn main() -> iglu::Result<()> {
    let graph = generate_sbm(&SbmSpec {
        num_nodes: 100,
        num_blocks: 2,
        p_in: 0.5,
        p_out: 0.05,
        feature_dim: 8,
        feature_noise: 1.0,
        seed: 1,
    })?;
    let cfg = TrainConfig {
        epochs: 30,
        hidden: vec![8, 8],
        ..TrainConfig::default()
    };
    let out = train_inverted(&graph, cfg.init_params(&graph), &cfg)?;
    println!("epoch  loss     train  val    test");
    for l in out.logs.iter().filter(|l| l.epoch % 5 == 0) {
        println!(
            "{:>5}  {:.4}  {:.3}  {:.3}  {:.3}",
            l.epoch,
            l.train_loss,
            l.train_metric.unwrap_or(f64::NAN),
            l.val_metric.unwrap_or(f64::NAN),
            l.test_metric.unwrap_or(f64::NAN)
        );
    }
    println!("{}", serde_json::to_string(&out.summary).unwrap());
    Ok(())
}
