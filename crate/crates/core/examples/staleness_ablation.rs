//! Refresh the stale cache every other epoch, once or twice per epoch and
//! compare final validation scores and refresh counts.

use iglu::graph::generate_sbm;
use iglu::trainer::{train, UpdateFrequency};
use iglu::{SbmSpec, TrainConfig};

fn main() -> iglu::Result<()> {
    let graph = generate_sbm(&SbmSpec {
        num_nodes: 300,
        num_blocks: 3,
        p_in: 0.08,
        p_out: 0.02,
        feature_dim: 8,
        feature_noise: 2.0,
        seed: 5,
    })?;
    for freq in [UpdateFrequency::Half, UpdateFrequency::Once, UpdateFrequency::Twice] {
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 32,
            update_frequency: freq,
            hidden: vec![16, 16],
            ..TrainConfig::default()
        };
        let out = train(&graph, cfg.init_params(&graph), &cfg, &mut ())?;
        let last = out.logs.last().expect("ran at least one epoch");
        println!(
            "frequency {:<3}  refreshes {:>3}  final val {:.3}",
            freq.as_f64(),
            out.summary.total_refreshes,
            last.val_metric.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
