//! Inverted, backprop and exact training side by side on the same graph and
//! initialisation, with mini-batches.

use iglu::graph::generate_sbm;
use iglu::trainer::train;
use iglu::{SbmSpec, TrainConfig, Variant};

fn main() -> iglu::Result<()> {
    let graph = generate_sbm(&SbmSpec {
        num_nodes: 400,
        num_blocks: 4,
        p_in: 0.1,
        p_out: 0.01,
        feature_dim: 8,
        feature_noise: 1.5,
        seed: 3,
    })?;
    println!("variant    updates  refreshes  secs    best val  test@best");
    for variant in [Variant::Inverted, Variant::Backprop, Variant::Exact] {
        let cfg = TrainConfig {
            variant,
            epochs: 40,
            batch_size: 64,
            hidden: vec![16, 16],
            ..TrainConfig::default()
        };
        let out = train(&graph, cfg.init_params(&graph), &cfg, &mut ())?;
        let s = &out.summary;
        println!(
            "{:<10} {:>7}  {:>9}  {:.3}  {:.3}     {:.3}",
            variant.to_string(),
            s.total_updates,
            s.total_refreshes,
            out.logs.last().map_or(0.0, |l| l.wall_clock_s),
            s.best_val_metric.unwrap_or(f64::NAN),
            s.test_at_best_val.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
