//! How far the gradient assembled from a frozen α drifts from the true
//! gradient as parameters move away from the refresh point.

use iglu::trainer::{bias_sweep_instance, bias_trajectory};

fn main() -> iglu::Result<()> {
    let steps = [0, 1, 2, 4, 8, 16, 32];
    println!("seed  {}", steps.map(|t| format!("t={t:<8}")).join(""));
    for seed in 0..5 {
        let (graph, params) = bias_sweep_instance(seed)?;
        let row: Vec<String> = bias_trajectory(&graph, &params, 0.05, &steps)?
            .into_iter()
            .map(|(_, b)| format!("{b:<10.2e}"))
            .collect();
        println!("{seed:<4}  {}", row.join(""));
    }
    Ok(())
}
