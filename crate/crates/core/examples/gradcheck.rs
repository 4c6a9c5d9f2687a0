//! Exact gradients against central finite differences on random small graphs.

use iglu::gradcheck::run_suite;

fn main() -> iglu::Result<()> {
    for seed in 0..3 {
        let r = run_suite(seed, 20)?;
        println!(
            "seed {seed}: max relative error {:.2e} over {} entries",
            r.max_rel_error, r.entries
        );
    }
    Ok(())
}
