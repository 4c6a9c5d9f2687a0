mod common;

use iglu::metrics::{micro_f1, roc_auc, speedup, Speedup};
use iglu::trainer::EpochLog;
use iglu::{DenseMatrix, Task};
use proptest::prelude::*;

fn log_from(steps: &[(f64, f64)]) -> Vec<EpochLog> {
    let mut t = 0.0;
    steps
        .iter()
        .enumerate()
        .map(|(i, &(dt, v))| {
            t += dt;
            EpochLog {
                epoch: i + 1,
                wall_clock_s: t,
                val_metric: Some(v),
                ..EpochLog::default()
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn speedup_of_a_run_against_itself_is_zero(
        steps in prop::collection::vec((0.01f64..5.0, 0.0f64..1.0), 1..30)
    ) {
        let log = log_from(&steps);
        prop_assert_eq!(speedup(&log, &log).unwrap(), Speedup::Percent(0.0));
    }

    #[test]
    fn auc_matches_pairwise_count(
        rows in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
    ) {
        let scores: Vec<f64> = rows.iter().map(|r| f64::from(r.0)).collect();
        let labels: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.1))).collect();
        prop_assume!(labels.contains(&0.0) && labels.contains(&1.0));
        let n = rows.len();
        let got = roc_auc(
            &DenseMatrix::from_vec(n, 1, scores.clone()).unwrap(),
            &DenseMatrix::from_vec(n, 1, labels.clone()).unwrap(),
        ).unwrap();
        prop_assert!((got - common::auc_brute_force(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn multiclass_f1_is_accuracy(
        rows in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), 0usize..3), 1..30)
    ) {
        let n = rows.len();
        let z = DenseMatrix::from_fn(n, 3, |r, c| rows[r].0[c]);
        let y = DenseMatrix::from_fn(n, 3, |r, c| f64::from(u8::from(rows[r].1 == c)));
        let hits = rows.iter().filter(|(s, c)| {
            let best = (0..3).fold(0, |b, j| if s[j] > s[b] { j } else { b });
            best == *c
        }).count();
        let f1 = micro_f1(&z, &y, Task::Multiclass, 0.5).unwrap();
        prop_assert!((f1 - hits as f64 / n as f64).abs() <= 1e-12);
    }
}
