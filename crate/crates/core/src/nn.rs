//! Activations, task losses and the loss-derivative matrix.
//!
//! The total loss is normalised: `L = (1/|S|) Σ_{i∈S} ℓ_i` for multi-class and
//! additionally divided by the class count for multi-label. The same factor is
//! folded into [`LossDerivative`], so downstream gradient formulas need no
//! rescaling.

use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Gelu,
    Sigmoid,
    /// Identity. Not exposed on the command line; handy for structural tests.
    Linear,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => x * std_normal_cdf(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative at `x`; relu's derivative at exactly 0 is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => std_normal_cdf(x) + x * std_normal_pdf(x),
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }
}

pub fn activation(z: &DenseMatrix, kind: Activation) -> DenseMatrix {
    z.map(|x| kind.apply(x))
}

pub fn activation_prime(z: &DenseMatrix, kind: Activation) -> DenseMatrix {
    z.map(|x| kind.derivative(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Softmax cross-entropy over one-hot label rows.
    Multiclass,
    /// Per-class sigmoid binary cross-entropy over 0/1 label rows.
    Multilabel,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiclass" => Ok(Task::Multiclass),
            "multilabel" => Ok(Task::Multilabel),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Multiclass => "multiclass",
            Task::Multilabel => "multilabel",
        }
    }
}

/// `G = [∂ℓ_i/∂ŷ_ic]`, normalisation included.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDerivative {
    pub g: DenseMatrix,
}

fn check_pair(y_hat: &DenseMatrix, y: &DenseMatrix, op: &'static str) -> Result<()> {
    if y_hat.shape() != y.shape() {
        return Err(Error::shape(
            op,
            format!("predictions {:?} vs labels {:?}", y_hat.shape(), y.shape()),
        ));
    }
    Ok(())
}

fn check_nodes(nodes: &[usize], n: usize, op: &'static str) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::shape(op, "empty node set"));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
        return Err(Error::Index {
            index: bad,
            num_nodes: n,
        });
    }
    Ok(())
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// `max(z,0) - z*y + ln(1 + e^{-|z|})`
#[inline]
fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn row_loss(z: &[f64], y: &[f64], task: Task) -> f64 {
    match task {
        Task::Multiclass => {
            let lse = log_sum_exp(z);
            z.iter().zip(y).map(|(zc, yc)| yc * (lse - zc)).sum()
        }
        Task::Multilabel => z.iter().zip(y).map(|(&zc, &yc)| bce_with_logits(zc, yc)).sum(),
    }
}

/// Mean loss over every row.
pub fn task_loss(y_hat: &DenseMatrix, y: &DenseMatrix, task: Task) -> Result<f64> {
    let all: Vec<usize> = (0..y_hat.rows()).collect();
    task_loss_on(y_hat, y, task, &all)
}

/// Mean loss over the rows listed in `nodes`.
pub fn task_loss_on(y_hat: &DenseMatrix, y: &DenseMatrix, task: Task, nodes: &[usize]) -> Result<f64> {
    check_pair(y_hat, y, "task_loss")?;
    check_nodes(nodes, y_hat.rows(), "task_loss")?;
    let total: f64 = nodes
        .iter()
        .map(|&i| row_loss(y_hat.row(i), y.row(i), task))
        .sum();
    Ok(total / normaliser(nodes.len(), y_hat.cols(), task))
}

fn normaliser(rows: usize, classes: usize, task: Task) -> f64 {
    match task {
        Task::Multiclass => rows as f64,
        Task::Multilabel => (rows * classes) as f64,
    }
}

pub fn loss_derivative(y_hat: &DenseMatrix, y: &DenseMatrix, task: Task) -> Result<LossDerivative> {
    let all: Vec<usize> = (0..y_hat.rows()).collect();
    loss_derivative_on(y_hat, y, task, &all)
}

/// Loss derivative of the loss restricted to `nodes`. Rows outside the set are
/// exactly zero.
pub fn loss_derivative_on(
    y_hat: &DenseMatrix,
    y: &DenseMatrix,
    task: Task,
    nodes: &[usize],
) -> Result<LossDerivative> {
    check_pair(y_hat, y, "loss_derivative")?;
    check_nodes(nodes, y_hat.rows(), "loss_derivative")?;
    let norm = normaliser(nodes.len(), y_hat.cols(), task);
    let mut g = DenseMatrix::zeros(y_hat.rows(), y_hat.cols());
    for &i in nodes {
        let z = y_hat.row(i);
        let y_row = y.row(i);
        let out = g.row_mut(i);
        match task {
            Task::Multiclass => {
                let lse = log_sum_exp(z);
                let mass: f64 = y_row.iter().sum();
                for ((o, &zc), &yc) in out.iter_mut().zip(z).zip(y_row) {
                    *o = (mass * (zc - lse).exp() - yc) / norm;
                }
            }
            Task::Multilabel => {
                for ((o, &zc), &yc) in out.iter_mut().zip(z).zip(y_row) {
                    *o = (sigmoid(zc) - yc) / norm;
                }
            }
        }
    }
    Ok(LossDerivative { g })
}

/// Row-wise softmax (multi-class) or elementwise sigmoid (multi-label).
pub fn probabilities(y_hat: &DenseMatrix, task: Task) -> DenseMatrix {
    match task {
        Task::Multilabel => y_hat.map(sigmoid),
        Task::Multiclass => {
            let mut out = y_hat.clone();
            for r in 0..out.rows() {
                let lse = log_sum_exp(y_hat.row(r));
                for v in out.row_mut(r) {
                    *v = (*v - lse).exp();
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::LN_2;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_and_its_derivative() {
        let z = DenseMatrix::from_rows(&[vec![-1.0, 0.0, 2.0]]);
        assert_eq!(activation(&z, Activation::Relu).as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(activation_prime(&z, Activation::Relu).as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn gelu_and_sigmoid_at_zero() {
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
        assert!((Activation::Gelu.derivative(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Sigmoid.derivative(0.0), 0.25);
    }

    #[test]
    fn activation_prime_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for kind in [Activation::Relu, Activation::Gelu, Activation::Sigmoid] {
            for _ in 0..200 {
                let x: f64 = rng.gen_range(-4.0..4.0);
                if x.abs() <= 1e-3 {
                    continue;
                }
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                let an = kind.derivative(x);
                let rel = (fd - an).abs() / an.abs().max(1e-8);
                assert!(rel < 1e-6 || (fd - an).abs() < 1e-10, "{kind:?} at {x}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn multiclass_loss_at_zero_logits_is_ln2() {
        let y_hat = DenseMatrix::from_rows(&[vec![0.0, 0.0]]);
        let y = DenseMatrix::from_rows(&[vec![1.0, 0.0]]);
        let l = task_loss(&y_hat, &y, Task::Multiclass).unwrap();
        assert!((l - LN_2).abs() < 1e-15);
    }

    #[test]
    fn multilabel_loss_at_zero_logits_is_ln2() {
        let y_hat = DenseMatrix::zeros(3, 4);
        let y = DenseMatrix::from_fn(3, 4, |r, c| ((r + c) % 2) as f64);
        let l = task_loss(&y_hat, &y, Task::Multilabel).unwrap();
        assert!((l - LN_2).abs() < 1e-15);
    }

    #[test]
    fn softmax_loss_is_shift_invariant() {
        let y_hat = DenseMatrix::from_rows(&[vec![1.5, -0.3, 800.0]]);
        let shifted = y_hat.map(|v| v - 800.0);
        let y = DenseMatrix::from_rows(&[vec![0.0, 1.0, 0.0]]);
        let a = task_loss(&y_hat, &y, Task::Multiclass).unwrap();
        let b = task_loss(&shifted, &y, Task::Multiclass).unwrap();
        assert!(a.is_finite());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn derivative_at_zero_logits() {
        let y_hat = DenseMatrix::from_rows(&[vec![0.0, 0.0]]);
        let y = DenseMatrix::from_rows(&[vec![1.0, 0.0]]);
        let g = loss_derivative(&y_hat, &y, Task::Multiclass).unwrap();
        assert_eq!(g.g.as_slice(), &[-0.5, 0.5]);
    }

    #[test]
    fn saturated_prediction_has_vanishing_derivative() {
        let y_hat = DenseMatrix::from_rows(&[vec![40.0, 0.0, 0.0]]);
        let y = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]);
        let g = loss_derivative(&y_hat, &y, Task::Multiclass).unwrap();
        assert!(g.g.as_slice().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn restricted_derivative_zeroes_other_rows() {
        let y_hat = DenseMatrix::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.4], vec![1.0, 0.0]]);
        let y = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        let g = loss_derivative_on(&y_hat, &y, Task::Multiclass, &[1]).unwrap();
        assert_eq!(g.g.row(0), &[0.0, 0.0]);
        assert_eq!(g.g.row(2), &[0.0, 0.0]);
        assert!(g.g.row(1)[0] > 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 2);
        assert!(matches!(task_loss(&a, &b, Task::Multiclass), Err(Error::Shape { .. })));
        assert!(loss_derivative(&a, &b, Task::Multilabel).is_err());
    }
}
