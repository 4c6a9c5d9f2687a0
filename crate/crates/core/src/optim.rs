//! Parameter update rules: plain SGD and Adam, plus learning-rate schedules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Moment estimates for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: DenseMatrix,
    pub v: DenseMatrix,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_param(param: &DenseMatrix) -> Self {
        Self::new(param.rows(), param.cols())
    }
}

/// One Adam step with bias-corrected moments:
/// `param -= lr * m̂ / (sqrt(v̂) + eps)`.
pub fn adam_step(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if param.shape() != grad.shape() || state.m.shape() != param.shape() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "param {:?}, grad {:?}, state {:?}",
                param.shape(),
                grad.shape(),
                state.m.shape()
            ),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let p = param.as_mut_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (i, &g) in grad.as_slice().iter().enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

pub fn sgd_step(param: &mut DenseMatrix, grad: &DenseMatrix, lr: f64) -> Result<()> {
    param.add_scaled(grad, -lr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Per-parameter optimiser state.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, param: &DenseMatrix) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(AdamState::for_param(param)),
        }
    }

    pub fn step(&mut self, param: &mut DenseMatrix, grad: &DenseMatrix, lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd => sgd_step(param, grad, lr),
            Optimizer::Adam(state) => adam_step(param, grad, state, lr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `gamma` every `every` epochs.
    Step { gamma: f64, every: usize },
}

impl LrSchedule {
    /// Rate for a zero-based epoch index.
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Step { gamma, every } => base * gamma.powi((epoch / every.max(1)) as i32),
        }
    }
}

impl FromStr for LrSchedule {
    type Err = Error;

    /// `constant` or `step:GAMMA:EVERY`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "constant" {
            return Ok(LrSchedule::Constant);
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["step", gamma, every] => {
                let gamma: f64 = gamma
                    .parse()
                    .map_err(|_| Error::Config(format!("bad step gamma in {s:?}")))?;
                let every: usize = every
                    .parse()
                    .map_err(|_| Error::Config(format!("bad step period in {s:?}")))?;
                if every == 0 || !(gamma > 0.0) {
                    return Err(Error::Config(format!("invalid step schedule {s:?}")));
                }
                Ok(LrSchedule::Step { gamma, every })
            }
            _ => Err(Error::Config(format!(
                "unknown lr schedule {s:?} (expected constant or step:G:K)"
            ))),
        }
    }
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LrSchedule::Constant => write!(f, "constant"),
            LrSchedule::Step { gamma, every } => write!(f, "step:{gamma}:{every}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![v]])
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(1, 1);
        adam_step(&mut p, &scalar(1.0), &mut st, 0.1).unwrap();
        assert_eq!(st.t, 1);
        assert!((p.get(0, 0) + 0.1).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_param() {
        let mut p = scalar(0.7);
        let mut st = AdamState::new(1, 1);
        adam_step(&mut p, &scalar(0.0), &mut st, 0.1).unwrap();
        assert_eq!(p.get(0, 0), 0.7);
    }

    #[test]
    fn adam_minimises_a_quadratic() {
        // Reference run of the same recursion ends at w ≈ -0.00421.
        let mut w = scalar(1.0);
        let mut st = AdamState::new(1, 1);
        for _ in 0..100 {
            let g = scalar(2.0 * w.get(0, 0));
            adam_step(&mut w, &g, &mut st, 0.05).unwrap();
        }
        assert!(w.get(0, 0).abs() < 0.05);
        assert!((w.get(0, 0) - (-0.00421140038463886)).abs() < 1e-9);
    }

    #[test]
    fn adam_is_pure_in_its_inputs() {
        let p0 = DenseMatrix::from_rows(&[vec![0.3, -1.2], vec![2.0, 0.0]]);
        let g = DenseMatrix::from_rows(&[vec![0.1, 0.5], vec![-0.7, 1e-3]]);
        let mut st0 = AdamState::for_param(&p0);
        st0.t = 3;
        st0.m = g.map(|x| 0.5 * x);
        st0.v = g.map(|x| x * x);
        let (mut p1, mut s1) = (p0.clone(), st0.clone());
        let (mut p2, mut s2) = (p0.clone(), st0.clone());
        adam_step(&mut p1, &g, &mut s1, 0.01).unwrap();
        adam_step(&mut p2, &g, &mut s2, 0.01).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut p = DenseMatrix::zeros(2, 2);
        let mut st = AdamState::for_param(&p);
        assert!(adam_step(&mut p, &DenseMatrix::zeros(2, 1), &mut st, 0.1).is_err());
    }

    #[test]
    fn schedules_parse_and_decay() {
        assert_eq!("constant".parse::<LrSchedule>().unwrap(), LrSchedule::Constant);
        let s: LrSchedule = "step:0.5:10".parse().unwrap();
        assert_eq!(s.rate(0.1, 9), 0.1);
        assert_eq!(s.rate(0.1, 10), 0.05);
        assert_eq!(s.rate(0.1, 25), 0.025);
        assert!("step:0.5".parse::<LrSchedule>().is_err());
        assert!("step:0.5:0".parse::<LrSchedule>().is_err());
    }
}
