use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::metrics::MetricKind;
use crate::model::ModelParams;
use crate::nn::{Activation, Task};
use crate::optim::{LrSchedule, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Stale `α`, eagerly refreshed embeddings; layers updated input to output.
    Inverted,
    /// Stale embeddings, eagerly refreshed `α`; classifier first, then layers
    /// output to input.
    Backprop,
    /// Exact gradients for every update, same block schedule as `Inverted`.
    Exact,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverted" => Ok(Variant::Inverted),
            "backprop" => Ok(Variant::Backprop),
            "exact" => Ok(Variant::Exact),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Inverted => "inverted",
            Variant::Backprop => "backprop",
            Variant::Exact => "exact",
        })
    }
}

/// How often the stale cache is rebuilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateFrequency {
    /// Every second epoch (epochs 0, 2, 4, ... counting from zero).
    #[serde(rename = "0.5")]
    Half,
    /// Once at the start of every epoch.
    #[serde(rename = "1")]
    Once,
    /// At the start of every epoch and again after layer `ceil(K/2)`.
    #[serde(rename = "2")]
    Twice,
}

impl UpdateFrequency {
    pub(crate) fn refresh_at_epoch_start(self, epoch: usize) -> bool {
        match self {
            UpdateFrequency::Half => epoch % 2 == 0,
            UpdateFrequency::Once | UpdateFrequency::Twice => true,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            UpdateFrequency::Half => 0.5,
            UpdateFrequency::Once => 1.0,
            UpdateFrequency::Twice => 2.0,
        }
    }
}

impl FromStr for UpdateFrequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<f64>() {
            Ok(0.5) => Ok(UpdateFrequency::Half),
            Ok(1.0) => Ok(UpdateFrequency::Once),
            Ok(2.0) => Ok(UpdateFrequency::Twice),
            _ => Err(Error::Config(format!(
                "update frequency must be 0.5, 1 or 2, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    /// Nodes per mini-batch; 0 means the full training set.
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub update_frequency: UpdateFrequency,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub activation: Activation,
    pub task: Task,
    /// `d_1..d_K`
    pub hidden: Vec<usize>,
    pub eval_every: usize,
    pub metric: MetricKind,
    pub threshold: f64,
    /// Record `‖∇̃L − ∇L‖₂` at the end of every epoch (costs one exact
    /// gradient per epoch, excluded from the timings).
    pub measure_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Inverted,
            epochs: 100,
            batch_size: 0,
            lr: 0.01,
            lr_schedule: LrSchedule::Constant,
            update_frequency: UpdateFrequency::Once,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            activation: Activation::Relu,
            task: Task::Multiclass,
            hidden: vec![64, 64],
            eval_every: 1,
            metric: MetricKind::MicroF1,
            threshold: 0.5,
            measure_bias: false,
        }
    }
}

impl TrainConfig {
    pub fn num_layers(&self) -> usize {
        self.hidden.len()
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail("need at least one layer of nonzero width".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold must lie in (0,1), got {}", self.threshold));
        }
        if self.task != graph.task() {
            return fail(format!(
                "config task {} does not match dataset task {}",
                self.task.as_str(),
                graph.task().as_str()
            ));
        }
        let train = graph.nodes_in(Split::Train).len();
        if train == 0 {
            return fail("dataset has no training nodes".into());
        }
        if self.batch_size > train {
            return fail(format!(
                "batch size {} exceeds the {train} training nodes",
                self.batch_size
            ));
        }
        Ok(())
    }

    /// Glorot-initialised parameters for `graph`, seeded from the run seed.
    pub fn init_params(&self, graph: &Graph) -> ModelParams {
        ModelParams::glorot(
            graph.feature_dim(),
            &self.hidden,
            graph.num_classes(),
            self.activation,
            self.seed,
        )
    }
}
