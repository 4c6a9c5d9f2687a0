//! Graph convolutional network training with lazily refreshed caches.
//!
//! The exact gradient of a K-layer GCN needs a fresh forward pass over a
//! K-hop neighbourhood for every mini-batch. This crate instead caches either
//! the layer embeddings `X^k` or the incomplete task gradients `α^k`, refreshes
//! them on a schedule, and computes every parameter update from single-layer
//! quantities. Two update orders are provided next to an exact-gradient
//! baseline, together with tooling to measure the gradient bias that staleness
//! introduces.

pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod incomplete;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Graph, SbmSpec, Split};
pub use matrix::DenseMatrix;
pub use model::{ModelGrads, ModelParams};
pub use nn::{Activation, Task};
pub use trainer::{TrainConfig, Variant};
