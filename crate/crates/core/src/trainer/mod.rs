//! Training loops.
//!
//! Three variants share one update schedule per epoch: every parameter block
//! gets one sweep over all mini-batches before the next block starts.
//!
//! * `Inverted` refreshes `α` on the configured schedule, then walks layers
//!   `1..K`, recomputing `X^k` right after `W^k` moves, and finishes with the
//!   classifier.
//! * `Backprop` refreshes the embeddings on the schedule, updates the
//!   classifier, then walks layers `K..1` recomputing `α^{k-1}` right after
//!   `W^k` moves.
//! * `Exact` follows the inverted schedule but takes every step along the true
//!   mini-batch gradient.

mod batches;
mod bias;
mod config;
mod log;

use std::time::{Duration, Instant};

pub use batches::sample_minibatches;
pub use bias::{bias_sweep_instance, bias_trajectory, measure_grad_bias, stale_gradient};
pub use config::{TrainConfig, UpdateFrequency, Variant};
pub use log::{parse_log, read_log, EpochLog, JsonlWriter, RunSummary};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::incomplete::{alpha_backstep, alpha_top, exact_full_gradient, refresh_all_alpha, IncompleteGradCache};
use crate::matrix::{matmul, DenseMatrix};
use crate::metrics::evaluate;
use crate::model::{
    aggregate, classifier_grad, full_forward_stamped, EmbeddingCache, LayerOutput, ModelParams, ParamId,
};
use crate::nn::{loss_derivative, loss_derivative_on, task_loss_on};
use crate::optim::Optimizer;

/// A parameter update about to be applied.
#[derive(Debug)]
pub struct UpdateEvent<'a> {
    pub epoch: usize,
    pub param: ParamId,
    pub grad: &'a DenseMatrix,
    pub params_before: &'a ModelParams,
    pub batch: &'a [usize],
    /// First update since the stale cache was last rebuilt.
    pub first_after_refresh: bool,
}

/// Trainer state visible at the end of an epoch.
#[derive(Debug)]
pub struct EpochState<'a> {
    pub params: &'a ModelParams,
    pub emb: Option<&'a EmbeddingCache>,
    pub alpha: Option<&'a IncompleteGradCache>,
}

/// Hooks into a run. `()` ignores everything.
pub trait TrainObserver {
    fn on_update(&mut self, _event: &UpdateEvent<'_>) -> Result<()> {
        Ok(())
    }

    fn on_epoch_end(&mut self, _log: &EpochLog, _state: &EpochState<'_>) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

impl<W: std::io::Write> TrainObserver for JsonlWriter<W> {
    fn on_epoch_end(&mut self, log: &EpochLog, _state: &EpochState<'_>) -> Result<()> {
        self.epoch(log)?;
        self.flush()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Parameters at the best validation score (the final ones if no
    /// validation score was ever computed).
    pub best_params: ModelParams,
    pub logs: Vec<EpochLog>,
    pub summary: RunSummary,
}

pub fn train_inverted(graph: &Graph, params: ModelParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    expect_variant(cfg, Variant::Inverted)?;
    train(graph, params, cfg, &mut ())
}

pub fn train_backprop(graph: &Graph, params: ModelParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    expect_variant(cfg, Variant::Backprop)?;
    train(graph, params, cfg, &mut ())
}

pub fn train_exact(graph: &Graph, params: ModelParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    expect_variant(cfg, Variant::Exact)?;
    train(graph, params, cfg, &mut ())
}

fn expect_variant(cfg: &TrainConfig, want: Variant) -> Result<()> {
    if cfg.variant != want {
        return Err(Error::Config(format!(
            "expected variant {want}, config says {}",
            cfg.variant
        )));
    }
    Ok(())
}

/// Runs the variant named in `cfg`.
pub fn train(
    graph: &Graph,
    params: ModelParams,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate(graph)?;
    params.check_against(graph)?;
    if params.num_layers() != cfg.num_layers() || params.activation != cfg.activation {
        return Err(Error::Config(format!(
            "parameters have {} layers with {:?}, config asks for {} with {:?}",
            params.num_layers(),
            params.activation,
            cfg.num_layers(),
            cfg.activation
        )));
    }
    let mut run = Run::new(graph, params, cfg, observer);
    match cfg.variant {
        Variant::Inverted => run.inverted()?,
        Variant::Backprop => run.backprop()?,
        Variant::Exact => run.exact()?,
    }
    Ok(run.finish())
}

struct Run<'a> {
    graph: &'a Graph,
    cfg: &'a TrainConfig,
    params: ModelParams,
    /// `W^1..W^K` then the classifier.
    opt: Vec<Optimizer>,
    train: Vec<usize>,
    support: Vec<Vec<usize>>,
    epoch: usize,
    refreshes: usize,
    updates: usize,
    pending_first: bool,
    clock: Duration,
    logs: Vec<EpochLog>,
    best: Option<(usize, f64, Option<f64>)>,
    best_params: Option<ModelParams>,
    observer: &'a mut dyn TrainObserver,
}

impl<'a> Run<'a> {
    fn new(
        graph: &'a Graph,
        params: ModelParams,
        cfg: &'a TrainConfig,
        observer: &'a mut dyn TrainObserver,
    ) -> Self {
        let train = graph.nodes_in(Split::Train);
        let support = batches::alpha_support(graph, &train, params.num_layers());
        let opt = params
            .ids()
            .into_iter()
            .map(|id| Optimizer::new(cfg.optimizer, params.get(id)))
            .collect();
        Self {
            graph,
            cfg,
            params,
            opt,
            train,
            support,
            epoch: 0,
            refreshes: 0,
            updates: 0,
            pending_first: false,
            clock: Duration::ZERO,
            logs: Vec::new(),
            best: None,
            best_params: None,
            observer,
        }
    }

    fn k(&self) -> usize {
        self.params.num_layers()
    }

    fn stamp(&self) -> u64 {
        self.refreshes as u64
    }

    fn mid_layer(&self) -> usize {
        self.k().div_ceil(2)
    }

    fn mark_refresh(&mut self) {
        self.refreshes += 1;
        self.pending_first = true;
    }

    fn train_batches(&self) -> Vec<Vec<usize>> {
        if self.cfg.batch_size == 0 {
            vec![self.train.clone()]
        } else {
            sample_minibatches(&self.train, self.cfg.batch_size, self.cfg.seed, self.epoch)
        }
    }

    fn apply(&mut self, id: ParamId, grad: &DenseMatrix, batch: &[usize]) -> Result<()> {
        self.observer.on_update(&UpdateEvent {
            epoch: self.epoch + 1,
            param: id,
            grad,
            params_before: &self.params,
            batch,
            first_after_refresh: self.pending_first,
        })?;
        self.pending_first = false;
        let slot = match id {
            ParamId::Layer(k) => k - 1,
            ParamId::Classifier => self.k(),
        };
        let lr = self.cfg.lr_schedule.rate(self.cfg.lr, self.epoch);
        self.opt[slot].step(self.params.get_mut(id), grad, lr)?;
        self.updates += 1;
        Ok(())
    }

    /// One sweep over the training batches for `W^{K+1}`, each step along
    /// the exact gradient of the batch loss given `X^K`.
    fn classifier_sweep(&mut self, x_k: &DenseMatrix, batches: &[Vec<usize>]) -> Result<()> {
        for s in batches {
            let xs = x_k.select_rows(s);
            let ys = matmul(&xs, &self.params.classifier)?;
            let g = loss_derivative(&ys, &self.graph.labels().select_rows(s), self.graph.task())?;
            let grad = classifier_grad(&xs, &g)?;
            self.apply(ParamId::Classifier, &grad, s)?;
        }
        Ok(())
    }

    /// One sweep for `W^k` from a cached `α^k` and aggregated input `Ā X^{k-1}`.
    /// The rows where `α^k` can be nonzero are split into as many chunks as
    /// there are training batches; each chunk's sum is rescaled by
    /// `|support| / |chunk|`.
    fn layer_sweep(&mut self, k: usize, aggregated: &DenseMatrix, alpha: &DenseMatrix, num_batches: usize) -> Result<()> {
        let support = &self.support[k - 1];
        let chunks = batches::split_rows(support, num_batches, self.cfg.seed, self.epoch, k as u64);
        let total = support.len() as f64;
        for chunk in chunks {
            let scale = total / chunk.len() as f64;
            let grad = self
                .params
                .classical(k)
                .param_grad_rows(aggregated, alpha, &chunk, scale)?;
            self.apply(ParamId::Layer(k), &grad, &chunk)?;
        }
        Ok(())
    }

    fn timed<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.clock += start.elapsed();
        out
    }

    fn inverted(&mut self) -> Result<()> {
        let graph = self.graph;
        let n = graph.num_nodes();
        let (mut emb, _) = full_forward_stamped(graph, &self.params, 0)?;
        let mut alpha = IncompleteGradCache::zeros(n, &self.params);
        for epoch in 0..self.cfg.epochs {
            self.epoch = epoch;
            self.timed(|run| {
                let train = run.train.clone();
                if run.cfg.update_frequency.refresh_at_epoch_start(epoch) {
                    run.mark_refresh();
                    refresh_all_alpha(&mut alpha, &emb, &run.params, graph, &train, run.stamp())?;
                }
                let batches = run.train_batches();
                for k in 1..=run.k() {
                    let agg = aggregate(graph, emb.x(k - 1))?;
                    run.layer_sweep(k, &agg, alpha.alpha(k), batches.len())?;
                    let pre_activation = matmul(&agg, run.params.layer(k))?;
                    let act = run.params.activation;
                    let output = pre_activation.map(|z| act.apply(z));
                    emb.install(k, LayerOutput { pre_activation, output }, run.stamp());
                    if run.cfg.update_frequency == UpdateFrequency::Twice && k == run.mid_layer() {
                        emb.refresh_from(k + 1, graph, &run.params, run.stamp())?;
                        run.mark_refresh();
                        refresh_all_alpha(&mut alpha, &emb, &run.params, graph, &train, run.stamp())?;
                    }
                }
                run.classifier_sweep(emb.x(run.k()), &batches)
            })?;
            self.end_epoch(Some(&emb), Some(&alpha), true)?;
        }
        Ok(())
    }

    fn backprop(&mut self) -> Result<()> {
        let graph = self.graph;
        let n = graph.num_nodes();
        let mut emb: Option<EmbeddingCache> = None;
        let mut alpha = IncompleteGradCache::zeros(n, &self.params);
        for epoch in 0..self.cfg.epochs {
            self.epoch = epoch;
            self.timed(|run| {
                let train = run.train.clone();
                if emb.is_none() || run.cfg.update_frequency.refresh_at_epoch_start(epoch) {
                    run.mark_refresh();
                    emb = Some(full_forward_stamped(graph, &run.params, run.stamp())?.0);
                }
                let batches = run.train_batches();
                let k_layers = run.k();
                run.classifier_sweep(emb.as_ref().expect("built above").x(k_layers), &batches)?;

                let cache = emb.as_ref().expect("built above");
                let y_hat = cache.predictions(&run.params)?;
                let g = loss_derivative_on(&y_hat, graph.labels(), graph.task(), &train)?;
                alpha.set(k_layers, alpha_top(&g, &run.params.classifier)?, run.stamp())?;

                for (done, k) in (1..=k_layers).rev().enumerate() {
                    let cache = emb.as_ref().expect("built above");
                    let agg = aggregate(graph, cache.x(k - 1))?;
                    run.layer_sweep(k, &agg, alpha.alpha(k), batches.len())?;
                    if k >= 2 {
                        let w = run.params.layer(k);
                        let pre = matmul(&agg, w)?;
                        let next = alpha_backstep(alpha.alpha(k), &pre, w, graph, run.params.activation)?;
                        alpha.set(k - 1, next, run.stamp())?;
                    }
                    if run.cfg.update_frequency == UpdateFrequency::Twice && done + 1 == run.mid_layer() {
                        run.mark_refresh();
                        let fresh = full_forward_stamped(graph, &run.params, run.stamp())?.0;
                        // α below this point was built from the old embeddings
                        refresh_all_alpha(&mut alpha, &fresh, &run.params, graph, &train, run.stamp())?;
                        emb = Some(fresh);
                    }
                }
                Ok(())
            })?;
            self.end_epoch(emb.as_ref(), Some(&alpha), false)?;
        }
        Ok(())
    }

    fn exact(&mut self) -> Result<()> {
        let graph = self.graph;
        for epoch in 0..self.cfg.epochs {
            self.epoch = epoch;
            self.timed(|run| {
                let batches = run.train_batches();
                for id in run.params.ids() {
                    for s in &batches {
                        let grads = exact_full_gradient(graph, &run.params, s)?;
                        let grad = match id {
                            ParamId::Layer(k) => &grads.layers[k - 1],
                            ParamId::Classifier => &grads.classifier,
                        };
                        run.apply(id, grad, s)?;
                    }
                }
                Ok(())
            })?;
            self.end_epoch(None, None, false)?;
        }
        Ok(())
    }

    /// Evaluation and bookkeeping, outside the optimisation clock.
    fn end_epoch(
        &mut self,
        emb: Option<&EmbeddingCache>,
        alpha: Option<&IncompleteGradCache>,
        embeddings_fresh: bool,
    ) -> Result<()> {
        let graph = self.graph;
        let cfg = self.cfg;
        let epoch = self.epoch + 1;
        let (fresh, y_hat) = full_forward_stamped(graph, &self.params, self.stamp())?;
        let train_loss = task_loss_on(&y_hat, graph.labels(), graph.task(), &self.train)?;
        if !train_loss.is_finite() || !self.params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if embeddings_fresh {
            if let Some(emb) = emb {
                for k in 1..=self.k() {
                    let drift = emb.x(k).max_abs_diff(fresh.x(k))?;
                    debug_assert!(drift <= 1e-12, "X^{k} drifted by {drift} despite eager refresh");
                }
            }
        }

        let mut log = EpochLog {
            epoch,
            wall_clock_s: self.clock.as_secs_f64(),
            train_loss,
            refreshes_done: self.refreshes,
            updates_done: self.updates,
            ..EpochLog::default()
        };
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let score = |split: Split| -> Result<Option<f64>> {
                let nodes = graph.nodes_in(split);
                if nodes.is_empty() {
                    return Ok(None);
                }
                evaluate(cfg.metric, &y_hat, graph.labels(), graph.task(), cfg.threshold, &nodes).map(Some)
            };
            log.train_metric = score(Split::Train)?;
            log.val_metric = score(Split::Val)?;
            log.test_metric = score(Split::Test)?;
            if let Some(v) = log.val_metric {
                if self.best.is_none_or(|(_, b, _)| v > b) {
                    self.best = Some((epoch, v, log.test_metric));
                    self.best_params = Some(self.params.clone());
                }
            }
        }
        if cfg.measure_bias {
            if let (Some(emb), Some(alpha)) = (emb, alpha) {
                log.grad_bias_l2 = Some(measure_grad_bias(graph, &self.params, alpha, emb)?);
            }
        }
        self.observer.on_epoch_end(
            &log,
            &EpochState {
                params: &self.params,
                emb,
                alpha,
            },
        )?;
        self.logs.push(log);
        Ok(())
    }

    fn finish(self) -> TrainOutcome {
        let summary = RunSummary {
            best_val_epoch: self.best.map(|b| b.0),
            best_val_metric: self.best.map(|b| b.1),
            test_at_best_val: self.best.and_then(|b| b.2),
            total_refreshes: self.refreshes,
            total_updates: self.updates,
            epochs_run: self.logs.len(),
        };
        TrainOutcome {
            best_params: self.best_params.unwrap_or_else(|| self.params.clone()),
            params: self.params,
            logs: self.logs,
            summary,
        }
    }
}
