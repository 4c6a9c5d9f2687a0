//! Command-line surface. Exit codes: 0 success, 1 usage or validation
//! error, 2 training aborted on a non-finite loss.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::gradcheck;
use crate::graph::{generate_sbm, load_graph, write_graph, SbmSpec};
use crate::metrics::{speedup, MetricKind};
use crate::model::save_checkpoint;
use crate::nn::Activation;
use crate::optim::{LrSchedule, OptimizerKind};
use crate::trainer::{
    bias_sweep_instance, bias_trajectory, read_log, train, JsonlWriter, TrainConfig, UpdateFrequency, Variant,
};

#[derive(Debug, Parser)]
#[command(name = "iglu", version, about = "Lazy-update GCN training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a dataset directory.
    Train(TrainArgs),
    /// Write a stochastic block model dataset.
    GenSbm(GenSbmArgs),
    /// Compare exact gradients with finite differences on random instances.
    Gradcheck(GradcheckArgs),
    /// Percentage time saved by a candidate run relative to a baseline run.
    Speedup(SpeedupArgs),
    /// Gradient bias after t updates against a frozen α.
    BiasSweep(BiasSweepArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "inverted")]
    variant: Variant,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value = "constant")]
    lr_schedule: LrSchedule,
    /// 0 trains on the full training set at once.
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    #[arg(long, default_value = "1")]
    update_frequency: UpdateFrequency,
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    #[arg(long, default_value = "relu")]
    activation: Activation,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Multi-label decision threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    #[arg(long, default_value = "micro_f1")]
    metric: MetricKind,
    /// Record the gradient bias of the cached quantities every epoch.
    #[arg(long)]
    measure_bias: bool,
}

#[derive(Debug, Args)]
struct GenSbmArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 0.5)]
    p_in: f64,
    #[arg(long, default_value_t = 0.05)]
    p_out: f64,
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    feature_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    instances: usize,
}

#[derive(Debug, Args)]
struct SpeedupArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
}

#[derive(Debug, Args)]
struct BiasSweepArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Comma-separated update counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    steps: Vec<usize>,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFiniteLoss { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Train(a) => run_train(a, out),
        Command::GenSbm(a) => run_gen_sbm(a, out),
        Command::Gradcheck(a) => run_gradcheck(a, out),
        Command::Speedup(a) => run_speedup(a, out),
        Command::BiasSweep(a) => run_bias_sweep(a, out),
    }
}

fn run_train(a: TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let graph = load_graph(&a.dataset)?;
    let cfg = TrainConfig {
        variant: a.variant,
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        lr_schedule: a.lr_schedule,
        update_frequency: a.update_frequency,
        optimizer: a.optimizer,
        seed: a.seed,
        activation: a.activation,
        task: graph.task(),
        hidden: vec![a.hidden_dim; a.layers],
        eval_every: a.eval_every,
        metric: a.metric,
        threshold: a.threshold,
        measure_bias: a.measure_bias,
    };
    cfg.validate(&graph)?;
    let params = cfg.init_params(&graph);

    let sink: Box<dyn Write> = match &a.log {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::sink()),
    };
    let mut writer = JsonlWriter::new(sink);
    let outcome = match train(&graph, params, &cfg, &mut writer) {
        Ok(o) => o,
        Err(Error::NonFiniteLoss { epoch }) => {
            writer.abort(epoch, "non-finite loss")?;
            writer.flush()?;
            return Err(Error::NonFiniteLoss { epoch });
        }
        Err(e) => return Err(e),
    };
    writer.summary(&outcome.summary)?;
    writer.flush()?;
    if let Some(path) = &a.checkpoint {
        save_checkpoint(&outcome.best_params, path)?;
    }
    serde_json::to_writer(&mut *out, &outcome.summary)?;
    writeln!(out)?;
    Ok(0)
}

fn run_gen_sbm(a: GenSbmArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = SbmSpec {
        num_nodes: a.nodes,
        num_blocks: a.blocks,
        p_in: a.p_in,
        p_out: a.p_out,
        feature_dim: a.feature_dim,
        feature_noise: a.feature_noise,
        seed: a.seed,
    };
    let graph = generate_sbm(&spec)?;
    write_graph(&graph, &a.out)?;
    writeln!(
        out,
        "wrote {} nodes, {} edges to {}",
        graph.num_nodes(),
        graph.edges().len(),
        a.out.display()
    )?;
    Ok(0)
}

fn run_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let report = gradcheck::run_suite(a.seed, a.instances)?;
    writeln!(
        out,
        "max relative error {:.3e} over {} entries in {} instances",
        report.max_rel_error, report.entries, report.instances
    )?;
    Ok(if report.max_rel_error < 1e-4 { 0 } else { 1 })
}

fn run_speedup(a: SpeedupArgs, out: &mut dyn Write) -> Result<i32> {
    let base = read_log(&a.baseline)?;
    let cand = read_log(&a.candidate)?;
    writeln!(out, "{}", speedup(&base, &cand)?)?;
    Ok(0)
}

fn run_bias_sweep(a: BiasSweepArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {}", a.lr)));
    }
    let (graph, params) = bias_sweep_instance(a.seed)?;
    writeln!(out, "steps\tbias_l2")?;
    for (t, bias) in bias_trajectory(&graph, &params, a.lr, &a.steps)? {
        writeln!(out, "{t}\t{bias:.6e}")?;
    }
    Ok(0)
}
