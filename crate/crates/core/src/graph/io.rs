//! Text dataset directories.
//!
//! ```text
//! graph.tsv     src<TAB>dst per undirected edge, src <= dst
//! features.tsv  N lines of d_0 tab-separated decimals
//! labels.tsv    N lines: class index (multiclass) or C tab-separated 0/1 values
//! splits.tsv    N lines of train | val | test
//! meta.txt      key=value: num_nodes, num_classes, task, feature_dim
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::matrix::DenseMatrix;
use crate::nn::Task;

const GRAPH: &str = "graph.tsv";
const FEATURES: &str = "features.tsv";
const LABELS: &str = "labels.tsv";
const SPLITS: &str = "splits.tsv";
const META: &str = "meta.txt";

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingFile {
            file: name.to_string(),
        });
    }
    Ok(fs::read_to_string(path)?)
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

struct Meta {
    num_nodes: usize,
    num_classes: usize,
    task: Task,
    feature_dim: usize,
}

fn parse_meta(text: &str) -> Result<Meta> {
    let mut kv = HashMap::new();
    for (no, line) in lines(text) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(META, no, format!("expected key=value, got {line:?}")))?;
        kv.insert(k.trim().to_string(), (no, v.trim().to_string()));
    }
    let get = |key: &str| {
        kv.get(key)
            .ok_or_else(|| parse_err(META, 0, format!("missing key {key}")))
    };
    let count = |key: &str| -> Result<usize> {
        let (no, v) = get(key)?;
        v.parse()
            .map_err(|_| parse_err(META, *no, format!("{key} is not a count: {v:?}")))
    };
    let (task_line, task) = get("task")?;
    Ok(Meta {
        num_nodes: count("num_nodes")?,
        num_classes: count("num_classes")?,
        feature_dim: count("feature_dim")?,
        task: task
            .parse()
            .map_err(|_| parse_err(META, *task_line, format!("unknown task {task:?}")))?,
    })
}

fn check_rows(file: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(parse_err(
            file,
            got,
            format!("expected {want} rows, found {got}"),
        ));
    }
    Ok(())
}

/// Reads a dataset directory and normalises its adjacency.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta = parse_meta(&read(dir, META)?)?;
    let n = meta.num_nodes;

    let mut edges = Vec::new();
    for (no, line) in lines(&read(dir, GRAPH)?) {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 2 {
            return Err(parse_err(GRAPH, no, "expected src<TAB>dst"));
        }
        let mut ends = [0usize; 2];
        for (slot, tok) in ends.iter_mut().zip(&parts) {
            *slot = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(GRAPH, no, format!("bad node index {tok:?}")))?;
            if *slot >= n {
                return Err(parse_err(
                    GRAPH,
                    no,
                    format!("node {slot} out of range for {n} nodes"),
                ));
            }
        }
        edges.push((ends[0], ends[1]));
    }

    let mut feats = Vec::with_capacity(n * meta.feature_dim);
    let mut rows = 0;
    for (no, line) in lines(&read(dir, FEATURES)?) {
        let before = feats.len();
        for tok in line.split('\t') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| parse_err(FEATURES, no, format!("non-numeric token {tok:?}")))?;
            feats.push(v);
        }
        if feats.len() - before != meta.feature_dim {
            return Err(parse_err(
                FEATURES,
                no,
                format!(
                    "expected {} values, found {}",
                    meta.feature_dim,
                    feats.len() - before
                ),
            ));
        }
        rows += 1;
    }
    check_rows(FEATURES, rows, n)?;
    let features = DenseMatrix::from_vec(n, meta.feature_dim, feats)?;

    let c = meta.num_classes;
    let mut labels = DenseMatrix::zeros(n, c);
    let mut rows = 0;
    for (no, line) in lines(&read(dir, LABELS)?) {
        if rows >= n {
            return Err(parse_err(LABELS, no, format!("more than {n} rows")));
        }
        match meta.task {
            Task::Multiclass => {
                let k: usize = line
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(LABELS, no, format!("bad class index {line:?}")))?;
                if k >= c {
                    return Err(parse_err(
                        LABELS,
                        no,
                        format!("class {k} out of range for {c} classes"),
                    ));
                }
                labels.set(rows, k, 1.0);
            }
            Task::Multilabel => {
                let toks: Vec<&str> = line.split('\t').collect();
                if toks.len() != c {
                    return Err(parse_err(
                        LABELS,
                        no,
                        format!("expected {c} values, found {}", toks.len()),
                    ));
                }
                for (k, tok) in toks.iter().enumerate() {
                    let v = match tok.trim() {
                        "0" => 0.0,
                        "1" => 1.0,
                        other => {
                            return Err(parse_err(LABELS, no, format!("expected 0/1, got {other:?}")))
                        }
                    };
                    labels.set(rows, k, v);
                }
            }
        }
        rows += 1;
    }
    check_rows(LABELS, rows, n)?;

    let mut splits = Vec::with_capacity(n);
    for (no, line) in lines(&read(dir, SPLITS)?) {
        splits.push(
            line.trim()
                .parse::<Split>()
                .map_err(|_| parse_err(SPLITS, no, format!("unknown split {line:?}")))?,
        );
    }
    check_rows(SPLITS, splits.len(), n)?;

    Graph::from_edges(&edges, features, labels, splits, meta.task)
}

/// Full-precision decimal: 17 significant digits round-trip every `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `graph` in the directory format read by [`load_graph`].
pub fn write_graph(graph: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut out = String::new();
    for (i, j) in graph.edges() {
        writeln!(out, "{i}\t{j}").unwrap();
    }
    fs::write(dir.join(GRAPH), &out)?;

    out.clear();
    let feats = graph.features();
    for r in 0..feats.rows() {
        let row: Vec<String> = feats.row(r).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", row.join("\t")).unwrap();
    }
    fs::write(dir.join(FEATURES), &out)?;

    out.clear();
    let labels = graph.labels();
    for r in 0..labels.rows() {
        match graph.task() {
            Task::Multiclass => {
                let k = graph.class_of(r).expect("validated one-hot row");
                writeln!(out, "{k}").unwrap();
            }
            Task::Multilabel => {
                let row: Vec<&str> = labels
                    .row(r)
                    .iter()
                    .map(|&y| if y == 1.0 { "1" } else { "0" })
                    .collect();
                writeln!(out, "{}", row.join("\t")).unwrap();
            }
        }
    }
    fs::write(dir.join(LABELS), &out)?;

    out.clear();
    for s in graph.splits() {
        writeln!(out, "{s}").unwrap();
    }
    fs::write(dir.join(SPLITS), &out)?;

    let meta = format!(
        "num_nodes={}\nnum_classes={}\ntask={}\nfeature_dim={}\n",
        graph.num_nodes(),
        graph.num_classes(),
        graph.task().as_str(),
        graph.feature_dim()
    );
    fs::write(dir.join(META), meta)?;
    Ok(())
}
