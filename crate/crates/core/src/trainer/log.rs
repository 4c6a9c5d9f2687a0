use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One record per epoch. `epoch` counts from 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Optimisation time since the start of the run; evaluation excluded.
    pub wall_clock_s: f64,
    pub train_loss: f64,
    pub train_metric: Option<f64>,
    pub val_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub grad_bias_l2: Option<f64>,
    pub refreshes_done: usize,
    pub updates_done: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best_val_epoch: Option<usize>,
    pub best_val_metric: Option<f64>,
    pub test_at_best_val: Option<f64>,
    pub total_refreshes: usize,
    pub total_updates: usize,
    pub epochs_run: usize,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a RunSummary,
}

#[derive(Serialize)]
struct AbortLine<'a> {
    aborted: bool,
    epoch: usize,
    reason: &'a str,
}

/// Writes epoch records, a summary line and abort diagnostics as JSON lines.
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    fn line(&mut self, value: &impl Serialize) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn epoch(&mut self, log: &EpochLog) -> Result<()> {
        self.line(log)
    }

    pub fn summary(&mut self, summary: &RunSummary) -> Result<()> {
        self.line(&SummaryLine { summary })
    }

    pub fn abort(&mut self, epoch: usize, reason: &str) -> Result<()> {
        self.line(&AbortLine {
            aborted: true,
            epoch,
            reason,
        })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses the epoch records of a JSONL log, skipping summary and abort lines.
pub fn parse_log(text: &str, file: &str) -> Result<Vec<EpochLog>> {
    let mut logs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            file: file.to_string(),
            line: i + 1,
            msg,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err("expected a JSON object".into()))?;
        if obj.contains_key("summary") || obj.contains_key("aborted") {
            continue;
        }
        logs.push(serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(logs)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EpochLog>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile {
            file: path.display().to_string(),
        },
        _ => Error::Io(e),
    })?;
    parse_log(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_skips_summary_and_abort() {
        let mut w = JsonlWriter::new(Vec::new());
        let a = EpochLog {
            epoch: 1,
            wall_clock_s: 0.25,
            train_loss: 0.7,
            val_metric: Some(0.5),
            refreshes_done: 1,
            updates_done: 3,
            ..EpochLog::default()
        };
        let b = EpochLog { epoch: 2, wall_clock_s: 0.5, ..a.clone() };
        w.epoch(&a).unwrap();
        w.epoch(&b).unwrap();
        w.summary(&RunSummary::default()).unwrap();
        w.abort(3, "non-finite loss").unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"wall_clock_s\":0.25"));
        assert_eq!(parse_log(&text, "log").unwrap(), vec![a, b]);
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = parse_log("{\"epoch\":1}\nnot json\n", "run.jsonl").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_log("{\"epoch\":1,\"wall_clock_s\":0,\"train_loss\":1,\"refreshes_done\":0,\"updates_done\":0}\n[1]\n", "x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn missing_log_is_reported_by_name() {
        let err = read_log("/nonexistent/run.jsonl").unwrap_err();
        assert_eq!(err.to_string(), "/nonexistent/run.jsonl not found");
    }
}
