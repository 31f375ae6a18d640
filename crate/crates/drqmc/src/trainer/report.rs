//! Run artifacts: a CSV time series and a JSON metadata echo.
//!
//! CSV schema (one row per iteration, empty cells where a column was not
//! sampled at that step):
//!
//! ```text
//! k,loss,rel_l2,grad_norm,cov_trace,wall_time_ms
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reruns with
//! the same config produce byte-identical files except for the
//! `wall_time_ms` column.

use super::{TrainConfig, TrainRecord};
use crate::error::{Error, Result};
use crate::sampler::TABLE_VERSION;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Everything needed to rerun and audit a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: TrainConfig,
    pub direction_table_version: String,
    pub code_version: String,
}

impl RunMetadata {
    pub fn for_config(config: &TrainConfig) -> Self {
        RunMetadata {
            config: config.clone(),
            direction_table_version: TABLE_VERSION.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write `records.csv` and `run.json` under `dir` (created if missing).
pub fn emit_results(records: &[TrainRecord], meta: &RunMetadata, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let csv_path = dir.join("records.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(out, "k,loss,rel_l2,grad_norm,cov_trace,wall_time_ms")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            r.loss,
            fmt_opt(r.rel_l2),
            r.grad_norm,
            fmt_opt(r.cov_trace),
            r.wall_time_ms
        )?;
    }
    out.flush()?;

    let json_path = dir.join("run.json");
    let file = std::fs::File::create(&json_path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), meta)?;
    Ok(())
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| Error::Config(format!("records.csv line {line}: {e}")))
}

/// Parse a `records.csv` back into records (used by the round-trip checks
/// and by downstream tooling).
pub fn read_records_csv(path: &Path) -> Result<Vec<TrainRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "k,loss,rel_l2,grad_norm,cov_trace,wall_time_ms")) => {}
        other => {
            return Err(Error::Config(format!(
                "records.csv: unexpected header {:?}",
                other.map(|(_, h)| h)
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "records.csv line {}: expected 6 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let parse = |f: &str| -> Result<f64> {
            f.parse::<f64>()
                .map_err(|e| Error::Config(format!("records.csv line {}: {e}", i + 1)))
        };
        records.push(TrainRecord {
            k: fields[0]
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("records.csv line {}: {e}", i + 1)))?,
            loss: parse(fields[1])?,
            rel_l2: parse_opt(fields[2], i + 1)?,
            grad_norm: parse(fields[3])?,
            cov_trace: parse_opt(fields[4], i + 1)?,
            wall_time_ms: parse(fields[5])?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::ProblemId;
    use crate::sampler::{SamplerKind, SamplerTag};

    fn sample_records() -> Vec<TrainRecord> {
        vec![
            TrainRecord {
                k: 0,
                loss: -0.12345678901234567,
                rel_l2: Some(0.9),
                grad_norm: 1.5e-3,
                cov_trace: None,
                wall_time_ms: 1.25,
            },
            TrainRecord {
                k: 1,
                loss: 3.0,
                rel_l2: None,
                grad_norm: 0.5,
                cov_trace: Some(42.0),
                wall_time_ms: 2.5,
            },
        ]
    }

    #[test]
    fn csv_roundtrip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let config = TrainConfig::new(
            ProblemId::Poisson,
            5,
            SamplerKind::new(SamplerTag::RqmcShift, 3),
        );
        let meta = RunMetadata::for_config(&config);
        let records = sample_records();
        emit_results(&records, &meta, dir.path()).unwrap();
        let parsed = read_records_csv(&dir.path().join("records.csv")).unwrap();
        assert_eq!(parsed, records);
        // metadata parses back and echoes the config
        let text = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
        let meta2: RunMetadata = serde_json::from_str(&text).unwrap();
        assert_eq!(meta2.config.dim, 5);
        assert_eq!(meta2.direction_table_version, TABLE_VERSION);
    }

    #[test]
    fn empty_record_list_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let config =
            TrainConfig::new(ProblemId::Poisson, 2, SamplerKind::new(SamplerTag::Mc, 0));
        emit_results(&[], &RunMetadata::for_config(&config), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert_eq!(text, "k,loss,rel_l2,grad_norm,cov_trace,wall_time_ms\n");
        assert_eq!(read_records_csv(&dir.path().join("records.csv")).unwrap(), vec![]);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        std::fs::write(&path, "bogus header\n").unwrap();
        assert!(read_records_csv(&path).is_err());
        std::fs::write(&path, "k,loss,rel_l2,grad_norm,cov_trace,wall_time_ms\n1,2,3\n").unwrap();
        assert!(read_records_csv(&path).is_err());
    }
}
