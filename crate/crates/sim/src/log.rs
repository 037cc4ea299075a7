//! Ground-truth + sensor stream, stored as JSON lines (one record per scan tick).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use racemcl_core::sensor::ScanFrame;
use racemcl_core::Pose2D;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
    #[error("{path}: log is empty")]
    Empty { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRecord {
    pub stamp: f64,
    pub ground_truth: Pose2D,
    pub odom_pose: Pose2D,
    /// Speed reported by odometry (m/s).
    pub v: f64,
    pub scan: ScanFrame,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimLog {
    pub records: Vec<SimRecord>,
}

impl SimLog {
    pub fn push(&mut self, r: SimRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| io(e.into()))?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a log, rejecting malformed lines and non-increasing stamps by line number.
    pub fn read_jsonl(path: &Path) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut records: Vec<SimRecord> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| LogError::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let r: SimRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            if r.scan.ranges.is_empty() {
                return Err(bad("scan has no ranges".into()));
            }
            if let Some(prev) = records.last() {
                if r.stamp <= prev.stamp {
                    return Err(bad(format!("stamp {} does not increase past {}", r.stamp, prev.stamp)));
                }
            }
            records.push(r);
        }
        if records.is_empty() {
            return Err(LogError::Empty { path: path.to_path_buf() });
        }
        Ok(Self { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use racemcl_core::sensor::ScanMeta;

    fn sample(n: usize) -> SimLog {
        let meta = ScanMeta::centered(8, 1.0, 10.0);
        let mut log = SimLog::default();
        for i in 0..n {
            let t = i as f64 * 0.025;
            log.push(SimRecord {
                stamp: t,
                ground_truth: Pose2D::new(t, 0.5, 0.1),
                odom_pose: Pose2D::new(1.3 * t, 0.5, 0.1),
                v: 2.0,
                scan: ScanFrame::new(t, &meta, vec![1.5; 8]).unwrap(),
            });
        }
        log
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lap.jsonl");
        let log = sample(5);
        log.write_jsonl(&p).unwrap();
        assert_eq!(SimLog::read_jsonl(&p).unwrap(), log);
    }

    #[test]
    fn truncated_line_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lap.jsonl");
        sample(4).write_jsonl(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let cut = &text[..text.len() - 30];
        std::fs::write(&p, cut).unwrap();
        match SimLog::read_jsonl(&p) {
            Err(LogError::Record { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stamps_must_increase() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lap.jsonl");
        let mut log = sample(3);
        log.records[2].stamp = 0.0;
        log.write_jsonl(&p).unwrap();
        assert!(matches!(SimLog::read_jsonl(&p), Err(LogError::Record { line: 3, .. })));
    }
}
