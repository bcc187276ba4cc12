//! Tactic execution records: the ground truth every other module consumes.
//!
//! A transition is one application of one tactic to one goal: either it
//! errored with a message or it succeeded and produced residual subgoals
//! (possibly none, which closes the goal). Status is not stored
//! independently; it is derived from which side the output took, and the
//! wire format rejects records where the two disagree.
//!
//! A [`TransitionLog`] is an ordered list of such records plus a
//! first-occurrence index on `(goal text, tactic text)`, which is what
//! replay environments query. Logs live on disk as JSONL, one record per
//! line.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, TransitionError>;

/// What a tactic application produced: an error message, or the list of
/// residual subgoals (empty means the goal is closed outright).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TacticOutput {
    Error(String),
    Subgoals(Vec<String>),
}

impl TacticOutput {
    pub fn is_success(&self) -> bool {
        matches!(self, TacticOutput::Subgoals(_))
    }

    /// 1 for success, 0 for error; the convention used on disk.
    pub fn status(&self) -> u8 {
        self.is_success() as u8
    }
}

/// One tactic execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordWire", into = "RecordWire")]
pub struct TransitionRecord {
    pub goal_id: String,
    pub goal_text: String,
    pub tactic_text: String,
    /// Execution time in seconds.
    pub time_s: f64,
    pub output: TacticOutput,
    /// Identifier of the search-tree expansion this execution belongs to,
    /// unique within one attempt.
    pub node_id: String,
    /// Identifier of the proof attempt.
    pub attempt_id: String,
}

impl TransitionRecord {
    pub fn status(&self) -> u8 {
        self.output.status()
    }

    pub fn is_success(&self) -> bool {
        self.output.is_success()
    }
}

/// On-disk shape: status is stored explicitly and must agree with the
/// output variant.
#[derive(Serialize, Deserialize)]
struct RecordWire {
    goal_id: String,
    goal_text: String,
    tactic_text: String,
    status: u8,
    time_s: f64,
    output: TacticOutput,
    node_id: String,
    attempt_id: String,
}

impl TryFrom<RecordWire> for TransitionRecord {
    type Error = String;

    fn try_from(w: RecordWire) -> std::result::Result<Self, String> {
        if w.status != w.output.status() {
            return Err(format!(
                "status {} contradicts output kind (expected {})",
                w.status,
                w.output.status()
            ));
        }
        if !w.time_s.is_finite() || w.time_s < 0.0 {
            return Err(format!("time_s {} must be finite and >= 0", w.time_s));
        }
        Ok(TransitionRecord {
            goal_id: w.goal_id,
            goal_text: w.goal_text,
            tactic_text: w.tactic_text,
            time_s: w.time_s,
            output: w.output,
            node_id: w.node_id,
            attempt_id: w.attempt_id,
        })
    }
}

impl From<TransitionRecord> for RecordWire {
    fn from(r: TransitionRecord) -> Self {
        RecordWire {
            status: r.status(),
            goal_id: r.goal_id,
            goal_text: r.goal_text,
            tactic_text: r.tactic_text,
            time_s: r.time_s,
            output: r.output,
            node_id: r.node_id,
            attempt_id: r.attempt_id,
        }
    }
}

/// Whether a malformed line aborts the read or is counted and skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadMode {
    Strict,
    Lenient,
}

/// Ordered transition records with a replay index on
/// `(goal text, tactic text)`. The first record for a key wins; later ones
/// stay in the record list but are counted as duplicates.
#[derive(Debug, Clone, Default)]
pub struct TransitionLog {
    records: Vec<TransitionRecord>,
    index: HashMap<(String, String), usize>,
    duplicate_keys: usize,
    skipped_lines: usize,
}

impl TransitionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<TransitionRecord>) -> Self {
        let mut log = Self::new();
        for r in records {
            log.push(r);
        }
        log
    }

    pub fn push(&mut self, record: TransitionRecord) {
        let key = (record.goal_text.clone(), record.tactic_text.clone());
        let pos = self.records.len();
        self.records.push(record);
        if self.index.contains_key(&key) {
            self.duplicate_keys += 1;
        } else {
            self.index.insert(key, pos);
        }
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records that arrived after their `(goal, tactic)` key was taken.
    pub fn duplicate_keys(&self) -> usize {
        self.duplicate_keys
    }

    /// Malformed lines skipped during a lenient read.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    /// First recorded execution of `tactic_text` on `goal_text`.
    pub fn lookup(&self, goal_text: &str, tactic_text: &str) -> Option<&TransitionRecord> {
        self.index
            .get(&(goal_text.to_string(), tactic_text.to_string()))
            .map(|&i| &self.records[i])
    }

    /// Distinct goal texts, in first-appearance order.
    pub fn goal_texts(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.goal_text.as_str()) {
                out.push(r.goal_text.as_str());
            }
        }
        out
    }
}

/// First recorded execution of `tactic_text` on `goal_text`, if any.
pub fn replay_lookup<'a>(
    log: &'a TransitionLog,
    goal_text: &str,
    tactic_text: &str,
) -> Option<&'a TransitionRecord> {
    log.lookup(goal_text, tactic_text)
}

/// Reads a JSONL transition log. Strict mode fails on the first malformed
/// line (1-based line number in the error); lenient mode skips and counts.
pub fn read_log(path: &Path, mode: ReadMode) -> Result<TransitionLog> {
    let file = std::fs::File::open(path).map_err(|source| TransitionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut log = TransitionLog::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| TransitionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TransitionRecord>(&line) {
            Ok(rec) => log.push(rec),
            Err(e) => match mode {
                ReadMode::Strict => {
                    return Err(TransitionError::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        message: e.to_string(),
                    });
                }
                ReadMode::Lenient => log.skipped_lines += 1,
            },
        }
    }
    Ok(log)
}

/// Writes a log as JSONL, one record per line, in record order.
pub fn write_log(path: &Path, log: &TransitionLog) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| TransitionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = std::io::BufWriter::new(file);
    for rec in log.records() {
        serde_json::to_writer(&mut out, rec)
            .map_err(|e| TransitionError::InvalidInput(e.to_string()))?;
        out.write_all(b"\n").map_err(|source| TransitionError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    out.flush().map_err(|source| TransitionError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Splits a log into train and validation parts by shuffling record indices
/// with a seeded PRNG. `train_fraction` of the records (rounded) go to the
/// first part; both parts keep the original record order.
pub fn split_log(
    log: &TransitionLog,
    train_fraction: f64,
    seed: u64,
) -> Result<(TransitionLog, TransitionLog)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TransitionError::InvalidInput(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if log.is_empty() {
        return Err(TransitionError::InvalidInput(
            "cannot split an empty log".into(),
        ));
    }
    let n = log.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let mut train_idx = idx[..n_train].to_vec();
    let mut valid_idx = idx[n_train..].to_vec();
    train_idx.sort_unstable();
    valid_idx.sort_unstable();
    let pick = |ids: &[usize]| {
        TransitionLog::from_records(ids.iter().map(|&i| log.records[i].clone()).collect())
    };
    Ok((pick(&train_idx), pick(&valid_idx)))
}
