//! Embedding providers for candidate tactics.
//!
//! The filter needs three things per candidate tactic: a unit-norm embedding
//! of the tactic in the context of its goal, a predicted success
//! probability, and a predicted execution time. Where those come from is
//! behind [`EmbeddingProvider`]:
//!
//! * [`FileProvider`] replays precomputed records from a JSONL file, keyed
//!   by `(goal_id, tactic text)`.
//! * [`HashStubProvider`] derives everything deterministically from a hash
//!   of `(salt, goal, tactic)`. No model, no files: useful for tests and for
//!   exercising the full pipeline offline.
//! * [`RemoteProvider`] calls an HTTP service that runs a real encoder.
//!
//! All three produce embeddings of one configured dimension and renormalize
//! them on ingestion: a norm within `1e-3` of 1 is corrected silently
//! (serialization round-off), anything further off is corrupt data.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default embedding dimension, matching the encoder this tool is usually
/// paired with.
pub const DEFAULT_DIM: usize = 1472;

/// Accepted deviation of a stored embedding's norm from 1 before the record
/// is rejected as corrupt.
pub const RENORM_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no embedding recorded for goal {goal_id:?} tactic {tactic:?}")]
    MissingEmbedding { goal_id: String, tactic: String },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedding data: {0}")]
    InvalidData(String),
    #[error("remote embedding failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EmbedError>;

/// One embedded tactic: the unit-norm vector plus its predicted success
/// probability and predicted execution time in seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub goal_id: String,
    pub tactic_text: String,
    pub embedding: Vec<f64>,
    pub pred_success: f64,
    pub pred_time: f64,
}

impl EmbeddingRecord {
    /// Checks dimension, renormalizes a slightly-off norm, rejects the rest.
    fn normalized(mut self, dim: usize) -> Result<Self> {
        if self.embedding.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                got: self.embedding.len(),
            });
        }
        let norm = self.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > RENORM_TOL {
            return Err(EmbedError::InvalidData(format!(
                "embedding for goal {:?} tactic {:?} has norm {norm}",
                self.goal_id, self.tactic_text
            )));
        }
        for x in &mut self.embedding {
            *x /= norm;
        }
        if !(0.0..=1.0).contains(&self.pred_success) {
            return Err(EmbedError::InvalidData(format!(
                "pred_success {} outside [0, 1]",
                self.pred_success
            )));
        }
        if !self.pred_time.is_finite() || self.pred_time < 0.0 {
            return Err(EmbedError::InvalidData(format!(
                "pred_time {} must be finite and >= 0",
                self.pred_time
            )));
        }
        Ok(self)
    }
}

/// Source of embeddings and predictions for a batch of tactics at one goal.
pub trait EmbeddingProvider: Send + Sync {
    /// Embedding dimension every record will have.
    fn dim(&self) -> usize;

    /// Embeds `tactics` in the context of one goal. Returns exactly one
    /// record per tactic, in the same order.
    fn embed_batch(
        &self,
        goal_id: &str,
        goal_text: &str,
        tactics: &[String],
    ) -> Result<Vec<EmbeddingRecord>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    File,
    HashStub,
    Remote,
}

/// Declarative provider selection, as it appears in run configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub dim: usize,
    /// File path for [`ProviderKind::File`], base URL for
    /// [`ProviderKind::Remote`]; ignored by the hash stub.
    pub source: String,
    pub salt: u64,
    /// Retry budget for remote calls (total attempts = retries + 1).
    pub retries: u32,
    /// Per-request timeout for remote calls, in seconds.
    pub timeout_s: f64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::HashStub,
            dim: DEFAULT_DIM,
            source: String::new(),
            salt: 0,
            retries: 3,
            timeout_s: 10.0,
        }
    }
}

impl ProviderConfig {
    /// Materializes the configured provider. File providers load and index
    /// their source here, so build once and reuse.
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        if self.dim < 2 {
            return Err(EmbedError::InvalidData(format!(
                "embedding dimension must be >= 2, got {}",
                self.dim
            )));
        }
        Ok(match self.kind {
            ProviderKind::File => Box::new(FileProvider::load(Path::new(&self.source), self.dim)?),
            ProviderKind::HashStub => Box::new(HashStubProvider::new(self.dim, self.salt)),
            ProviderKind::Remote => Box::new(RemoteProvider::new(
                &self.source,
                self.dim,
                self.retries,
                self.timeout_s,
            )),
        })
    }
}

/// Embeds one batch with a provider built fresh from `cfg`.
pub fn embed_batch(
    goal_id: &str,
    goal_text: &str,
    tactics: &[String],
    cfg: &ProviderConfig,
) -> Result<Vec<EmbeddingRecord>> {
    cfg.build()?.embed_batch(goal_id, goal_text, tactics)
}

/// Stable 64-bit hash of a salted field list.
///
/// SHA-256 truncated to its first 8 little-endian bytes, with each field
/// length-prefixed so `("ab", "c")` and `("a", "bc")` cannot collide. Stable
/// across processes and platforms, unlike the std hasher.
pub fn stable_hash64(salt: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(salt.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Deterministic embedding of one `(goal, tactic)` pair.
///
/// Seeds a PRNG from `stable_hash64(salt, [goal, tactic])`, draws a standard
/// normal vector and normalizes it (uniform on the sphere), then draws
/// `pred_success` uniform in `[0, 1)` and `pred_time` uniform in
/// `[0.05, 0.55)` seconds. Requires `dim >= 2`.
pub fn hash_stub_embed(goal: &str, tactic: &str, dim: usize, salt: u64) -> EmbeddingRecord {
    assert!(dim >= 2, "embedding dimension must be >= 2, got {dim}");
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash64(salt, &[goal, tactic]));
    let mut embedding: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in &mut embedding {
            *x /= norm;
        }
    } else {
        // A zero draw is astronomically unlikely; pin a fixed direction.
        embedding[0] = 1.0;
    }
    let pred_success: f64 = rng.random();
    let pred_time = 0.05 + 0.5 * rng.random::<f64>();
    EmbeddingRecord {
        goal_id: goal.to_string(),
        tactic_text: tactic.to_string(),
        embedding,
        pred_success,
        pred_time,
    }
}

/// Provider wrapper around [`hash_stub_embed`].
#[derive(Debug, Clone)]
pub struct HashStubProvider {
    dim: usize,
    salt: u64,
}

impl HashStubProvider {
    pub fn new(dim: usize, salt: u64) -> Self {
        assert!(dim >= 2, "embedding dimension must be >= 2, got {dim}");
        Self { dim, salt }
    }
}

impl EmbeddingProvider for HashStubProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(
        &self,
        goal_id: &str,
        _goal_text: &str,
        tactics: &[String],
    ) -> Result<Vec<EmbeddingRecord>> {
        Ok(tactics
            .iter()
            .map(|t| {
                let mut rec = hash_stub_embed(goal_id, t, self.dim, self.salt);
                rec.goal_id = goal_id.to_string();
                rec
            })
            .collect())
    }
}

/// Precomputed embeddings loaded from JSONL, one record per line, indexed
/// by `(goal_id, tactic text)`. Duplicate keys keep the first record.
pub struct FileProvider {
    dim: usize,
    index: HashMap<(String, String), EmbeddingRecord>,
}

impl FileProvider {
    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut index = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| EmbedError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| {
                EmbedError::InvalidData(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            let rec = rec.normalized(dim).map_err(|e| match e {
                EmbedError::DimensionMismatch { expected, got } => {
                    EmbedError::DimensionMismatch { expected, got }
                }
                other => EmbedError::InvalidData(format!(
                    "{}:{}: {other}",
                    path.display(),
                    lineno + 1
                )),
            })?;
            index
                .entry((rec.goal_id.clone(), rec.tactic_text.clone()))
                .or_insert(rec);
        }
        Ok(Self { dim, index })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

impl EmbeddingProvider for FileProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(
        &self,
        goal_id: &str,
        _goal_text: &str,
        tactics: &[String],
    ) -> Result<Vec<EmbeddingRecord>> {
        tactics
            .iter()
            .map(|t| {
                self.index
                    .get(&(goal_id.to_string(), t.clone()))
                    .cloned()
                    .ok_or_else(|| EmbedError::MissingEmbedding {
                        goal_id: goal_id.to_string(),
                        tactic: t.clone(),
                    })
            })
            .collect()
    }
}

/// Writes records as JSONL suitable for [`FileProvider::load`].
pub fn write_embedding_file(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|source| {
        EmbedError::Io {
            path: path.display().to_string(),
            source,
        }
    })?);
    for rec in records {
        serde_json::to_writer(&mut out, rec)
            .map_err(|e| EmbedError::InvalidData(e.to_string()))?;
        out.write_all(b"\n").map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    out.flush().map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    goal: &'a str,
    tactics: &'a [String],
}

#[derive(Deserialize)]
struct RemoteResponse {
    embeddings: Vec<Vec<f64>>,
    success: Vec<f64>,
    time: Vec<f64>,
}

/// HTTP client for an embedding service.
///
/// Posts `{"goal": ..., "tactics": [...]}` to `{base}/embed` and expects
/// `{"embeddings": [[f64; dim]], "success": [f64], "time": [f64]}` aligned
/// with the request order. Failed requests (transport, status, malformed or
/// misaligned payload) are retried up to the configured budget.
pub struct RemoteProvider {
    base: String,
    dim: usize,
    retries: u32,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(base: &str, dim: usize, retries: u32, timeout_s: f64) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(timeout_s.max(0.001))))
            .build();
        Self {
            base: base.trim_end_matches('/').to_string(),
            dim,
            retries,
            agent: config.into(),
        }
    }

    fn request_once(
        &self,
        goal_text: &str,
        tactics: &[String],
    ) -> std::result::Result<RemoteResponse, String> {
        let url = format!("{}/embed", self.base);
        let body = RemoteRequest {
            goal: goal_text,
            tactics,
        };
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| e.to_string())?;
        let parsed: RemoteResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("malformed response: {e}"))?;
        let n = tactics.len();
        if parsed.embeddings.len() != n || parsed.success.len() != n || parsed.time.len() != n {
            return Err(format!(
                "misaligned response: {} embeddings, {} success, {} time for {} tactics",
                parsed.embeddings.len(),
                parsed.success.len(),
                parsed.time.len(),
                n
            ));
        }
        Ok(parsed)
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(
        &self,
        goal_id: &str,
        goal_text: &str,
        tactics: &[String],
    ) -> Result<Vec<EmbeddingRecord>> {
        let attempts = self.retries + 1;
        let mut last_err = String::new();
        for _ in 0..attempts {
            match self.request_once(goal_text, tactics) {
                Ok(resp) => {
                    return tactics
                        .iter()
                        .zip(resp.embeddings)
                        .zip(resp.success.iter().zip(&resp.time))
                        .map(|((tactic, embedding), (&ps, &pt))| {
                            EmbeddingRecord {
                                goal_id: goal_id.to_string(),
                                tactic_text: tactic.clone(),
                                embedding,
                                pred_success: ps,
                                pred_time: pt,
                            }
                            .normalized(self.dim)
                        })
                        .collect();
                }
                Err(e) => last_err = e,
            }
        }
        Err(EmbedError::Transport {
            attempts,
            message: last_err,
        })
    }
}
