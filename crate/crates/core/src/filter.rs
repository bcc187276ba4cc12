//! Candidate pruning: quality scoring plus a selection strategy.
//!
//! Each candidate tactic carries a generator logit, a unit-norm embedding,
//! and predicted success/time. Its quality is
//!
//! ```text
//! qᵢ = mᵢ + λ_s · sᵢ + λ_τ · τ̃ᵢ
//! ```
//!
//! where `m = softmax(logits / θ)`, `s` is predicted success, and `τ̃ᵢ = 1 -
//! τᵢ/‖τ‖` rewards fast tactics (‖τ‖ the Euclidean norm of the predicted
//! times, so the transform is scale-free). The temperature θ flattens or
//! sharpens how much the generator's ranking dominates; λ_s and λ_τ mix in
//! the two predictions and default to 0.
//!
//! The DPP strategy pairs those qualities with the embeddings in a k-DPP
//! (see [`crate::dpp`]), so near-duplicate candidates suppress each other.
//! Top-k and random selection share the same interface as baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpp::{
    build_kernel, eigendecompose, sample_k_dpp, DppError, FeatureBank, DEFAULT_CLAMP_TOL,
};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Dpp(#[from] DppError),
}

pub type Result<T> = std::result::Result<T, FilterError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStrategy {
    Dpp,
    TopK,
    Random,
}

/// How many candidates survive and how their qualities are assembled.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub k: usize,
    pub lambda_s: f64,
    pub lambda_tau: f64,
    pub theta: f64,
    pub strategy: FilterStrategy,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            k: 8,
            lambda_s: 0.0,
            lambda_tau: 0.0,
            theta: 1.0,
            strategy: FilterStrategy::Dpp,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(FilterError::InvalidInput("k must be >= 1".into()));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(FilterError::InvalidInput(format!(
                "theta must be finite and > 0, got {}",
                self.theta
            )));
        }
        for (name, v) in [("lambda_s", self.lambda_s), ("lambda_tau", self.lambda_tau)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FilterError::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A fully scored candidate, ready for selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredTactic {
    pub text: String,
    pub logit: f64,
    pub embedding: Vec<f64>,
    /// Predicted success probability in `[0, 1]`.
    pub pred_success: f64,
    /// Predicted execution time in seconds, `>= 0`.
    pub pred_time: f64,
}

/// Candidate record as stored in JSONL candidate files. `embedding`,
/// `pred_success` and `pred_time` may be absent when a provider is expected
/// to fill them in downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub goal_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_text: Option<String>,
    pub text: String,
    pub logit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_success: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_time: Option<f64>,
}

/// Scale-free time preference: `τ̃ᵢ = 1 - τᵢ/‖τ‖ = (‖τ‖ - τᵢ)/‖τ‖`.
///
/// Smaller times score higher; scaling all times by a constant changes
/// nothing. All-zero input (‖τ‖ = 0) means every tactic is instant, which
/// maps to the maximal preference 1 for all.
pub fn normalize_times(times: &[f64]) -> Vec<f64> {
    let norm = times.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![1.0; times.len()];
    }
    times.iter().map(|t| (norm - t) / norm).collect()
}

/// Temperature softmax with max subtraction for overflow safety.
pub fn softmax_logits(logits: &[f64], theta: f64) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(FilterError::InvalidInput("no logits to normalize".into()));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(FilterError::InvalidInput(format!(
            "theta must be finite and > 0, got {theta}"
        )));
    }
    if let Some(bad) = logits.iter().find(|l| !l.is_finite()) {
        return Err(FilterError::InvalidInput(format!(
            "logits must be finite, got {bad}"
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| ((l - max) / theta).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| e / total).collect())
}

/// Combines the three score channels: `qᵢ = mᵢ + λ_s sᵢ + λ_τ τ̃ᵢ`.
pub fn quality_scores(
    softmax: &[f64],
    pred_success: &[f64],
    time_pref: &[f64],
    cfg: &FilterConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if softmax.len() != pred_success.len() || softmax.len() != time_pref.len() {
        return Err(FilterError::InvalidInput(format!(
            "channel lengths differ: {} softmax, {} success, {} time",
            softmax.len(),
            pred_success.len(),
            time_pref.len()
        )));
    }
    Ok((0..softmax.len())
        .map(|i| softmax[i] + cfg.lambda_s * pred_success[i] + cfg.lambda_tau * time_pref[i])
        .collect())
}

/// A deduplicated candidate pool with its computed score channels, aligned
/// by index. This is the state the selection strategies act on.
#[derive(Debug, Clone)]
pub struct ScoredPool {
    pub tactics: Vec<ScoredTactic>,
    pub softmax: Vec<f64>,
    pub time_pref: Vec<f64>,
    pub quality: Vec<f64>,
}

impl ScoredPool {
    pub fn len(&self) -> usize {
        self.tactics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tactics.is_empty()
    }
}

/// Validates `candidates`, merges exact duplicate texts (keeping the higher
/// logit; ties keep the earlier one), and computes the softmax, time
/// preference, and quality channels over the surviving pool in input order.
pub fn score_pool(candidates: &[ScoredTactic], cfg: &FilterConfig) -> Result<ScoredPool> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(FilterError::InvalidInput("no candidates".into()));
    }
    let dim = candidates[0].embedding.len();
    for c in candidates {
        if c.embedding.len() != dim {
            return Err(FilterError::DimensionMismatch {
                expected: dim,
                got: c.embedding.len(),
            });
        }
        if !c.logit.is_finite() {
            return Err(FilterError::InvalidInput(format!(
                "logit for {:?} must be finite",
                c.text
            )));
        }
        if !(0.0..=1.0).contains(&c.pred_success) {
            return Err(FilterError::InvalidInput(format!(
                "pred_success {} for {:?} outside [0, 1]",
                c.pred_success, c.text
            )));
        }
        if !c.pred_time.is_finite() || c.pred_time < 0.0 {
            return Err(FilterError::InvalidInput(format!(
                "pred_time {} for {:?} must be finite and >= 0",
                c.pred_time, c.text
            )));
        }
    }

    // Merge exact duplicate texts, keeping the higher logit.
    let mut best: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, c) in candidates.iter().enumerate() {
        match best.entry(c.text.as_str()) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(i);
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if candidates[*e.get()].logit < c.logit {
                    e.insert(i);
                }
            }
        }
    }
    let mut kept: Vec<usize> = best.into_values().collect();
    kept.sort_unstable();

    let tactics: Vec<ScoredTactic> = kept.iter().map(|&i| candidates[i].clone()).collect();
    let logits: Vec<f64> = tactics.iter().map(|c| c.logit).collect();
    let success: Vec<f64> = tactics.iter().map(|c| c.pred_success).collect();
    let times: Vec<f64> = tactics.iter().map(|c| c.pred_time).collect();
    let softmax = softmax_logits(&logits, cfg.theta)?;
    let time_pref = normalize_times(&times);
    let quality = quality_scores(&softmax, &success, &time_pref, cfg)?;
    Ok(ScoredPool {
        tactics,
        softmax,
        time_pref,
        quality,
    })
}

/// Prunes `candidates` down to at most `cfg.k`, preserving input order.
///
/// Exact duplicate texts are merged first (keeping the higher logit; ties
/// keep the earlier). If no more than k candidates remain they are all
/// returned. Otherwise the configured strategy picks k: top-k by logit
/// (ties by input position), uniform random, or a k-DPP over the quality
/// scores and embeddings. When k exceeds the kernel's numerical rank the
/// DPP samples a full-rank subset and fills the remainder with the
/// highest-quality unselected candidates.
pub fn filter_tactics<R: Rng + ?Sized>(
    _goal: &str,
    candidates: &[ScoredTactic],
    cfg: &FilterConfig,
    rng: &mut R,
) -> Result<Vec<ScoredTactic>> {
    let pool = score_pool(candidates, cfg)?;

    if pool.len() <= cfg.k {
        return Ok(pool.tactics);
    }

    let mut selected: Vec<usize> = match cfg.strategy {
        FilterStrategy::TopK => {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.sort_by(|&a, &b| {
                pool.tactics[b]
                    .logit
                    .total_cmp(&pool.tactics[a].logit)
                    .then(a.cmp(&b))
            });
            order.truncate(cfg.k);
            order
        }
        FilterStrategy::Random => rand::seq::index::sample(rng, pool.len(), cfg.k).into_vec(),
        FilterStrategy::Dpp => {
            let features: Vec<Vec<f64>> =
                pool.tactics.iter().map(|c| c.embedding.clone()).collect();
            let bank = FeatureBank::new(features, pool.quality.clone())?;
            let decomp = eigendecompose(&build_kernel(&bank), DEFAULT_CLAMP_TOL)?;
            let rank = decomp.rank();
            let mut picked: Vec<usize> = if rank >= cfg.k {
                sample_k_dpp(&decomp, cfg.k, rng)?
            } else if rank > 0 {
                sample_k_dpp(&decomp, rank, rng)?
            } else {
                Vec::new()
            };
            if picked.len() < cfg.k {
                // Rank-deficient kernel: pad with the best unselected
                // qualities so the environment still gets k tactics.
                let mut rest: Vec<usize> = (0..pool.len())
                    .filter(|i| !picked.contains(i))
                    .collect();
                rest.sort_by(|&a, &b| pool.quality[b].total_cmp(&pool.quality[a]).then(a.cmp(&b)));
                picked.extend(rest.into_iter().take(cfg.k - picked.len()));
            }
            picked
        }
    };

    selected.sort_unstable();
    Ok(selected.into_iter().map(|i| pool.tactics[i].clone()).collect())
}
