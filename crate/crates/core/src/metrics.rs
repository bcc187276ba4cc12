//! Evaluation quantities computed from transition logs and attempt results.
//!
//! Most metrics here are per-node: transitions are grouped by the
//! `(attempt_id, node_id)` they were executed under, a rate is computed
//! inside each group, and the rates are summarized as mean ± standard error
//! across groups. The uniqueness metrics ask whether a tactic told the
//! search anything new at its node: an error message not seen there before,
//! or a success containing at least one subgoal string not seen there
//! before. Uniqueness compares exact strings and never resets within a
//! node, so redundant tactics score as noise no matter when they run.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingProvider;
use crate::transitions::{TacticOutput, TransitionLog, TransitionRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Mean with its standard error over `n` summarized values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Mean ± SE of a sample. SE uses the sample standard deviation (n−1
/// denominator) divided by √n; a single value has SE 0 by convention.
pub fn summarize(values: &[f64]) -> Result<MetricSummary> {
    let n = values.len();
    if n == 0 {
        return Err(MetricsError::InvalidInput(
            "cannot summarize an empty sample".into(),
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(MetricSummary {
        mean,
        std_error,
        n,
    })
}

/// The transitions executed at one node of one attempt, in log order.
#[derive(Debug, Clone)]
pub struct NodeGroup<'a> {
    pub attempt_id: &'a str,
    pub node_id: &'a str,
    pub records: Vec<&'a TransitionRecord>,
}

/// Groups a log by `(attempt_id, node_id)`, in first-appearance order.
pub fn node_groups(log: &TransitionLog) -> Vec<NodeGroup<'_>> {
    let mut order: Vec<NodeGroup> = Vec::new();
    let mut index: std::collections::HashMap<(&str, &str), usize> =
        std::collections::HashMap::new();
    for rec in log.records() {
        let key = (rec.attempt_id.as_str(), rec.node_id.as_str());
        match index.get(&key) {
            Some(&i) => order[i].records.push(rec),
            None => {
                index.insert(key, order.len());
                order.push(NodeGroup {
                    attempt_id: key.0,
                    node_id: key.1,
                    records: vec![rec],
                });
            }
        }
    }
    order
}

/// Percentage of goals with at least one success among their first `k`
/// attempts. `results` holds one boolean row per goal, in attempt order.
pub fn pass_at_k(results: &[Vec<bool>], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(MetricsError::InvalidInput("k must be >= 1".into()));
    }
    if results.is_empty() {
        return Err(MetricsError::InvalidInput("no goals".into()));
    }
    for (i, row) in results.iter().enumerate() {
        if row.len() < k {
            return Err(MetricsError::InvalidInput(format!(
                "goal {i} has {} attempts, need at least {k}",
                row.len()
            )));
        }
    }
    let passed = results
        .iter()
        .filter(|row| row[..k].iter().any(|&b| b))
        .count();
    Ok(passed as f64 / results.len() as f64 * 100.0)
}

/// Per-node success percentage, summarized across nodes.
pub fn success_rate_per_node(log: &TransitionLog) -> Result<MetricSummary> {
    let groups = node_groups(log);
    if groups.is_empty() {
        return Err(MetricsError::InvalidInput("empty log".into()));
    }
    let rates: Vec<f64> = groups
        .iter()
        .map(|g| {
            let succ = g.records.iter().filter(|r| r.is_success()).count();
            succ as f64 / g.records.len() as f64 * 100.0
        })
        .collect();
    summarize(&rates)
}

fn is_unique_response(
    output: &TacticOutput,
    seen_errors: &mut HashSet<String>,
    seen_subgoals: &mut HashSet<String>,
) -> bool {
    match output {
        TacticOutput::Error(msg) => seen_errors.insert(msg.clone()),
        TacticOutput::Subgoals(subs) => {
            let mut any_new = false;
            for s in subs {
                if seen_subgoals.insert(s.clone()) {
                    any_new = true;
                }
            }
            // No subgoals means nothing new was produced.
            any_new
        }
    }
}

/// Percentage of transitions per node whose response was new at that node:
/// an unseen error message, or a success with at least one unseen subgoal.
pub fn unique_response_rate(log: &TransitionLog) -> Result<MetricSummary> {
    let groups = node_groups(log);
    if groups.is_empty() {
        return Err(MetricsError::InvalidInput("empty log".into()));
    }
    let rates: Vec<f64> = groups
        .iter()
        .map(|g| {
            let mut seen_errors = HashSet::new();
            let mut seen_subgoals = HashSet::new();
            let unique = g
                .records
                .iter()
                .filter(|r| is_unique_response(&r.output, &mut seen_errors, &mut seen_subgoals))
                .count();
            unique as f64 / g.records.len() as f64 * 100.0
        })
        .collect();
    summarize(&rates)
}

/// Percentage of successful transitions per node that produced at least one
/// subgoal unseen at that node. Nodes without any success are excluded;
/// errors count neither way.
pub fn unique_subgoal_rate(log: &TransitionLog) -> Result<MetricSummary> {
    let groups = node_groups(log);
    if groups.is_empty() {
        return Err(MetricsError::InvalidInput("empty log".into()));
    }
    let mut rates = Vec::new();
    for g in &groups {
        let mut seen = HashSet::new();
        let mut successes = 0usize;
        let mut unique = 0usize;
        for rec in &g.records {
            if let TacticOutput::Subgoals(subs) = &rec.output {
                successes += 1;
                let mut any_new = false;
                for s in subs {
                    if seen.insert(s.clone()) {
                        any_new = true;
                    }
                }
                if any_new {
                    unique += 1;
                }
            }
        }
        if successes > 0 {
            rates.push(unique as f64 / successes as f64 * 100.0);
        }
    }
    if rates.is_empty() {
        return Err(MetricsError::InvalidInput(
            "log has no successful transitions".into(),
        ));
    }
    summarize(&rates)
}

/// Mean ± SE of execution time in milliseconds over all transitions.
pub fn execution_time_stats(log: &TransitionLog) -> Result<MetricSummary> {
    if log.is_empty() {
        return Err(MetricsError::InvalidInput("empty log".into()));
    }
    let ms: Vec<f64> = log.records().iter().map(|r| r.time_s * 1000.0).collect();
    summarize(&ms)
}

/// One embedded tactic outcome within a node, for similarity analysis.
#[derive(Debug, Clone)]
pub struct EmbeddedOutcome {
    pub embedding: Vec<f64>,
    /// Whether this tactic succeeded with at least one subgoal unseen at
    /// the node (the unique-subgoal rule).
    pub unique_subgoals: bool,
}

/// Embeddings of the tactics executed at one node.
#[derive(Debug, Clone)]
pub struct NodeEmbeddings {
    pub node_label: String,
    pub members: Vec<EmbeddedOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSimilarity {
    pub node_label: String,
    pub mean_cosine: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub per_node: Vec<NodeSimilarity>,
    /// Mean ± SE of the per-node means; absent when no node qualified.
    pub overall: Option<MetricSummary>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean pairwise cosine similarity of tactic embeddings within each node.
///
/// With `unique_subgoal_filter` set, only members whose tactic produced
/// unique subgoals participate. Nodes with fewer than two participating
/// members are dropped.
pub fn embedding_similarity_summary(
    groups: &[NodeEmbeddings],
    unique_subgoal_filter: bool,
) -> SimilaritySummary {
    let mut per_node = Vec::new();
    for g in groups {
        let members: Vec<&EmbeddedOutcome> = g
            .members
            .iter()
            .filter(|m| !unique_subgoal_filter || m.unique_subgoals)
            .collect();
        if members.len() < 2 {
            continue;
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                total += cosine(&members[i].embedding, &members[j].embedding);
                pairs += 1;
            }
        }
        per_node.push(NodeSimilarity {
            node_label: g.node_label.clone(),
            mean_cosine: total / pairs as f64,
            pairs,
        });
    }
    let means: Vec<f64> = per_node.iter().map(|n| n.mean_cosine).collect();
    let overall = summarize(&means).ok();
    SimilaritySummary { per_node, overall }
}

/// Builds similarity groups from a log by re-embedding each node's executed
/// tactics with `provider` and applying the unique-subgoal rule in order.
pub fn node_embedding_groups(
    log: &TransitionLog,
    provider: &dyn EmbeddingProvider,
) -> crate::embed::Result<Vec<NodeEmbeddings>> {
    let mut out = Vec::new();
    for g in node_groups(log) {
        let goal_id = &g.records[0].goal_id;
        let goal_text = &g.records[0].goal_text;
        let tactics: Vec<String> = g.records.iter().map(|r| r.tactic_text.clone()).collect();
        let recs = provider.embed_batch(goal_id, goal_text, &tactics)?;
        let mut seen = HashSet::new();
        let members = g
            .records
            .iter()
            .zip(recs)
            .map(|(rec, emb)| {
                let unique = match &rec.output {
                    TacticOutput::Subgoals(subs) => {
                        let mut any_new = false;
                        for s in subs {
                            if seen.insert(s.clone()) {
                                any_new = true;
                            }
                        }
                        any_new
                    }
                    TacticOutput::Error(_) => false,
                };
                EmbeddedOutcome {
                    embedding: emb.embedding,
                    unique_subgoals: unique,
                }
            })
            .collect();
        out.push(NodeEmbeddings {
            node_label: format!("{}/{}", g.attempt_id, g.node_id),
            members,
        });
    }
    Ok(out)
}
