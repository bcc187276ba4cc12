//! Best-first proof search over filtered tactic candidates.
//!
//! The loop is plain best-first search: keep a frontier of open goals
//! ordered by cumulative log-probability of the path that reached them
//! (ties broken by insertion order), pop the best one, ask the tactic
//! source for `n_candidates` candidates, embed and filter them down to k,
//! and execute the survivors in the environment. Successes extend the
//! proof tree; the attempt ends when the root is proved, the budget is
//! spent, or the frontier empties.
//!
//! The pieces the loop talks to are all traits: [`TacticSource`] proposes
//! candidates, [`crate::embed::EmbeddingProvider`] scores them, and
//! [`Environment`] executes them. Failures inside a provider or
//! environment do not lose work: the attempt terminates as
//! [`Termination::Aborted`] with everything recorded so far intact.

pub mod replay;
pub mod synthetic;
pub mod tree;

use std::collections::BinaryHeap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingProvider;
use crate::filter::{filter_tactics, FilterConfig, ScoredTactic};
use crate::transitions::{TacticOutput, TransitionLog, TransitionRecord};

pub use replay::ReplayEnvironment;
pub use synthetic::{synthetic_world, SyntheticConfig, SyntheticWorld};
pub use tree::{verify_witness, NodeId, NodeStatus, ProofTree};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, SearchError>;

/// A candidate tactic as proposed by a generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposedTactic {
    pub text: String,
    pub logit: f64,
}

/// Proposes up to `n` candidate tactics for a goal, best first.
pub trait TacticSource: Send + Sync {
    fn propose(&self, goal_text: &str, n: usize) -> Vec<ProposedTactic>;
}

/// Fixed proposals per goal text; mainly for tests and hand-built runs.
#[derive(Debug, Default, Clone)]
pub struct StaticTacticSource {
    by_goal: std::collections::HashMap<String, Vec<ProposedTactic>>,
}

impl StaticTacticSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, goal_text: &str, tactics: Vec<ProposedTactic>) {
        self.by_goal.insert(goal_text.to_string(), tactics);
    }
}

impl TacticSource for StaticTacticSource {
    fn propose(&self, goal_text: &str, n: usize) -> Vec<ProposedTactic> {
        self.by_goal
            .get(goal_text)
            .map(|v| v.iter().take(n).cloned().collect())
            .unwrap_or_default()
    }
}

/// Proposes the tactics a replay log recorded for each goal, in first-seen
/// order. Logs do not store generator logits, so rank `r` gets the
/// surrogate logit `-ln(r + 1)`: descending, finite, and consistent across
/// goals.
#[derive(Debug, Clone)]
pub struct LogTacticSource {
    by_goal: std::collections::HashMap<String, Vec<String>>,
}

impl LogTacticSource {
    pub fn new(log: &TransitionLog) -> Self {
        let mut by_goal: std::collections::HashMap<String, Vec<String>> =
            std::collections::HashMap::new();
        for rec in log.records() {
            let tactics = by_goal.entry(rec.goal_text.clone()).or_default();
            if !tactics.contains(&rec.tactic_text) {
                tactics.push(rec.tactic_text.clone());
            }
        }
        Self { by_goal }
    }
}

impl TacticSource for LogTacticSource {
    fn propose(&self, goal_text: &str, n: usize) -> Vec<ProposedTactic> {
        self.by_goal
            .get(goal_text)
            .map(|v| {
                v.iter()
                    .take(n)
                    .enumerate()
                    .map(|(r, t)| ProposedTactic {
                        text: t.clone(),
                        logit: -((r + 1) as f64).ln(),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// What one tactic execution produced, with its cost in seconds.
#[derive(Debug, Clone)]
pub struct EnvResponse {
    pub time_s: f64,
    pub output: TacticOutput,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment transport failure: {0}")]
    Transport(String),
}

/// Executes tactics against goals. A tactic that fails to apply is a normal
/// [`TacticOutput::Error`] response; `Err` is reserved for transport-level
/// breakage that invalidates the attempt.
pub trait Environment: Send + Sync {
    fn apply(&self, goal_text: &str, tactic_text: &str)
        -> std::result::Result<EnvResponse, EnvError>;
}

/// How elapsed time is measured against the timeout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Sum of environment-reported execution times. Deterministic; the
    /// default.
    Simulated,
    /// Wall clock since the attempt started.
    Live,
}

/// Limits on one attempt. The timeout may be infinite only when an
/// expansion cap is set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchBudget {
    pub timeout_s: f64,
    pub max_expansions: Option<usize>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            timeout_s: 600.0,
            max_expansions: None,
        }
    }
}

impl SearchBudget {
    pub fn validate(&self) -> Result<()> {
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(SearchError::InvalidInput(format!(
                "timeout must be > 0 seconds, got {}",
                self.timeout_s
            )));
        }
        if self.timeout_s.is_infinite() && self.max_expansions.is_none() {
            return Err(SearchError::InvalidInput(
                "unbounded budget: set a finite timeout or an expansion cap".into(),
            ));
        }
        Ok(())
    }
}

/// Per-attempt identifiers and knobs for [`best_first_search`].
#[derive(Debug, Clone)]
pub struct SearchParams {
    pub goal_id: String,
    pub attempt_id: String,
    pub attempt_index: usize,
    /// Candidates requested from the tactic source per expansion.
    pub n_candidates: usize,
    pub budget: SearchBudget,
    pub time_mode: TimeMode,
}

impl SearchParams {
    pub fn new(goal_id: &str, attempt_id: &str) -> Self {
        Self {
            goal_id: goal_id.to_string(),
            attempt_id: attempt_id.to_string(),
            attempt_index: 0,
            n_candidates: 64,
            budget: SearchBudget::default(),
            time_mode: TimeMode::Simulated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(SearchError::InvalidInput(
                "n_candidates must be >= 1".into(),
            ));
        }
        self.budget.validate()
    }
}

/// Why an attempt stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Proved,
    BudgetExhausted,
    FrontierEmpty,
    Aborted { message: String },
}

/// One executed tactic within an expansion, with its predictions and its
/// actual outcome side by side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutedTactic {
    pub tactic_text: String,
    pub logit: f64,
    pub pred_success: f64,
    pub pred_time: f64,
    pub status: u8,
    pub time_s: f64,
}

/// One node expansion: which goal was popped and what ran there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionRecord {
    /// Expansion identifier, unique within the attempt ("n0", "n1", ...).
    pub node_id: String,
    pub goal_id: String,
    pub goal_text: String,
    pub cum_logprob: f64,
    /// Candidates proposed before dedup and filtering.
    pub proposed: usize,
    pub executed: Vec<ExecutedTactic>,
}

/// Everything observable about one attempt, in execution order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttemptReport {
    pub goal_id: String,
    pub attempt_id: String,
    pub attempt_index: usize,
    pub proved: bool,
    pub termination: Termination,
    pub expansions: Vec<ExpansionRecord>,
    pub nodes: usize,
    pub edges: usize,
    /// Total environment-reported execution time, in seconds.
    pub env_time_s: f64,
    /// Result of the independent witness check; only computed for proved
    /// attempts.
    pub witness_verified: Option<bool>,
}

/// The proof tree, the report, and the transition log of one attempt.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub tree: ProofTree,
    pub report: AttemptReport,
    pub log: TransitionLog,
}

#[derive(Debug, Clone, Copy)]
struct FrontierEntry {
    cum: f64,
    seq: usize,
    node: NodeId,
}

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for FrontierEntry {}

impl Ord for FrontierEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Highest cumulative log-probability first; ties by earliest
        // insertion. Logits are validated finite, so total_cmp is total
        // order on real values here.
        self.cum
            .total_cmp(&other.cum)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs one proof attempt on `root_goal_text`.
///
/// Each iteration pops the open node with the best cumulative
/// log-probability, proposes candidates, filters them to at most
/// `filter_cfg.k`, and executes every survivor, stopping early only when
/// the root proves or the budget runs out mid-expansion. Provider or
/// environment failures abort the attempt but return the partial tree, log
/// and report; only invalid configuration is a hard error.
pub fn best_first_search<R: Rng + ?Sized>(
    root_goal_text: &str,
    source: &dyn TacticSource,
    filter_cfg: &FilterConfig,
    provider: &dyn EmbeddingProvider,
    env: &dyn Environment,
    params: &SearchParams,
    rng: &mut R,
) -> Result<SearchOutcome> {
    params.validate()?;
    filter_cfg
        .validate()
        .map_err(|e| SearchError::InvalidInput(e.to_string()))?;

    let mut tree = ProofTree::new(&params.goal_id, root_goal_text);
    let mut log = TransitionLog::new();
    let mut frontier = BinaryHeap::new();
    let mut entry_seq = 0usize;
    frontier.push(FrontierEntry {
        cum: 0.0,
        seq: 0,
        node: tree.root(),
    });
    entry_seq += 1;

    let started = Instant::now();
    let mut env_time = 0.0f64;
    let mut expansions: Vec<ExpansionRecord> = Vec::new();
    let elapsed = |env_time: f64, started: &Instant| match params.time_mode {
        TimeMode::Simulated => env_time,
        TimeMode::Live => started.elapsed().as_secs_f64(),
    };

    let termination = loop {
        if tree.is_proved(tree.root()) {
            break Termination::Proved;
        }
        if elapsed(env_time, &started) >= params.budget.timeout_s {
            break Termination::BudgetExhausted;
        }
        if let Some(max) = params.budget.max_expansions {
            if expansions.len() >= max {
                break Termination::BudgetExhausted;
            }
        }
        let Some(entry) = frontier.pop() else {
            break Termination::FrontierEmpty;
        };
        let node = entry.node;
        if tree.status(node) != NodeStatus::Open {
            continue;
        }
        if entry.cum < tree.node(node).cum_logprob {
            // Stale priority: a better path re-queued this node already.
            continue;
        }

        let node_tag = format!("n{}", expansions.len());
        let goal_text = tree.node(node).goal_text.clone();
        let node_goal_id = tree.node(node).goal_id.clone();
        let cum_logprob = tree.node(node).cum_logprob;

        let proposals = source.propose(&goal_text, params.n_candidates);
        if proposals.is_empty() {
            tree.finalize_expansion(node);
            expansions.push(ExpansionRecord {
                node_id: node_tag,
                goal_id: node_goal_id,
                goal_text,
                cum_logprob,
                proposed: 0,
                executed: Vec::new(),
            });
            continue;
        }

        let texts: Vec<String> = proposals.iter().map(|p| p.text.clone()).collect();
        let records = match provider.embed_batch(&node_goal_id, &goal_text, &texts) {
            Ok(r) if r.len() == texts.len() => r,
            Ok(r) => {
                break Termination::Aborted {
                    message: format!(
                        "embedding provider returned {} records for {} tactics",
                        r.len(),
                        texts.len()
                    ),
                };
            }
            Err(e) => {
                break Termination::Aborted {
                    message: format!("embedding provider: {e}"),
                };
            }
        };
        let candidates: Vec<ScoredTactic> = proposals
            .iter()
            .zip(records)
            .map(|(p, r)| ScoredTactic {
                text: p.text.clone(),
                logit: p.logit,
                embedding: r.embedding,
                pred_success: r.pred_success,
                pred_time: r.pred_time,
            })
            .collect();
        let selected = match filter_tactics(&goal_text, &candidates, filter_cfg, rng) {
            Ok(s) => s,
            Err(e) => {
                break Termination::Aborted {
                    message: format!("tactic filter: {e}"),
                };
            }
        };

        let mut executed = Vec::new();
        let mut stop: Option<Termination> = None;
        for tactic in &selected {
            if elapsed(env_time, &started) >= params.budget.timeout_s {
                stop = Some(Termination::BudgetExhausted);
                break;
            }
            let resp = match env.apply(&goal_text, &tactic.text) {
                Ok(r) => r,
                Err(e) => {
                    stop = Some(Termination::Aborted {
                        message: format!("environment: {e}"),
                    });
                    break;
                }
            };
            env_time += resp.time_s;
            log.push(TransitionRecord {
                goal_id: node_goal_id.clone(),
                goal_text: goal_text.clone(),
                tactic_text: tactic.text.clone(),
                time_s: resp.time_s,
                output: resp.output.clone(),
                node_id: node_tag.clone(),
                attempt_id: params.attempt_id.clone(),
            });
            executed.push(ExecutedTactic {
                tactic_text: tactic.text.clone(),
                logit: tactic.logit,
                pred_success: tactic.pred_success,
                pred_time: tactic.pred_time,
                status: resp.output.status(),
                time_s: resp.time_s,
            });
            match resp.output {
                TacticOutput::Error(message) => {
                    tree.add_error_edge(node, &tactic.text, tactic.logit, resp.time_s, &message);
                }
                TacticOutput::Subgoals(subgoals) => {
                    let (_, updates) =
                        tree.add_success_edge(node, &tactic.text, tactic.logit, resp.time_s, &subgoals);
                    for u in updates {
                        if tree.status(u.node) == NodeStatus::Open {
                            frontier.push(FrontierEntry {
                                cum: tree.node(u.node).cum_logprob,
                                seq: entry_seq,
                                node: u.node,
                            });
                            entry_seq += 1;
                        }
                    }
                }
            }
            if tree.is_proved(tree.root()) {
                break;
            }
        }
        tree.finalize_expansion(node);
        expansions.push(ExpansionRecord {
            node_id: node_tag,
            goal_id: node_goal_id,
            goal_text,
            cum_logprob,
            proposed: texts.len(),
            executed,
        });
        if let Some(t) = stop {
            break t;
        }
    };

    let proved = tree.is_proved(tree.root());
    let witness_verified = proved.then(|| verify_witness(&tree));
    let report = AttemptReport {
        goal_id: params.goal_id.clone(),
        attempt_id: params.attempt_id.clone(),
        attempt_index: params.attempt_index,
        proved,
        termination,
        expansions,
        nodes: tree.node_count(),
        edges: tree.edge_count(),
        env_time_s: env_time,
        witness_verified,
    };
    Ok(SearchOutcome { tree, report, log })
}
