//! A deterministic synthetic proving world with known proofs.
//!
//! The world is a pure function of its seed. Goal texts embed their depth
//! and a 64-bit tag; tactic texts embed a cluster index, a member index and
//! a checksum. The environment parses those back out and recomputes the
//! outcome from hashes, so the environment, tactic source and embedding
//! provider share no state and any pair can be replayed exactly.
//!
//! Structure per goal:
//!
//! * The source proposes `n` tactics grouped into clusters of
//!   `cluster_size` members. Members of one cluster are redundant: they
//!   produce the identical outcome (same error message or same subgoals,
//!   same execution time). Clusters are where diversity lives; a filter
//!   that picks one member per cluster observes strictly more distinct
//!   outcomes than one that burns its budget inside a single cluster.
//! * Whether a cluster succeeds is a rotation rule: cluster `c` succeeds
//!   iff `⌊(c+1)p + φ⌋ > ⌊cp + φ⌋`, with `p = 1 - error_rate` and a
//!   per-goal phase `φ ∈ [0, 1)`. Any window of `m` consecutive clusters
//!   contains `⌊mp+φ⌋ - ⌊φ⌋ ∈ {⌊mp⌋, ⌈mp⌉}` successes: the realized error
//!   rate is exact whenever `mp` is integral, and at least one success
//!   cluster exists whenever `m ≥ 1/p`, so every goal stays provable.
//! * A successful cluster at depth `d > 0` yields `branching` fresh
//!   subgoals at depth `d-1`; at depth 0 it closes the goal.
//!
//! The provider embeds the *outcome signature* of each tactic, not its
//! text: redundant tactics get byte-identical embeddings, distinct outcomes
//! get independent directions. Its predictions are ground truth (success
//! probability 0 or 1, exact execution time).

use serde::{Deserialize, Serialize};

use crate::embed::{hash_stub_embed, stable_hash64, EmbeddingProvider, EmbeddingRecord};
use crate::transitions::TacticOutput;

use super::{EnvError, EnvResponse, Environment, ProposedTactic, SearchError, TacticSource};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_goals: usize,
    /// Subgoals produced by a successful tactic above depth 0.
    pub branching: usize,
    /// Depth of every root goal; proofs need `depth + 1` levels of closes.
    pub depth: usize,
    /// Redundant tactics per cluster.
    pub cluster_size: usize,
    /// Fraction of clusters whose tactics error, in `[0, 1)`.
    pub error_rate: f64,
    pub embed_dim: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_goals: 10,
            branching: 2,
            depth: 2,
            cluster_size: 4,
            error_rate: 0.75,
            embed_dim: 64,
        }
    }
}

/// The shared definition all three synthetic components derive from.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    cfg: SyntheticConfig,
}

impl SyntheticWorld {
    pub fn new(cfg: SyntheticConfig) -> Result<Self, SearchError> {
        if cfg.n_goals == 0 || cfg.branching == 0 || cfg.cluster_size == 0 {
            return Err(SearchError::InvalidInput(
                "n_goals, branching and cluster_size must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&cfg.error_rate) {
            return Err(SearchError::InvalidInput(format!(
                "error_rate must be in [0, 1), got {}",
                cfg.error_rate
            )));
        }
        if cfg.embed_dim < 2 {
            return Err(SearchError::InvalidInput(
                "embed_dim must be >= 2".into(),
            ));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    /// Benchmark list: `(goal_id, goal_text)` pairs.
    pub fn root_goals(&self) -> Vec<(String, String)> {
        (0..self.cfg.n_goals)
            .map(|i| {
                let tag = stable_hash64(self.cfg.seed, &["root", &i.to_string()]);
                (format!("syn{i:03}"), goal_text(self.cfg.depth, tag))
            })
            .collect()
    }

    pub fn environment(&self) -> SyntheticEnvironment {
        SyntheticEnvironment {
            world: self.clone(),
        }
    }

    pub fn tactic_source(&self) -> SyntheticSource {
        SyntheticSource {
            world: self.clone(),
        }
    }

    pub fn provider(&self) -> SyntheticProvider {
        SyntheticProvider {
            world: self.clone(),
        }
    }

    /// Uniform in `[0, 1)` derived from a hash's top 53 bits.
    fn frac(&self, parts: &[&str]) -> f64 {
        (stable_hash64(self.cfg.seed, parts) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn tactic_text(&self, goal_tag: u64, cluster: usize, member: usize) -> String {
        let tag = format!("{goal_tag:016x}");
        let check = stable_hash64(
            self.cfg.seed,
            &["tac", &tag, &cluster.to_string(), &member.to_string()],
        ) as u32;
        format!("tac c{cluster} m{member} #{check:08x}")
    }

    fn cluster_succeeds(&self, goal_tag: u64, cluster: usize) -> bool {
        let p = 1.0 - self.cfg.error_rate;
        let phase = self.frac(&["phase", &format!("{goal_tag:016x}")]);
        let c = cluster as f64;
        ((c + 1.0) * p + phase).floor() > (c * p + phase).floor()
    }

    fn cluster_time(&self, goal_tag: u64, cluster: usize) -> f64 {
        0.05 + 0.5
            * self.frac(&[
                "time",
                &format!("{goal_tag:016x}"),
                &cluster.to_string(),
            ])
    }

    fn cluster_error(&self, goal_tag: u64, cluster: usize) -> String {
        let h = stable_hash64(
            self.cfg.seed,
            &["err", &format!("{goal_tag:016x}"), &cluster.to_string()],
        ) as u32;
        format!("tactic failed: mismatch at term #{h:08x}")
    }

    fn child_goals(&self, goal_tag: u64, depth: usize, cluster: usize) -> Vec<String> {
        (0..self.cfg.branching)
            .map(|b| {
                let tag = stable_hash64(
                    self.cfg.seed,
                    &[
                        "child",
                        &format!("{goal_tag:016x}"),
                        &cluster.to_string(),
                        &b.to_string(),
                    ],
                );
                goal_text(depth - 1, tag)
            })
            .collect()
    }

    /// Outcome of applying `tactic_text` to `goal_text`. Total: texts the
    /// world never issued come back as error outcomes.
    pub fn outcome(&self, goal: &str, tactic: &str) -> (TacticOutput, f64) {
        let Some((depth, tag)) = parse_goal(goal) else {
            return (TacticOutput::Error("goal not recognized".into()), 0.05);
        };
        let Some((cluster, member)) = parse_tactic(tactic) else {
            return (TacticOutput::Error("tactic not recognized".into()), 0.05);
        };
        if self.tactic_text(tag, cluster, member) != tactic {
            // Right shape, wrong checksum: a tactic from some other goal's
            // beam. It does not apply here.
            return (
                TacticOutput::Error("tactic does not apply to this goal".into()),
                0.05,
            );
        }
        let time = self.cluster_time(tag, cluster);
        if self.cluster_succeeds(tag, cluster) {
            let subgoals = if depth == 0 {
                Vec::new()
            } else {
                self.child_goals(tag, depth, cluster)
            };
            (TacticOutput::Subgoals(subgoals), time)
        } else {
            (TacticOutput::Error(self.cluster_error(tag, cluster)), time)
        }
    }
}

fn goal_text(depth: usize, tag: u64) -> String {
    format!("goal d{depth} #{tag:016x}")
}

fn parse_goal(text: &str) -> Option<(usize, u64)> {
    let rest = text.strip_prefix("goal d")?;
    let (depth, tag) = rest.split_once(" #")?;
    Some((depth.parse().ok()?, u64::from_str_radix(tag, 16).ok()?))
}

fn parse_tactic(text: &str) -> Option<(usize, usize)> {
    let rest = text.strip_prefix("tac c")?;
    let (cluster, rest) = rest.split_once(" m")?;
    let (member, _check) = rest.split_once(" #")?;
    Some((cluster.parse().ok()?, member.parse().ok()?))
}

/// Builds the environment and tactic source of a synthetic world, with the
/// default embedding dimension.
pub fn synthetic_world(
    seed: u64,
    n_goals: usize,
    branching: usize,
    depth: usize,
    cluster_size: usize,
    error_rate: f64,
) -> Result<(SyntheticEnvironment, SyntheticSource), SearchError> {
    let world = SyntheticWorld::new(SyntheticConfig {
        seed,
        n_goals,
        branching,
        depth,
        cluster_size,
        error_rate,
        ..SyntheticConfig::default()
    })?;
    Ok((world.environment(), world.tactic_source()))
}

pub struct SyntheticEnvironment {
    world: SyntheticWorld,
}

impl Environment for SyntheticEnvironment {
    fn apply(
        &self,
        goal_text: &str,
        tactic_text: &str,
    ) -> std::result::Result<EnvResponse, EnvError> {
        let (output, time_s) = self.world.outcome(goal_text, tactic_text);
        Ok(EnvResponse { time_s, output })
    }
}

pub struct SyntheticSource {
    world: SyntheticWorld,
}

impl TacticSource for SyntheticSource {
    /// Proposes `n` tactics spanning `⌈n / cluster_size⌉` clusters. Cluster
    /// base logits spread over `[-6, 0]`; members jitter within `0.1` below
    /// their base, so the beam's ordering is dominated by clusters.
    fn propose(&self, goal_text: &str, n: usize) -> Vec<ProposedTactic> {
        let Some((_, tag)) = parse_goal(goal_text) else {
            return Vec::new();
        };
        let size = self.world.cfg.cluster_size;
        let clusters = n.div_ceil(size);
        let hex = format!("{tag:016x}");
        let mut out = Vec::with_capacity(clusters * size);
        for c in 0..clusters {
            let base = -6.0 * self.world.frac(&["base", &hex, &c.to_string()]);
            for m in 0..size {
                let jitter = -0.1
                    * self
                        .world
                        .frac(&["jit", &hex, &c.to_string(), &m.to_string()]);
                out.push(ProposedTactic {
                    text: self.world.tactic_text(tag, c, m),
                    logit: base + jitter,
                });
            }
        }
        out.sort_by(|a, b| b.logit.total_cmp(&a.logit).then(a.text.cmp(&b.text)));
        out.truncate(n);
        out
    }
}

/// Ground-truth provider: embeddings keyed on the outcome signature, exact
/// success and time predictions.
pub struct SyntheticProvider {
    world: SyntheticWorld,
}

impl EmbeddingProvider for SyntheticProvider {
    fn dim(&self) -> usize {
        self.world.cfg.embed_dim
    }

    fn embed_batch(
        &self,
        goal_id: &str,
        goal_text: &str,
        tactics: &[String],
    ) -> crate::embed::Result<Vec<EmbeddingRecord>> {
        Ok(tactics
            .iter()
            .map(|tactic| {
                let (output, time) = self.world.outcome(goal_text, tactic);
                let signature = match &output {
                    TacticOutput::Error(msg) => format!("err:{msg}"),
                    TacticOutput::Subgoals(subs) => format!("sub:{}", subs.join("\u{1f}")),
                };
                let mut rec = hash_stub_embed(
                    goal_text,
                    &signature,
                    self.world.cfg.embed_dim,
                    self.world.cfg.seed,
                );
                rec.goal_id = goal_id.to_string();
                rec.tactic_text = tactic.clone();
                rec.pred_success = if output.is_success() { 1.0 } else { 0.0 };
                rec.pred_time = time;
                rec
            })
            .collect())
    }
}
