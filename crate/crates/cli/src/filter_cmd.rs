//! `dppsearch filter`: prune a candidate-tactic file to K per goal,
//! annotating each kept line with its selection metadata.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use dppsearch::embed::{stable_hash64, EmbeddingProvider};
use dppsearch::filter::{filter_tactics, score_pool, CandidateRecord, FilterStrategy, ScoredTactic};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{load_config, FilterFlags, RunConfig};
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug)]
pub struct FilterArgs {
    /// Candidate file (JSONL, one record per candidate).
    #[arg(long)]
    candidates: PathBuf,
    /// Where the selected subset gets written.
    #[arg(long)]
    output: PathBuf,
    /// Optional run configuration supplying defaults and the provider.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterFlags,
}

/// One selected candidate with the scores that earned its spot.
#[derive(Debug, Serialize)]
struct SelectionRecord<'a> {
    goal_id: &'a str,
    text: &'a str,
    logit: f64,
    quality: f64,
    softmax: f64,
    time_pref: f64,
    pred_success: f64,
    pred_time: f64,
    strategy: FilterStrategy,
    seed: u64,
    k: usize,
}

fn read_candidates(path: &Path) -> Result<Vec<CandidateRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("candidates {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CandidateRecord = serde_json::from_str(line).map_err(|e| {
            CliError::usage(format!("candidates {}:{}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(CliError::usage(format!(
            "candidates {} holds no records",
            path.display()
        )));
    }
    Ok(records)
}

/// Completes records that lack embeddings or predictions via the provider,
/// batched per goal.
fn complete_goal(
    goal_id: &str,
    records: &[CandidateRecord],
    provider: &mut Option<Box<dyn EmbeddingProvider>>,
    cfg: &RunConfig,
) -> Result<Vec<ScoredTactic>, CliError> {
    let needs_provider = records
        .iter()
        .any(|r| r.embedding.is_none() || r.pred_success.is_none() || r.pred_time.is_none());
    let fetched = if needs_provider {
        if provider.is_none() {
            *provider = Some(
                cfg.provider
                    .clone()
                    .unwrap_or_default()
                    .build()
                    .map_err(|e| CliError::usage(format!("provider: {e}")))?,
            );
        }
        let goal_text = records
            .iter()
            .find_map(|r| r.goal_text.as_deref())
            .unwrap_or(goal_id);
        let tactics: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
        Some(
            provider
                .as_ref()
                .unwrap()
                .embed_batch(goal_id, goal_text, &tactics)
                .map_err(|e| CliError::runtime(format!("embedding goal {goal_id}: {e}")))?,
        )
    } else {
        None
    };
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let fill = fetched.as_ref().map(|f| &f[i]);
            ScoredTactic {
                text: r.text.clone(),
                logit: r.logit,
                embedding: r
                    .embedding
                    .clone()
                    .unwrap_or_else(|| fill.unwrap().embedding.clone()),
                pred_success: r.pred_success.unwrap_or_else(|| fill.unwrap().pred_success),
                pred_time: r.pred_time.unwrap_or_else(|| fill.unwrap().pred_time),
            }
        })
        .collect())
}

pub fn run(args: FilterArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    args.filter.apply(&mut cfg);
    cfg.filter_config()
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let filter_cfg = cfg.filter_config();

    let records = read_candidates(&args.candidates)?;

    // Group per goal, keeping goal order and record order stable.
    let mut goal_order: Vec<&str> = Vec::new();
    let mut by_goal: HashMap<&str, Vec<&CandidateRecord>> = HashMap::new();
    for r in &records {
        by_goal
            .entry(r.goal_id.as_str())
            .or_insert_with(|| {
                goal_order.push(r.goal_id.as_str());
                Vec::new()
            })
            .push(r);
    }

    let mut provider: Option<Box<dyn EmbeddingProvider>> = None;
    let mut lines = Vec::new();
    for goal_id in goal_order {
        let goal_records: Vec<CandidateRecord> =
            by_goal[goal_id].iter().map(|&r| r.clone()).collect();
        let scored = complete_goal(goal_id, &goal_records, &mut provider, &cfg)?;
        let pool = score_pool(&scored, &filter_cfg)
            .map_err(|e| CliError::usage(format!("goal {goal_id}: {e}")))?;
        let scores: HashMap<&str, (f64, f64, f64)> = pool
            .tactics
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    t.text.as_str(),
                    (pool.quality[i], pool.softmax[i], pool.time_pref[i]),
                )
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash64(cfg.seed, &[goal_id]));
        let selected = filter_tactics(goal_id, &scored, &filter_cfg, &mut rng)
            .map_err(|e| CliError::usage(format!("goal {goal_id}: {e}")))?;
        for t in &selected {
            let (quality, softmax, time_pref) = scores[t.text.as_str()];
            let line = SelectionRecord {
                goal_id,
                text: &t.text,
                logit: t.logit,
                quality,
                softmax,
                time_pref,
                pred_success: t.pred_success,
                pred_time: t.pred_time,
                strategy: filter_cfg.strategy,
                seed: cfg.seed,
                k: filter_cfg.k,
            };
            lines.push(serde_json::to_string(&line).map_err(|e| {
                CliError::runtime(format!("serializing selection for {goal_id}: {e}"))
            })?);
        }
    }

    let body = lines.join("\n") + "\n";
    std::fs::write(&args.output, body)
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", args.output.display())))?;
    println!("kept {} candidates at {}", lines.len(), args.output.display());
    Ok(())
}
