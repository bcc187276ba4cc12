//! `dppsearch analyze`: merge transition logs and emit the metric report,
//! as JSON plus an aligned text table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use dppsearch::embed::FileProvider;
use dppsearch::metrics::{
    embedding_similarity_summary, execution_time_stats, node_embedding_groups, node_groups,
    pass_at_k, success_rate_per_node, unique_response_rate, unique_subgoal_rate, MetricSummary,
    SimilaritySummary,
};
use dppsearch::transitions::{read_log, ReadMode, TacticOutput, TransitionLog, TransitionRecord};
use serde::Serialize;

use crate::{CliError, CliResult};

#[derive(clap::Args, Debug)]
pub struct AnalyzeArgs {
    /// Transition log to include; repeat for multiple logs.
    #[arg(long = "log")]
    logs: Vec<PathBuf>,
    /// Where the JSON report gets written.
    #[arg(long)]
    report: PathBuf,
    /// Also write the text table here (it always prints to stdout).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Embedding file enabling the similarity summaries.
    #[arg(long, requires = "dim")]
    embeddings: Option<PathBuf>,
    /// Embedding dimension of the embeddings file.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Debug, Serialize)]
struct AttemptOutcome {
    attempt_id: String,
    goal_id: String,
    proved: bool,
}

#[derive(Debug, Serialize)]
struct SimilarityReport {
    all: SimilaritySummary,
    unique_subgoals: SimilaritySummary,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    logs: Vec<String>,
    transitions: usize,
    nodes: usize,
    goals: usize,
    attempts: Vec<AttemptOutcome>,
    pass_at: BTreeMap<usize, f64>,
    success_rate_per_node: MetricSummary,
    unique_response_rate: MetricSummary,
    /// Absent when no node recorded a successful transition.
    unique_subgoal_rate: Option<MetricSummary>,
    execution_time_ms: MetricSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding_similarity: Option<SimilarityReport>,
}

/// Did this attempt's records close their root goal? Rebuilt from the log
/// alone: a goal counts proved once some recorded tactic on it produced
/// only proved subgoals. The root is the attempt's first recorded goal.
fn attempt_proves(records: &[&TransitionRecord]) -> bool {
    let root = records[0].goal_text.as_str();
    let mut proved: HashSet<&str> = HashSet::new();
    let mut changed = true;
    while changed {
        changed = false;
        for r in records {
            if proved.contains(r.goal_text.as_str()) {
                continue;
            }
            if let TacticOutput::Subgoals(subs) = &r.output {
                if subs.iter().all(|s| proved.contains(s.as_str())) {
                    proved.insert(r.goal_text.as_str());
                    changed = true;
                }
            }
        }
    }
    proved.contains(root)
}

pub fn run(args: AnalyzeArgs) -> CliResult {
    if args.logs.is_empty() {
        return Err(CliError::usage("no logs given; pass --log at least once"));
    }

    // Reject the same attempt_id arriving from two different files: pass@k
    // would silently double-count the attempt.
    let mut owner: HashMap<String, &PathBuf> = HashMap::new();
    let mut merged = TransitionLog::new();
    for path in &args.logs {
        let log = read_log(path, ReadMode::Strict).map_err(|e| CliError::usage(e.to_string()))?;
        let mut seen_here: HashSet<&str> = HashSet::new();
        for r in log.records() {
            if seen_here.insert(&r.attempt_id) {
                if let Some(previous) = owner.get(r.attempt_id.as_str()) {
                    return Err(CliError::runtime(format!(
                        "attempt_id {:?} appears in both {} and {}",
                        r.attempt_id,
                        previous.display(),
                        path.display()
                    )));
                }
            }
        }
        for r in log.records() {
            owner.entry(r.attempt_id.clone()).or_insert(path);
            merged.push(r.clone());
        }
    }

    // Attempts grouped in first-appearance order, then goals likewise.
    let mut attempt_order: Vec<&str> = Vec::new();
    let mut attempt_records: HashMap<&str, Vec<&TransitionRecord>> = HashMap::new();
    for r in merged.records() {
        attempt_records
            .entry(r.attempt_id.as_str())
            .or_insert_with(|| {
                attempt_order.push(r.attempt_id.as_str());
                Vec::new()
            })
            .push(r);
    }
    let mut goal_order: Vec<&str> = Vec::new();
    let mut goal_attempts: HashMap<&str, Vec<bool>> = HashMap::new();
    let mut attempts = Vec::new();
    for attempt_id in &attempt_order {
        let records = &attempt_records[attempt_id];
        let goal_id = records[0].goal_id.as_str();
        let proved = attempt_proves(records);
        attempts.push(AttemptOutcome {
            attempt_id: attempt_id.to_string(),
            goal_id: goal_id.to_string(),
            proved,
        });
        goal_attempts
            .entry(goal_id)
            .or_insert_with(|| {
                goal_order.push(goal_id);
                Vec::new()
            })
            .push(proved);
    }
    let results: Vec<Vec<bool>> = goal_order.iter().map(|g| goal_attempts[g].clone()).collect();
    let max_k = results.iter().map(Vec::len).min().unwrap_or(0);
    let mut pass_at = BTreeMap::new();
    for k in 1..=max_k {
        let rate = pass_at_k(&results, k).map_err(|e| CliError::runtime(e.to_string()))?;
        pass_at.insert(k, rate);
    }

    let success = success_rate_per_node(&merged).map_err(|e| CliError::usage(e.to_string()))?;
    let unique = unique_response_rate(&merged).map_err(|e| CliError::usage(e.to_string()))?;
    let unique_sub = unique_subgoal_rate(&merged).ok();
    let time_ms = execution_time_stats(&merged).map_err(|e| CliError::usage(e.to_string()))?;

    let embedding_similarity = match (&args.embeddings, args.dim) {
        (Some(path), Some(dim)) => {
            let provider = FileProvider::load(path, dim)
                .map_err(|e| CliError::usage(format!("embeddings {}: {e}", path.display())))?;
            let groups = node_embedding_groups(&merged, &provider)
                .map_err(|e| CliError::runtime(e.to_string()))?;
            Some(SimilarityReport {
                all: embedding_similarity_summary(&groups, false),
                unique_subgoals: embedding_similarity_summary(&groups, true),
            })
        }
        _ => None,
    };

    let report = AnalyzeReport {
        logs: args.logs.iter().map(|p| p.display().to_string()).collect(),
        transitions: merged.len(),
        nodes: node_groups(&merged).len(),
        goals: goal_order.len(),
        attempts,
        pass_at,
        success_rate_per_node: success,
        unique_response_rate: unique,
        unique_subgoal_rate: unique_sub,
        execution_time_ms: time_ms,
        embedding_similarity,
    };

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(format!("serializing report: {e}")))?;
    std::fs::write(&args.report, json + "\n")
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", args.report.display())))?;

    let table = render_table(&report);
    print!("{table}");
    if let Some(path) = &args.table {
        std::fs::write(path, &table)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn render_table(report: &AnalyzeReport) -> String {
    let mut out = String::new();
    let header = format!(
        "{:<28} {:>12} {:>12} {:>8}\n",
        "metric", "mean", "std_error", "n"
    );
    out.push_str(&header);
    out.push_str(&"-".repeat(header.len() - 1));
    out.push('\n');
    let mut row = |name: &str, s: &MetricSummary| {
        out.push_str(&format!(
            "{:<28} {:>12.3} {:>12.3} {:>8}\n",
            name, s.mean, s.std_error, s.n
        ));
    };
    row("success_rate_per_node", &report.success_rate_per_node);
    row("unique_response_rate", &report.unique_response_rate);
    if let Some(s) = &report.unique_subgoal_rate {
        row("unique_subgoal_rate", s);
    }
    row("execution_time_ms", &report.execution_time_ms);
    if let Some(sim) = &report.embedding_similarity {
        if let Some(s) = &sim.all.overall {
            row("cosine_similarity_all", s);
        }
        if let Some(s) = &sim.unique_subgoals.overall {
            row("cosine_similarity_unique", s);
        }
    }
    for (k, rate) in &report.pass_at {
        out.push_str(&format!(
            "{:<28} {:>12.3} {:>12} {:>8}\n",
            format!("pass@{k}"),
            rate,
            "-",
            report.goals
        ));
    }
    out.push_str(&format!(
        "{:<28} {:>12} {:>12} {:>8}\n",
        "transitions", report.transitions, "", ""
    ));
    out.push_str(&format!(
        "{:<28} {:>12} {:>12} {:>8}\n",
        "nodes", report.nodes, "", ""
    ));
    out
}
