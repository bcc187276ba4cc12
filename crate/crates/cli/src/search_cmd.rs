//! `dppsearch search`: seeded proof-search attempts over a goal set, with
//! per-attempt logs and reports plus a pass-rate summary.

use std::path::PathBuf;

use dppsearch::embed::stable_hash64;
use dppsearch::metrics::pass_at_k;
use dppsearch::search::{best_first_search, SearchBudget, SearchParams, Termination, TimeMode};
use dppsearch::transitions::write_log;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    apply_env_overrides, build_pieces, load_config, sanitize_for_filename, FilterFlags, RunConfig,
    RunPieces,
};
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug)]
pub struct SearchArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    filter: FilterFlags,
    /// Attempt timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Attempts per goal.
    #[arg(long)]
    attempts: Option<usize>,
    /// Candidates proposed per expansion (N).
    #[arg(long)]
    n_candidates: Option<usize>,
    /// Where logs, reports, and the summary get written.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Parallel attempt workers.
    #[arg(long)]
    jobs: Option<usize>,
    /// Goal list override (JSONL with goal_id and goal_text).
    #[arg(long)]
    benchmark: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct AttemptSummary {
    attempt_id: String,
    attempt_index: usize,
    proved: bool,
    termination: Termination,
    nodes: usize,
    edges: usize,
    env_time_s: f64,
    log: String,
    report: String,
}

#[derive(Debug, Serialize)]
struct GoalSummary {
    goal_id: String,
    proved: bool,
    attempts: Vec<AttemptSummary>,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    config: RunConfig,
    goals: Vec<GoalSummary>,
    pass_at_1: f64,
    pass_at_attempts: f64,
    proved_goals: usize,
    total_goals: usize,
}

pub fn run(args: SearchArgs) -> CliResult {
    let mut cfg = load_config(&args.config)?;
    args.filter.apply(&mut cfg);
    if let Some(v) = args.timeout {
        cfg.timeout_s = v;
    }
    if let Some(v) = args.attempts {
        cfg.attempts = v;
    }
    if let Some(v) = args.n_candidates {
        cfg.n_candidates = v;
    }
    if let Some(v) = args.benchmark {
        cfg.benchmark = Some(v);
    }
    apply_env_overrides(&mut cfg)?;
    // Flags outrank environment variables.
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = Some(jobs);
    }
    cfg.validate()?;
    let pieces = build_pieces(&cfg)?;
    execute(cfg, pieces)
}

struct TaskOutput {
    summary: AttemptSummary,
    failure: Option<String>,
}

fn execute(cfg: RunConfig, pieces: RunPieces) -> CliResult {
    let logs_dir = cfg.output_dir.join("logs");
    let reports_dir = cfg.output_dir.join("reports");
    for dir in [&logs_dir, &reports_dir] {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    }

    let filter_cfg = cfg.filter_config();
    let tasks: Vec<(usize, usize)> = (0..pieces.goals.len())
        .flat_map(|g| (0..cfg.attempts).map(move |a| (g, a)))
        .collect();

    let run_one = |&(goal_idx, attempt_index): &(usize, usize)| -> TaskOutput {
        let (goal_id, goal_text) = &pieces.goals[goal_idx];
        let attempt_id = format!("{goal_id}-a{attempt_index}");
        let mut params = SearchParams::new(goal_id, &attempt_id);
        params.attempt_index = attempt_index;
        params.n_candidates = cfg.n_candidates;
        params.budget = SearchBudget {
            timeout_s: cfg.timeout_s,
            max_expansions: cfg.max_expansions,
        };
        params.time_mode = TimeMode::Simulated;
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash64(
            cfg.seed,
            &[goal_id, &attempt_index.to_string()],
        ));

        let stem = format!("{}-a{attempt_index}", sanitize_for_filename(goal_id));
        let log_path = logs_dir.join(format!("{stem}.jsonl"));
        let report_path = reports_dir.join(format!("{stem}.json"));

        let mut failure = None;
        let outcome = match best_first_search(
            goal_text,
            pieces.source.as_ref(),
            &filter_cfg,
            pieces.provider.as_ref(),
            pieces.env.as_ref(),
            &params,
            &mut rng,
        ) {
            Ok(outcome) => outcome,
            Err(e) => {
                // Config is validated up front, so reaching this is a bug;
                // surface it as a runtime failure rather than panicking.
                return TaskOutput {
                    failure: Some(format!("attempt {attempt_id}: {e}")),
                    summary: AttemptSummary {
                        attempt_id,
                        attempt_index,
                        proved: false,
                        termination: Termination::Aborted {
                            message: e.to_string(),
                        },
                        nodes: 0,
                        edges: 0,
                        env_time_s: 0.0,
                        log: log_path.display().to_string(),
                        report: report_path.display().to_string(),
                    },
                };
            }
        };

        if let Err(e) = write_log(&log_path, &outcome.log) {
            failure = Some(format!("writing {}: {e}", log_path.display()));
        }
        match serde_json::to_string_pretty(&outcome.report) {
            Ok(json) => {
                if let Err(e) = std::fs::write(&report_path, json + "\n") {
                    failure = Some(format!("writing {}: {e}", report_path.display()));
                }
            }
            Err(e) => failure = Some(format!("serializing report {attempt_id}: {e}")),
        }
        if let Termination::Aborted { message } = &outcome.report.termination {
            failure = Some(format!("attempt {attempt_id} aborted: {message}"));
        }

        TaskOutput {
            summary: AttemptSummary {
                attempt_id,
                attempt_index,
                proved: outcome.report.proved,
                termination: outcome.report.termination.clone(),
                nodes: outcome.report.nodes,
                edges: outcome.report.edges,
                env_time_s: outcome.report.env_time_s,
                log: log_path.display().to_string(),
                report: report_path.display().to_string(),
            },
            failure,
        }
    };

    let jobs = cfg.jobs.unwrap_or(1).max(1);
    let mut outputs: Vec<TaskOutput> = if jobs == 1 {
        tasks.iter().map(run_one).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_one).collect())
    };

    // Tasks are goal-major, so chunking by attempts regroups per goal.
    let mut goals = Vec::new();
    let mut failures = Vec::new();
    for (goal_idx, chunk) in outputs.chunks_mut(cfg.attempts).enumerate() {
        let mut attempts = Vec::new();
        for out in chunk.iter_mut() {
            if let Some(f) = out.failure.take() {
                failures.push(f);
            }
            attempts.push(std::mem::replace(
                &mut out.summary,
                AttemptSummary {
                    attempt_id: String::new(),
                    attempt_index: 0,
                    proved: false,
                    termination: Termination::FrontierEmpty,
                    nodes: 0,
                    edges: 0,
                    env_time_s: 0.0,
                    log: String::new(),
                    report: String::new(),
                },
            ));
        }
        goals.push(GoalSummary {
            goal_id: pieces.goals[goal_idx].0.clone(),
            proved: attempts.iter().any(|a| a.proved),
            attempts,
        });
    }

    let results: Vec<Vec<bool>> = goals
        .iter()
        .map(|g| g.attempts.iter().map(|a| a.proved).collect())
        .collect();
    let pass_1 = pass_at_k(&results, 1).map_err(|e| CliError::runtime(e.to_string()))?;
    let pass_n = pass_at_k(&results, cfg.attempts).map_err(|e| CliError::runtime(e.to_string()))?;

    let summary = RunSummary {
        proved_goals: goals.iter().filter(|g| g.proved).count(),
        total_goals: goals.len(),
        goals,
        pass_at_1: pass_1,
        pass_at_attempts: pass_n,
        config: cfg.clone(),
    };
    let summary_path = cfg.output_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::runtime(format!("serializing summary: {e}")))?;
    std::fs::write(&summary_path, json + "\n")
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", summary_path.display())))?;

    if let Some(first) = failures.into_iter().next() {
        return Err(CliError::runtime(first));
    }
    println!(
        "proved {}/{} goals; pass@1 = {:.1}, pass@{} = {:.1}; summary at {}",
        summary.proved_goals,
        summary.total_goals,
        summary.pass_at_1,
        cfg.attempts,
        summary.pass_at_attempts,
        summary_path.display()
    );
    Ok(())
}
