//! Run configuration: a TOML file plus CLI flag and environment overrides.

use std::path::{Path, PathBuf};

use dppsearch::embed::{EmbeddingProvider, ProviderConfig};
use dppsearch::filter::{FilterConfig, FilterStrategy};
use dppsearch::search::synthetic::{SyntheticConfig, SyntheticWorld};
use dppsearch::search::{Environment, LogTacticSource, ReplayEnvironment, TacticSource};
use dppsearch::transitions::{read_log, ReadMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENV_OUTPUT_DIR: &str = "DPPSEARCH_OUTPUT_DIR";
pub const ENV_JOBS: &str = "DPPSEARCH_JOBS";

/// Where tactics get executed: a recorded log or the synthetic world.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Replay { log: PathBuf },
    Synthetic(SyntheticConfig),
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Goal list (JSONL with goal_id and goal_text). Optional for the
    /// synthetic environment, which brings its own goals.
    pub benchmark: Option<PathBuf>,
    pub strategy: FilterStrategy,
    pub k: usize,
    pub lambda_s: f64,
    pub lambda_tau: f64,
    pub theta: f64,
    pub n_candidates: usize,
    pub attempts: usize,
    pub seed: u64,
    pub timeout_s: f64,
    /// Optional cap on node expansions per attempt.
    pub max_expansions: Option<usize>,
    pub output_dir: PathBuf,
    pub jobs: Option<usize>,
    /// Embedding provider; defaults to the environment's own ground-truth
    /// provider for synthetic runs and to the hash stub otherwise.
    pub provider: Option<ProviderConfig>,
    pub environment: EnvironmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: None,
            strategy: FilterStrategy::Dpp,
            k: 8,
            lambda_s: 0.0,
            lambda_tau: 0.0,
            theta: 1.0,
            n_candidates: 64,
            attempts: 1,
            seed: 0,
            timeout_s: 600.0,
            max_expansions: None,
            output_dir: PathBuf::from("out"),
            jobs: None,
            provider: None,
            environment: EnvironmentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            k: self.k,
            lambda_s: self.lambda_s,
            lambda_tau: self.lambda_tau,
            theta: self.theta,
            strategy: self.strategy,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.filter_config()
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if self.attempts == 0 {
            return Err(CliError::usage("attempts must be >= 1"));
        }
        if self.n_candidates == 0 {
            return Err(CliError::usage("n_candidates must be >= 1"));
        }
        if !(self.timeout_s > 0.0) {
            return Err(CliError::usage(format!(
                "timeout must be > 0 seconds, got {}",
                self.timeout_s
            )));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

pub fn parse_strategy(s: &str) -> Result<FilterStrategy, String> {
    match s {
        "dpp" => Ok(FilterStrategy::Dpp),
        "top_k" | "topk" => Ok(FilterStrategy::TopK),
        "random" => Ok(FilterStrategy::Random),
        other => Err(format!(
            "unknown strategy {other:?}; expected dpp, top_k, or random"
        )),
    }
}

/// Filter-parameter flags shared by `search` and `filter`, mirroring the
/// config field names.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct FilterFlags {
    /// Tactics kept per expansion (K).
    #[arg(long)]
    pub k: Option<usize>,
    /// Weight on predicted success.
    #[arg(long)]
    pub lambda_s: Option<f64>,
    /// Weight on normalized time preference.
    #[arg(long)]
    pub lambda_tau: Option<f64>,
    /// Softmax temperature.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Selection strategy: dpp, top_k, or random.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<FilterStrategy>,
    /// Base seed for all randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl FilterFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(v) = self.lambda_s {
            cfg.lambda_s = v;
        }
        if let Some(v) = self.lambda_tau {
            cfg.lambda_tau = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

/// Environment overrides: output directory and job count only.
pub fn apply_env_overrides(cfg: &mut RunConfig) -> Result<(), CliError> {
    if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
        if !dir.is_empty() {
            cfg.output_dir = PathBuf::from(dir);
        }
    }
    if let Ok(jobs) = std::env::var(ENV_JOBS) {
        if !jobs.is_empty() {
            let parsed: usize = jobs
                .parse()
                .map_err(|_| CliError::usage(format!("{ENV_JOBS} must be an integer: {jobs:?}")))?;
            cfg.jobs = Some(parsed);
        }
    }
    Ok(())
}

/// One benchmark goal as stored in a goals file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkGoal {
    pub goal_id: String,
    pub goal_text: String,
}

pub fn read_benchmark(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("benchmark {}: {e}", path.display())))?;
    let mut goals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let goal: BenchmarkGoal = serde_json::from_str(line).map_err(|e| {
            CliError::usage(format!("benchmark {}:{}: {e}", path.display(), i + 1))
        })?;
        goals.push((goal.goal_id, goal.goal_text));
    }
    if goals.is_empty() {
        return Err(CliError::usage(format!(
            "benchmark {} lists no goals",
            path.display()
        )));
    }
    Ok(goals)
}

/// Everything `cmd_search` needs, materialized from the config.
pub struct RunPieces {
    pub goals: Vec<(String, String)>,
    pub source: Box<dyn TacticSource>,
    pub env: Box<dyn Environment>,
    pub provider: Box<dyn EmbeddingProvider>,
}

pub fn build_pieces(cfg: &RunConfig) -> Result<RunPieces, CliError> {
    match &cfg.environment {
        EnvironmentConfig::Synthetic(syn) => {
            let world = SyntheticWorld::new(syn.clone())
                .map_err(|e| CliError::usage(format!("synthetic environment: {e}")))?;
            let goals = match &cfg.benchmark {
                Some(path) => read_benchmark(path)?,
                None => world.root_goals(),
            };
            let provider: Box<dyn EmbeddingProvider> = match &cfg.provider {
                Some(p) => p
                    .build()
                    .map_err(|e| CliError::usage(format!("provider: {e}")))?,
                None => Box::new(world.provider()),
            };
            Ok(RunPieces {
                goals,
                source: Box::new(world.tactic_source()),
                env: Box::new(world.environment()),
                provider,
            })
        }
        EnvironmentConfig::Replay { log } => {
            let recorded = read_log(log, ReadMode::Strict)
                .map_err(|e| CliError::usage(format!("replay log: {e}")))?;
            let benchmark = cfg.benchmark.as_ref().ok_or_else(|| {
                CliError::usage("replay environment requires a benchmark goal list")
            })?;
            let goals = read_benchmark(benchmark)?;
            let provider: Box<dyn EmbeddingProvider> = cfg
                .provider
                .clone()
                .unwrap_or_default()
                .build()
                .map_err(|e| CliError::usage(format!("provider: {e}")))?;
            Ok(RunPieces {
                goals,
                source: Box::new(LogTacticSource::new(&recorded)),
                env: Box::new(ReplayEnvironment::new(recorded)),
                provider,
            })
        }
    }
}

/// Replaces path-hostile characters so goal ids can name artifact files.
pub fn sanitize_for_filename(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}
