//! End-to-end checks of the dppsearch binary: exit codes, error wording,
//! determinism of artifacts, and override precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dppsearch"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim_end().to_string()
}

fn assert_usage_error(out: &Output) {
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_line(out));
    let err = stderr_line(out);
    assert!(err.starts_with("error: "), "got {err:?}");
    assert_eq!(err.lines().count(), 1, "want one line, got {err:?}");
}

fn synthetic_config(path: &Path, out_dir: &Path) -> PathBuf {
    write(
        path,
        &format!(
            r#"
k = 4
n_candidates = 16
attempts = 2
seed = 7
output_dir = "{}"

[environment]
kind = "synthetic"
seed = 11
n_goals = 2
depth = 1
error_rate = 0.5
embed_dim = 8
"#,
            out_dir.display()
        ),
    );
    path.to_path_buf()
}

fn read_dir_sorted(dir: &Path) -> Vec<PathBuf> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
}

fn assert_identical_trees(a: &Path, b: &Path) {
    let left = read_dir_sorted(a);
    let right = read_dir_sorted(b);
    assert_eq!(left.len(), right.len());
    for (la, rb) in left.iter().zip(&right) {
        assert_eq!(la.file_name(), rb.file_name());
        assert_eq!(
            std::fs::read(la).unwrap(),
            std::fs::read(rb).unwrap(),
            "files differ: {}",
            la.display()
        );
    }
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("broken.toml");
    write(&cfg, "k = \"eight\"\n");
    let out = bin().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert_usage_error(&out);
}

#[test]
fn invalid_filter_values_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = synthetic_config(&tmp.path().join("run.toml"), &tmp.path().join("out"));
    for args in [["--k", "0"], ["--theta", "0"], ["--lambda-s", "-1"]] {
        let out = bin()
            .args(["search", "--config"])
            .arg(&cfg)
            .args(args)
            .output()
            .unwrap();
        assert_usage_error(&out);
    }
}

#[test]
fn replay_requires_a_benchmark() {
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("log.jsonl");
    write(
        &log,
        r#"{"goal_id":"g","goal_text":"G","tactic_text":"t","status":1,"time_s":0.1,"output":{"subgoals":[]},"node_id":"n0","attempt_id":"a0"}
"#,
    );
    let cfg = tmp.path().join("replay.toml");
    write(
        &cfg,
        &format!(
            "[environment]\nkind = \"replay\"\nlog = \"{}\"\n",
            log.display()
        ),
    );
    let out = bin().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert_usage_error(&out);
    assert!(stderr_line(&out).contains("benchmark"));
}

#[test]
fn search_runs_are_byte_identical_for_a_fixed_seed() {
    let tmp = TempDir::new().unwrap();
    for sub in ["a", "b"] {
        let out_dir = tmp.path().join(sub);
        let cfg = synthetic_config(&tmp.path().join(format!("{sub}.toml")), &out_dir);
        let out = bin().args(["search", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    }
    assert_identical_trees(&tmp.path().join("a/logs"), &tmp.path().join("b/logs"));
    assert_identical_trees(
        &tmp.path().join("a/reports"),
        &tmp.path().join("b/reports"),
    );
}

#[test]
fn job_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    for (sub, jobs) in [("serial", "1"), ("parallel", "3")] {
        let out_dir = tmp.path().join(sub);
        let cfg = synthetic_config(&tmp.path().join(format!("{sub}.toml")), &out_dir);
        let out = bin()
            .args(["search", "--config"])
            .arg(&cfg)
            .args(["--jobs", jobs])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    }
    assert_identical_trees(
        &tmp.path().join("serial/logs"),
        &tmp.path().join("parallel/logs"),
    );
}

#[test]
fn env_overrides_route_output_and_flags_outrank_them() {
    let tmp = TempDir::new().unwrap();
    let env_dir = tmp.path().join("from-env");
    let flag_dir = tmp.path().join("from-flag");
    let cfg = synthetic_config(&tmp.path().join("run.toml"), &tmp.path().join("from-config"));

    let out = bin()
        .args(["search", "--config"])
        .arg(&cfg)
        .env("DPPSEARCH_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    assert!(env_dir.join("summary.json").exists());
    assert!(!tmp.path().join("from-config").exists());

    let out = bin()
        .args(["search", "--config"])
        .arg(&cfg)
        .env("DPPSEARCH_OUTPUT_DIR", tmp.path().join("ignored"))
        .arg("--output-dir")
        .arg(&flag_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    assert!(flag_dir.join("summary.json").exists());
    assert!(!tmp.path().join("ignored").exists());

    let out = bin()
        .args(["search", "--config"])
        .arg(&cfg)
        .env("DPPSEARCH_JOBS", "three")
        .output()
        .unwrap();
    assert_usage_error(&out);
    assert!(stderr_line(&out).contains("DPPSEARCH_JOBS"));
}

fn candidate_line(goal: &str, idx: usize) -> String {
    format!(
        r#"{{"goal_id":"{goal}","text":"cand-{idx:02}","logit":{}}}"#,
        -0.01 * idx as f64
    )
}

#[test]
fn filter_is_deterministic_and_respects_k() {
    let tmp = TempDir::new().unwrap();
    let cands = tmp.path().join("cands.jsonl");
    let lines: Vec<String> = (0..64).map(|i| candidate_line("g", i)).collect();
    write(&cands, &(lines.join("\n") + "\n"));

    let mut outputs = Vec::new();
    for name in ["first.jsonl", "second.jsonl"] {
        let out_path = tmp.path().join(name);
        let out = bin()
            .args(["filter", "--candidates"])
            .arg(&cands)
            .arg("--output")
            .arg(&out_path)
            .args(["--k", "8", "--seed", "13"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
        outputs.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn underfull_goals_pass_through_the_filter() {
    let tmp = TempDir::new().unwrap();
    let cands = tmp.path().join("cands.jsonl");
    let lines: Vec<String> = (0..5).map(|i| candidate_line("g", i)).collect();
    write(&cands, &(lines.join("\n") + "\n"));
    let out_path = tmp.path().join("kept.jsonl");
    let out = bin()
        .args(["filter", "--candidates"])
        .arg(&cands)
        .arg("--output")
        .arg(&out_path)
        .args(["--k", "8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn candidate_parse_errors_name_the_line() {
    let tmp = TempDir::new().unwrap();
    let cands = tmp.path().join("cands.jsonl");
    write(
        &cands,
        &format!("{}\nnot json at all\n", candidate_line("g", 0)),
    );
    let out = bin()
        .args(["filter", "--candidates"])
        .arg(&cands)
        .arg("--output")
        .arg(tmp.path().join("kept.jsonl"))
        .output()
        .unwrap();
    assert_usage_error(&out);
    assert!(stderr_line(&out).contains(":2"), "got {}", stderr_line(&out));
}

fn kernel_file(dir: &Path, order: usize, entries: &[f64]) -> PathBuf {
    let path = dir.join("kernel.json");
    let body = serde_json::json!({"order": order, "entries": entries});
    write(&path, &body.to_string());
    path
}

#[test]
fn sample_dpp_names_the_rank_when_k_is_too_large() {
    let tmp = TempDir::new().unwrap();
    let kernel = kernel_file(tmp.path(), 3, &[1.0; 9]);
    let out = bin()
        .args(["sample-dpp", "--kernel"])
        .arg(&kernel)
        .args(["--k", "2", "--n-samples", "4", "--output"])
        .arg(tmp.path().join("samples.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_line(&out);
    assert!(err.contains("rank 1"), "got {err:?}");
}

#[test]
fn exact_oracle_is_refused_beyond_the_order_cap() {
    let tmp = TempDir::new().unwrap();
    let order = 13;
    let mut entries = vec![0.0; order * order];
    for i in 0..order {
        entries[i * order + i] = 1.0;
    }
    let kernel = kernel_file(tmp.path(), order, &entries);
    let out = bin()
        .args(["sample-dpp", "--kernel"])
        .arg(&kernel)
        .args(["--k", "2", "--n-samples", "4", "--exact", "--output"])
        .arg(tmp.path().join("samples.json"))
        .output()
        .unwrap();
    assert_usage_error(&out);
}

#[test]
fn zero_samples_still_writes_a_valid_file() {
    let tmp = TempDir::new().unwrap();
    let kernel = kernel_file(tmp.path(), 2, &[1.0, 0.0, 0.0, 1.0]);
    let out_path = tmp.path().join("samples.json");
    let out = bin()
        .args(["sample-dpp", "--kernel"])
        .arg(&kernel)
        .args(["--k", "1", "--n-samples", "0", "--output"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(parsed["order"], 2);
    assert_eq!(parsed["samples"].as_array().unwrap().len(), 0);
}

#[test]
fn analyze_without_logs_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .args(["analyze", "--report"])
        .arg(tmp.path().join("report.json"))
        .output()
        .unwrap();
    assert_usage_error(&out);
}

#[test]
fn analyze_rejects_conflicting_attempt_ids() {
    let tmp = TempDir::new().unwrap();
    let record = r#"{"goal_id":"g","goal_text":"G","tactic_text":"t","status":1,"time_s":0.1,"output":{"subgoals":[]},"node_id":"n0","attempt_id":"shared"}
"#;
    let first = tmp.path().join("first.jsonl");
    let second = tmp.path().join("second.jsonl");
    write(&first, record);
    write(&second, record);
    let out = bin()
        .args(["analyze", "--log"])
        .arg(&first)
        .arg("--log")
        .arg(&second)
        .arg("--report")
        .arg(tmp.path().join("report.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_line(&out);
    assert!(err.contains("shared"), "got {err:?}");
    assert!(err.contains("first.jsonl") && err.contains("second.jsonl"));
}

#[test]
fn analyze_merges_disjoint_logs_and_reports_pass_rates() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = synthetic_config(&tmp.path().join("run.toml"), &out_dir);
    let out = bin().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));

    let logs = read_dir_sorted(&out_dir.join("logs"));
    assert_eq!(logs.len(), 4);
    let report_path = tmp.path().join("report.json");
    let mut cmd = bin();
    cmd.arg("analyze");
    for log in &logs {
        cmd.arg("--log").arg(log);
    }
    let out = cmd.arg("--report").arg(&report_path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("pass@2") && table.contains("success_rate_per_node"));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["goals"], 2);
    assert_eq!(report["attempts"].as_array().unwrap().len(), 4);
    assert!(report["pass_at"]["1"].is_number());
    assert!(report["pass_at"]["2"].is_number());

    // Node totals add up across disjoint logs: analyzing each log alone and
    // summing n matches the merged run.
    let merged_n = report["success_rate_per_node"]["n"].as_u64().unwrap();
    let mut split_n = 0;
    for log in &logs {
        let part = tmp.path().join("part.json");
        let out = bin()
            .args(["analyze", "--log"])
            .arg(log)
            .arg("--report")
            .arg(&part)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&part).unwrap()).unwrap();
        split_n += report["success_rate_per_node"]["n"].as_u64().unwrap();
    }
    assert_eq!(merged_n, split_n);
}

#[test]
fn replay_search_reruns_a_recorded_attempt() {
    let tmp = TempDir::new().unwrap();
    let live_dir = tmp.path().join("live");
    let cfg = tmp.path().join("live.toml");
    write(
        &cfg,
        &format!(
            r#"
k = 4
n_candidates = 16
seed = 3
output_dir = "{}"

[environment]
kind = "synthetic"
seed = 21
n_goals = 1
depth = 1
error_rate = 0.5
embed_dim = 8
"#,
            live_dir.display()
        ),
    );
    let out = bin().args(["search", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));

    let logs = read_dir_sorted(&live_dir.join("logs"));
    assert_eq!(logs.len(), 1);
    let first: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(&logs[0]).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    let benchmark = tmp.path().join("bench.jsonl");
    write(
        &benchmark,
        &format!(
            "{}\n",
            serde_json::json!({
                "goal_id": first["goal_id"],
                "goal_text": first["goal_text"],
            })
        ),
    );

    let replay_cfg = tmp.path().join("replay.toml");
    write(
        &replay_cfg,
        &format!(
            r#"
k = 4
n_candidates = 16
seed = 3
benchmark = "{}"
output_dir = "{}"

[environment]
kind = "replay"
log = "{}"
"#,
            benchmark.display(),
            tmp.path().join("replayed").display(),
            logs[0].display()
        ),
    );
    let out = bin()
        .args(["search", "--config"])
        .arg(&replay_cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_line(&out));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("replayed/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["proved_goals"], 1);
}
