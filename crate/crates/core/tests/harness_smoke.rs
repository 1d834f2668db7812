use std::path::{Path, PathBuf};

use help_core::agents::Mode;
use help_core::harness::{evaluate, load_dataset, run_tasks, EvalOptions, ReportFile, RunConfig, RunKind};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/smoke")
}

fn config() -> RunConfig {
    RunConfig::from_path(&fixture().join("config.toml")).unwrap()
}

fn run_and_eval(config: &RunConfig, out: &Path) -> ReportFile {
    let (tasks, sha) = load_dataset(config.dataset.as_ref().unwrap()).unwrap();
    let summary = run_tasks(config, RunKind::Pipeline, &tasks, &sha, &out.join("run")).unwrap();
    assert!(summary.failed.is_empty(), "failed tasks: {:?}", summary.failed);
    evaluate(config, &tasks, &sha, Some(&out.join("run")), &out.join("eval"), &EvalOptions::default())
        .unwrap()
        .report
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn golden_script_reproduces_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_and_eval(&config(), dir.path());
    let m = report.metrics.unwrap();
    assert_eq!(m.overall.count, 20);
    assert_eq!(m.overall.em_p, 1.0);
    assert_eq!(m.overall.em_a, 1.0);
    assert_eq!(m.overall.parse_failure_rate, 0.0);
    assert_eq!(report.sim.unwrap().overall.rate, 1.0);
    assert_eq!(report.missing_traces, 0);
}

#[test]
fn artifacts_are_hash_stable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_and_eval(&config(), a.path());
    run_and_eval(&config(), b.path());
    for file in ["run/traces.jsonl", "run/run.json", "eval/report.json", "eval/records.jsonl", "eval/report_length.csv"] {
        assert_eq!(read(&a.path().join(file)), read(&b.path().join(file)), "{file} differs");
    }
}

#[test]
fn clothes_scenario_takes_the_ambiguity_path() {
    let dir = tempfile::tempdir().unwrap();
    run_and_eval(&config(), dir.path());
    let trace: serde_json::Value = serde_json::from_str(&read(&dir.path().join("run/traces/smoke-04.json"))).unwrap();
    let p = &trace["pipeline"];
    assert_eq!(p["feedback_query"], "clothes");
    assert!(p["subtasks"].as_array().unwrap().len() >= 2);
    assert_eq!(trace["goal_satisfied"], true);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let (full, resumed) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_and_eval(&config(), full.path());
    run_and_eval(&config(), resumed.path());
    let traces = resumed.path().join("run/traces");
    for id in ["smoke-03", "smoke-11", "smoke-20"] {
        std::fs::remove_file(traces.join(format!("{id}.json"))).unwrap();
    }
    let (tasks, sha) = load_dataset(config().dataset.as_ref().unwrap()).unwrap();
    let summary = run_tasks(&config(), RunKind::Pipeline, &tasks, &sha, &resumed.path().join("run")).unwrap();
    assert_eq!((summary.executed, summary.resumed), (3, 17));
    assert_eq!(read(&full.path().join("run/traces.jsonl")), read(&resumed.path().join("run/traces.jsonl")));
}

#[test]
fn changed_config_refuses_to_resume() {
    let dir = tempfile::tempdir().unwrap();
    run_and_eval(&config(), dir.path());
    let mut other = config();
    other.pipeline.threshold = 0.5;
    let (tasks, sha) = load_dataset(other.dataset.as_ref().unwrap()).unwrap();
    assert!(run_tasks(&other, RunKind::Pipeline, &tasks, &sha, &dir.path().join("run")).is_err());
}

#[test]
fn llp_only_skips_the_high_level_planner() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = config();
    config.pipeline.mode = Mode::LlpOnly;
    let report = run_and_eval(&config, dir.path());
    assert_eq!(report.metrics.unwrap().overall.em_p, 1.0);
    let traces = read(&dir.path().join("run/traces.jsonl"));
    for line in traces.lines() {
        let t: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(t["pipeline"]["subtasks"].as_array().unwrap().len(), 1);
        assert!(t["pipeline"]["exchanges"].as_array().unwrap().iter().all(|e| e["agent"] != "hlp"));
    }
}

#[test]
fn gt_as_prediction_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let config = config();
    let (tasks, sha) = load_dataset(config.dataset.as_ref().unwrap()).unwrap();
    let options = EvalOptions { gt_as_prediction: true };
    let report = evaluate(&config, &tasks, &sha, None, dir.path(), &options).unwrap().report;
    let m = report.metrics.unwrap();
    for g in std::iter::once(&m.overall).chain(&m.groups) {
        assert_eq!([g.em_a, g.em_p, g.lcss_a, g.lcss_p, g.lcsa_a, g.lcsa_p], [1.0; 6], "{}={}", g.key, g.value);
    }
    assert_eq!(report.sim.unwrap().overall.rate, 1.0);
}

#[test]
fn missing_traces_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = config();
    let (tasks, sha) = load_dataset(config.dataset.as_ref().unwrap()).unwrap();
    run_tasks(&config, RunKind::Pipeline, &tasks[..10], &sha, &dir.path().join("run")).unwrap();
    let report =
        evaluate(&config, &tasks, &sha, Some(&dir.path().join("run")), &dir.path().join("eval"), &EvalOptions::default())
            .unwrap()
            .report;
    assert_eq!(report.missing_traces, 10);
    let m = report.metrics.unwrap();
    assert_eq!(m.overall.em_p, 0.5);
    assert_eq!(m.overall.parse_failure_rate, 0.5);
}
