use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{load_run, RunKind, TaskTrace};
use super::{write_json, write_text, HarnessError, Provenance, ReportFile, RunConfig};
use crate::agents::Verdict;
use crate::metrics::{aggregate, EvalRecord};
use crate::plan_dsl::Plan;
use crate::task_gen::{TaskClass, TaskInstance, VocabBank};
use crate::world_sim::WorldState;

pub const GROUP_KEYS: [&str; 3] = ["length", "class", "mode"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Score the ground truth against itself instead of reading a run.
    pub gt_as_prediction: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    /// Group value; `all` for the overall rate.
    pub value: String,
    pub count: usize,
    pub successes: usize,
    pub rate: f64,
}

impl SuccessRate {
    fn add(&mut self, success: bool) {
        self.count += 1;
        self.successes += usize::from(success);
        self.rate = self.successes as f64 / self.count as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub task_id: String,
    pub success: bool,
    pub steps_executed: usize,
    pub goal_satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Execution outcome of predicted plans, kept apart from the plan metrics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub overall: SuccessRate,
    /// Ascending length.
    pub by_length: Vec<SuccessRate>,
    /// Ascending class name.
    pub by_class: Vec<SuccessRate>,
}

impl SimSummary {
    pub fn length(&self, length: usize) -> Option<&SuccessRate> {
        let value = length.to_string();
        self.by_length.iter().find(|r| r.value == value)
    }
}

fn rates<K: ToString>(groups: BTreeMap<K, SuccessRate>) -> Vec<SuccessRate> {
    groups.into_iter().map(|(k, r)| SuccessRate { value: k.to_string(), ..r }).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Feasible commands judged feasible.
    pub true_feasible: usize,
    pub false_infeasible: usize,
    pub false_feasible: usize,
    pub true_infeasible: usize,
    /// Commands without any verdict, counted as wrong.
    pub missing: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySummary {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub report: ReportFile,
    pub missing_traces: usize,
}

struct Prediction {
    plan: Plan,
    parse_ok: bool,
    verdict: Option<Verdict>,
    mode: String,
}

fn predict(task: &TaskInstance, trace: Option<&TaskTrace>, gt_as_prediction: bool) -> Prediction {
    if gt_as_prediction {
        return Prediction {
            plan: task.gt_plan.clone().unwrap_or_default(),
            parse_ok: true,
            verdict: Some(if task.task_class.is_feasible() { Verdict::Feasible } else { Verdict::NotFeasible }),
            mode: "ground_truth".into(),
        };
    }
    match trace {
        Some(t) => Prediction {
            plan: t.pipeline.final_plan.clone().unwrap_or_default(),
            parse_ok: t.pipeline.parse_ok && t.pipeline.errors.is_empty(),
            verdict: t.pipeline.verdict,
            mode: serde_json::to_value(t.pipeline.mode)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        },
        None => Prediction { plan: Plan::default(), parse_ok: false, verdict: None, mode: "missing".into() },
    }
}

fn simulate(task: &TaskInstance, plan: &Plan, bank: &VocabBank) -> SimResult {
    match WorldState::init(task, bank) {
        Ok(mut world) => {
            let outcome = world.execute_plan(plan);
            let goal_satisfied = world.goal_satisfied(task);
            SimResult {
                task_id: task.id.clone(),
                success: outcome.success && goal_satisfied,
                steps_executed: outcome.steps_executed,
                goal_satisfied,
                failure: outcome.failure.map(|f| format!("step {}: {}", f.step, f.reason)),
            }
        }
        Err(e) => SimResult {
            task_id: task.id.clone(),
            success: false,
            steps_executed: 0,
            goal_satisfied: false,
            failure: Some(e.to_string()),
        },
    }
}

/// `#` lines ahead of the CSV header.
fn provenance_comment(p: &Provenance) -> String {
    format!(
        "# config_hash={}\n# dataset_sha256={}\n# backend={}\n# agents_sha256={}\n",
        p.config_hash, p.dataset_sha256, p.backend, p.agents_sha256
    )
}

/// Scores a run (or the ground truth itself) against the dataset and writes
/// `records.jsonl`, `sim.jsonl`, `report.json`, `report_length.csv`,
/// `report_class.csv` and, for feasibility tasks, `feasibility.json`.
pub fn evaluate(
    config: &RunConfig,
    tasks: &[TaskInstance],
    dataset_sha256: &str,
    run_dir: Option<&Path>,
    out: &Path,
    options: &EvalOptions,
) -> Result<EvalSummary, HarnessError> {
    let bank = config.bank()?;
    let (kind, provenance, traces) = match (options.gt_as_prediction, run_dir) {
        (true, _) => (
            RunKind::Pipeline,
            Provenance {
                config_hash: config.hash(),
                dataset_sha256: dataset_sha256.to_string(),
                backend: "ground-truth".into(),
                agents_sha256: String::new(),
            },
            Vec::new(),
        ),
        (false, Some(dir)) => {
            let (manifest, traces) = load_run(dir)?;
            if manifest.provenance.dataset_sha256 != dataset_sha256 {
                log::warn!("run {} was produced from a different dataset", dir.display());
            }
            (manifest.kind, manifest.provenance, traces)
        }
        (false, None) => return Err(HarnessError::Config("evaluation needs a run directory".into())),
    };
    let by_id: HashMap<&str, &TaskTrace> = traces.iter().map(|t| (t.task_id.as_str(), t)).collect();

    let mut records = Vec::new();
    let mut sims = Vec::new();
    let mut overall = SuccessRate { value: "all".into(), ..SuccessRate::default() };
    let mut by_length: BTreeMap<usize, SuccessRate> = BTreeMap::new();
    let mut by_class: BTreeMap<String, SuccessRate> = BTreeMap::new();
    let mut feasibility = FeasibilitySummary::default();
    let mut missing_traces = 0;
    for task in tasks {
        let trace = by_id.get(task.id.as_str()).copied();
        if trace.is_none() && !options.gt_as_prediction {
            missing_traces += 1;
        }
        let pred = predict(task, trace, options.gt_as_prediction);

        if matches!(task.task_class, TaskClass::FeasibilityPositive | TaskClass::FeasibilityNegative) {
            let truth = task.task_class.is_feasible();
            let c = &mut feasibility.confusion;
            match (truth, pred.verdict) {
                (true, Some(Verdict::Feasible)) => c.true_feasible += 1,
                (true, Some(Verdict::NotFeasible)) => c.false_infeasible += 1,
                (false, Some(Verdict::Feasible)) => c.false_feasible += 1,
                (false, Some(Verdict::NotFeasible)) => c.true_infeasible += 1,
                (_, None) => c.missing += 1,
            }
            feasibility.total += 1;
        }

        if kind == RunKind::Feasibility {
            continue;
        }
        let Some(gt) = &task.gt_plan else { continue };
        let length = gt.len();
        let class = task.task_class.to_string();
        records.push(
            EvalRecord::score(&task.id, &pred.plan, gt, pred.parse_ok)
                .with_group("length", length.to_string())
                .with_group("class", class.clone())
                .with_group("mode", pred.mode.clone()),
        );
        if !task.goals.is_empty() {
            let result = simulate(task, &pred.plan, &bank);
            overall.add(result.success);
            by_length.entry(length).or_default().add(result.success);
            by_class.entry(class).or_default().add(result.success);
            sims.push(result);
        }
    }
    let c = &feasibility.confusion;
    feasibility.correct = c.true_feasible + c.true_infeasible;
    feasibility.accuracy =
        if feasibility.total == 0 { 0.0 } else { feasibility.correct as f64 / feasibility.total as f64 };

    let metrics = match records.is_empty() {
        true => None,
        false => Some(aggregate(&records, &GROUP_KEYS).expect("records are non-empty")),
    };
    let report = ReportFile {
        provenance,
        kind,
        tasks: tasks.len(),
        missing_traces,
        metrics,
        sim: (!sims.is_empty()).then(|| SimSummary { overall, by_length: rates(by_length), by_class: rates(by_class) }),
        feasibility: (feasibility.total > 0).then_some(feasibility),
    };

    let jsonl = |items: Vec<String>| items.into_iter().map(|l| l + "\n").collect::<String>();
    write_text(
        &out.join("records.jsonl"),
        &jsonl(records.iter().map(|r| serde_json::to_string(r).expect("record serializes")).collect()),
    )?;
    write_text(
        &out.join("sim.jsonl"),
        &jsonl(sims.iter().map(|r| serde_json::to_string(r).expect("result serializes")).collect()),
    )?;
    if let Some(m) = &report.metrics {
        let stamp = provenance_comment(&report.provenance);
        write_text(&out.join("report_length.csv"), &(stamp.clone() + &m.to_csv(Some("length"))))?;
        write_text(&out.join("report_class.csv"), &(stamp + &m.to_csv(Some("class"))))?;
    }
    if let Some(f) = &report.feasibility {
        #[derive(Serialize)]
        struct FeasibilityFile<'a> {
            #[serde(flatten)]
            provenance: &'a Provenance,
            #[serde(flatten)]
            summary: &'a FeasibilitySummary,
        }
        write_json(&out.join("feasibility.json"), &FeasibilityFile { provenance: &report.provenance, summary: f })?;
    }
    write_json(&out.join("report.json"), &report)?;
    Ok(EvalSummary { report, missing_traces })
}
