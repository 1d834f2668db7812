use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{read_text, sha256_hex, write_json, write_text, HarnessError, Provenance, RunConfig};
use crate::agents::{PipelineConfig, PipelineTrace, Planner};
use crate::llm_gateway::Decoding;
use crate::task_gen::{TaskInstance, VocabBank};
use crate::world_sim::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Pipeline,
    Feasibility,
}

/// Everything recorded for one task of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub task_id: String,
    pub task_class: String,
    pub kind: RunKind,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub pipeline: PipelineTrace,
    /// Goal check after executing the final plan, when there was one.
    pub goal_satisfied: Option<bool>,
}

impl TaskTrace {
    pub fn has_errors(&self) -> bool {
        !self.pipeline.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: RunKind,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub pipeline: PipelineConfig,
    pub decoding: Decoding,
    pub tasks: usize,
    pub failed_tasks: Vec<String>,
    pub traces_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub executed: usize,
    pub resumed: usize,
    pub failed: Vec<String>,
}

fn trace_path(dir: &Path, task_id: &str) -> PathBuf {
    let safe: String =
        task_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    dir.join(format!("{safe}.json"))
}

fn load_trace(path: &Path) -> Result<TaskTrace, HarnessError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| HarnessError::data(path, e))
}

fn trace_task(planner: &Planner, kind: RunKind, task: &TaskInstance, bank: &VocabBank, provenance: &Provenance) -> TaskTrace {
    let mut goal_satisfied = None;
    let pipeline = match kind {
        RunKind::Feasibility => planner.run_feasibility_check(&task.instruction),
        RunKind::Pipeline => match WorldState::init(task, bank) {
            Ok(mut world) => {
                let trace = planner.run_pipeline(&task.instruction, &mut world);
                if trace.execution.is_some() && !task.goals.is_empty() {
                    goal_satisfied = Some(world.goal_satisfied(task));
                }
                trace
            }
            Err(e) => PipelineTrace::new(&task.instruction, planner.config.mode).fail("world", e),
        },
    };
    TaskTrace {
        task_id: task.id.clone(),
        task_class: task.task_class.to_string(),
        kind,
        provenance: provenance.clone(),
        pipeline,
        goal_satisfied,
    }
}

/// Runs every task with a bounded worker pool, one trace file per task
/// under `out/traces`. Tasks whose trace file already exists are skipped,
/// so an interrupted run can be resumed. Afterwards the traces are joined
/// into `out/traces.jsonl` in dataset order and `out/run.json` is written.
pub fn run_tasks(
    config: &RunConfig,
    kind: RunKind,
    tasks: &[TaskInstance],
    dataset_sha256: &str,
    out: &Path,
) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let bank = config.bank()?;
    let planner = config.planner(Some(&out.join("requests.jsonl")))?;
    let provenance = Provenance {
        config_hash: config.hash(),
        dataset_sha256: dataset_sha256.to_string(),
        backend: planner.gateway.identity(),
        agents_sha256: planner.agents.fingerprint(),
    };
    let dir = out.join("traces");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;

    let mut pending = Vec::new();
    let mut resumed = 0;
    for task in tasks {
        let path = trace_path(&dir, &task.id);
        if path.exists() {
            let existing = load_trace(&path)?;
            if existing.provenance.config_hash != provenance.config_hash || existing.kind != kind {
                return Err(HarnessError::Config(format!(
                    "{} holds a trace from a different configuration; use a fresh output directory",
                    path.display()
                )));
            }
            resumed += 1;
        } else {
            pending.push(task);
        }
    }
    if resumed > 0 {
        log::info!("resuming: {resumed} of {} tasks already traced", tasks.len());
    }

    let next = AtomicUsize::new(0);
    let write_errors = Mutex::new(Vec::new());
    let workers = config.parallelism.clamp(1, pending.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = pending.get(i) else { break };
                let trace = trace_task(&planner, kind, task, &bank, &provenance);
                if let Err(e) = write_json(&trace_path(&dir, &task.id), &trace) {
                    write_errors.lock().expect("error list").push(e);
                }
                if (i + 1).is_multiple_of(100) {
                    log::info!("{} / {} tasks traced", i + 1, pending.len());
                }
            });
        }
    });
    if let Some(e) = write_errors.into_inner().expect("error list").into_iter().next() {
        return Err(e);
    }

    let mut lines = String::new();
    let mut failed = Vec::new();
    for task in tasks {
        let trace = load_trace(&trace_path(&dir, &task.id))?;
        if trace.has_errors() {
            failed.push(task.id.clone());
        }
        lines.push_str(&serde_json::to_string(&trace).expect("trace serializes"));
        lines.push('\n');
    }
    write_text(&out.join("traces.jsonl"), &lines)?;
    let manifest = RunManifest {
        kind,
        provenance,
        pipeline: config.pipeline.clone(),
        decoding: config.decoding(),
        tasks: tasks.len(),
        failed_tasks: failed.clone(),
        traces_sha256: sha256_hex(lines.as_bytes()),
    };
    write_json(&out.join("run.json"), &manifest)?;
    Ok(RunSummary { total: tasks.len(), executed: pending.len(), resumed, failed })
}

/// Feasibility verdicts only.
pub fn run_feasibility(
    config: &RunConfig,
    tasks: &[TaskInstance],
    dataset_sha256: &str,
    out: &Path,
) -> Result<RunSummary, HarnessError> {
    run_tasks(config, RunKind::Feasibility, tasks, dataset_sha256, out)
}

/// Traces of a finished run keyed by task id.
pub(crate) fn load_run(dir: &Path) -> Result<(RunManifest, Vec<TaskTrace>), HarnessError> {
    let manifest_path = dir.join("run.json");
    let manifest: RunManifest =
        serde_json::from_str(&read_text(&manifest_path)?).map_err(|e| HarnessError::data(&manifest_path, e))?;
    let traces_path = dir.join("traces.jsonl");
    let traces = read_text(&traces_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| HarnessError::data(&traces_path, e)))
        .collect::<Result<_, _>>()?;
    Ok((manifest, traces))
}
