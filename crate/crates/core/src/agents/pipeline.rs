use serde::{Deserialize, Serialize};

use super::{Exchange, Planner, SubtaskPlan, Verdict};
use crate::grounding::{Grounder, DEFAULT_THRESHOLD};
use crate::plan_dsl::Plan;
use crate::world_sim::{ExecOutcome, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Feasibility, feedback, HLP, then LLP per subtask.
    #[default]
    Help,
    /// The raw instruction goes straight to the LLP.
    LlpOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub selection: super::Selection,
    /// LLP exemplars per prompt.
    pub exemplars: usize,
    pub grounding: bool,
    pub threshold: f64,
    pub feasibility_check: bool,
    /// Execute the final plan in the world.
    pub execute: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Help,
            selection: super::Selection::Similarity,
            exemplars: 5,
            grounding: true,
            threshold: DEFAULT_THRESHOLD,
            feasibility_check: true,
            execute: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub instruction: String,
    pub mode: Mode,
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_warning: Option<String>,
    pub feedback_query: Option<String>,
    pub feedback_objects: Vec<String>,
    pub subtasks: Vec<String>,
    pub subtask_plans: Vec<SubtaskPlan>,
    /// Grounded subtask plans joined, with a single trailing `done()`.
    pub final_plan: Option<Plan>,
    pub parse_ok: bool,
    pub execution: Option<ExecOutcome>,
    pub errors: Vec<StageError>,
    pub exchanges: Vec<Exchange>,
}

impl PipelineTrace {
    pub fn new(instruction: &str, mode: Mode) -> Self {
        Self {
            instruction: instruction.to_string(),
            mode,
            verdict: None,
            verdict_warning: None,
            feedback_query: None,
            feedback_objects: Vec::new(),
            subtasks: Vec::new(),
            subtask_plans: Vec::new(),
            final_plan: None,
            parse_ok: false,
            execution: None,
            errors: Vec::new(),
            exchanges: Vec::new(),
        }
    }

    pub fn fail(mut self, stage: &str, message: impl ToString) -> Self {
        self.errors.push(StageError { stage: stage.to_string(), message: message.to_string() });
        self
    }

    pub fn halted_as_infeasible(&self) -> bool {
        self.verdict == Some(Verdict::NotFeasible)
    }
}

impl Planner {
    /// Runs every stage in order and always returns a trace; a stage error
    /// ends the run and is recorded with whatever was produced so far.
    pub fn run_pipeline(&self, instruction: &str, world: &mut WorldState) -> PipelineTrace {
        let mut trace = PipelineTrace::new(instruction, self.config.mode);
        let mut log = Vec::new();
        let trace_result = self.stages(instruction, world, &mut trace, &mut log);
        trace.exchanges = log;
        match trace_result {
            Ok(()) => trace,
            Err((stage, message)) => trace.fail(stage, message),
        }
    }

    /// Only the feasibility verdict, for feasibility-classification runs.
    pub fn run_feasibility_check(&self, instruction: &str) -> PipelineTrace {
        let mut trace = PipelineTrace::new(instruction, self.config.mode);
        let mut log = Vec::new();
        let result = self.check_feasibility(instruction, &mut log);
        trace.exchanges = log;
        match result {
            Ok((verdict, warning)) => {
                trace.verdict = Some(verdict);
                trace.verdict_warning = warning;
                trace
            }
            Err(e) => trace.fail("feasibility", e),
        }
    }

    fn stages(
        &self,
        instruction: &str,
        world: &mut WorldState,
        trace: &mut PipelineTrace,
        log: &mut Vec<Exchange>,
    ) -> Result<(), (&'static str, String)> {
        if self.config.feasibility_check {
            let (verdict, warning) =
                self.check_feasibility(instruction, log).map_err(|e| ("feasibility", e.to_string()))?;
            trace.verdict = Some(verdict);
            trace.verdict_warning = warning;
            if verdict == Verdict::NotFeasible {
                return Ok(());
            }
        }

        trace.subtasks = match self.config.mode {
            Mode::LlpOnly => vec![instruction.to_string()],
            Mode::Help => {
                let query = self.feedback_query(instruction, log).map_err(|e| ("feedback", e.to_string()))?;
                if let Some(q) = &query {
                    trace.feedback_objects = world.list_objects(Some(q)).into_iter().map(|o| o.label).collect();
                }
                trace.feedback_query = query;
                self.hlp_decompose(instruction, &trace.feedback_objects, log).map_err(|e| ("hlp", e.to_string()))?
            }
        };

        let grounder = if self.config.grounding {
            let objects: Vec<String> = world.list_objects(None).into_iter().map(|o| o.label).collect();
            match Grounder::new(&objects, &world.locations, self.agents.embedder.clone(), self.config.threshold) {
                Ok(g) => Some(g),
                Err(e) => {
                    trace.errors.push(StageError { stage: "grounding".into(), message: e.to_string() });
                    None
                }
            }
        } else {
            None
        };

        let mut final_plan = Plan::new(Vec::new(), true);
        for subtask in trace.subtasks.clone() {
            let planned = self.llp_plan(&subtask, grounder.as_ref(), log).map_err(|e| ("llp", e.to_string()))?;
            final_plan.actions.extend(planned.grounded.actions.iter().cloned());
            trace.subtask_plans.push(planned);
        }
        trace.parse_ok = trace.subtask_plans.iter().all(|s| s.parse_ok);
        if self.config.execute {
            trace.execution = Some(world.execute_plan(&final_plan));
        }
        trace.final_plan = Some(final_plan);
        Ok(())
    }
}
