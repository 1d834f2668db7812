//! Python module `help_planner`: plans, metrics, grounding, task generation,
//! the simulator and the planner pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use help_core::agents::{Agents, Planner as CorePlanner};
use help_core::grounding::{ground_term as core_ground_term, TrigramEmbedder, DEFAULT_THRESHOLD};
use help_core::harness::golden::golden_script as core_golden_script;
use help_core::harness::{generate_suite as core_generate_suite, RunConfig, Suite, SuiteParams};
use help_core::metrics::EvalRecord;
use help_core::plan_dsl::{parse_plan, Plan as CorePlan, SkillRegistry};
use help_core::task_gen::{TaskInstance, VocabBank};
use help_core::world_sim::WorldState;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn registry(name: &str) -> PyResult<SkillRegistry> {
    match name {
        "household" => Ok(SkillRegistry::household()),
        "alfred" => Ok(SkillRegistry::alfred()),
        other => Err(value_err(format!("unknown registry `{other}` (household or alfred)"))),
    }
}

/// A parsed plan.
#[pyclass(name = "Plan", eq, frozen, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPlan {
    inner: CorePlan,
}

#[pymethods]
impl PyPlan {
    /// Parses plan text against a skill registry.
    #[new]
    #[pyo3(signature = (text, registry = "household"))]
    fn new(text: &str, registry: &str) -> PyResult<Self> {
        let reg = self::registry(registry)?;
        Ok(Self { inner: parse_plan(text, &reg).map_err(value_err)? })
    }

    /// `(skill, [args])` pairs, terminator excluded.
    #[getter]
    fn actions(&self) -> Vec<(String, Vec<String>)> {
        self.inner.actions.iter().map(|a| (a.skill.clone(), a.args.clone())).collect()
    }

    #[getter]
    fn terminated(&self) -> bool {
        self.inner.terminated
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Plan({:?})", self.inner.to_text())
    }
}

/// The six plan metrics of `pred` against `gt`.
#[pyfunction]
fn score(pred: &PyPlan, gt: &PyPlan) -> BTreeMap<&'static str, f64> {
    let r = EvalRecord::score("", &pred.inner, &gt.inner, true);
    BTreeMap::from([
        ("em_a", f64::from(r.em_a)),
        ("em_p", f64::from(r.em_p)),
        ("lcss_a", r.lcss_a),
        ("lcss_p", r.lcss_p),
        ("lcsa_a", r.lcsa_a),
        ("lcsa_p", r.lcsa_p),
    ])
}

/// Grounds `term` on `vocabulary` with the trigram embedder.
/// Returns `(chosen, score, accepted)`.
#[pyfunction]
#[pyo3(signature = (term, vocabulary, threshold = DEFAULT_THRESHOLD))]
fn ground_term(term: &str, vocabulary: Vec<String>, threshold: f64) -> PyResult<(String, f64, bool)> {
    let d = core_ground_term(term, &vocabulary, &TrigramEmbedder, threshold).map_err(value_err)?;
    Ok((d.chosen, d.score, d.accepted))
}

/// One benchmark task.
#[pyclass(name = "Task", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTask {
    inner: TaskInstance,
}

#[pymethods]
impl PyTask {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("task serializes")
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn instruction(&self) -> String {
        self.inner.instruction.clone()
    }

    #[getter]
    fn task_class(&self) -> String {
        self.inner.task_class.to_string()
    }

    #[getter]
    fn gt_plan(&self) -> Option<PyPlan> {
        self.inner.gt_plan.clone().map(|inner| PyPlan { inner })
    }

    fn __repr__(&self) -> String {
        format!("Task({:?}, {:?})", self.inner.id, self.inner.instruction)
    }
}

/// Generates a suite: core, lengths, ambiguous, feasibility or smoke.
#[pyfunction]
#[pyo3(signature = (suite, seed = 42, per_length = 200, per_class = 200, ambiguous = 100))]
fn generate_suite(suite: &str, seed: u64, per_length: usize, per_class: usize, ambiguous: usize) -> PyResult<Vec<PyTask>> {
    let suite: Suite = suite.parse().map_err(value_err)?;
    let params = SuiteParams { per_length, per_class, ambiguous, ..SuiteParams::default() };
    let (tasks, _) = core_generate_suite(suite, &params, &VocabBank::bundled(), seed).map_err(value_err)?;
    Ok(tasks.into_iter().map(|inner| PyTask { inner }).collect())
}

/// Scripted backend rules (JSON) that answer every agent correctly for `tasks`.
#[pyfunction]
fn golden_script(tasks: Vec<PyRef<'_, PyTask>>) -> String {
    let tasks: Vec<TaskInstance> = tasks.iter().map(|t| t.inner.clone()).collect();
    core_golden_script(&tasks, &VocabBank::bundled(), &Agents::bundled()).to_json()
}

/// The simulated world paired with a task.
#[pyclass(name = "World")]
struct PyWorld {
    inner: WorldState,
}

#[pymethods]
impl PyWorld {
    #[new]
    fn new(task: &PyTask) -> PyResult<Self> {
        Ok(Self { inner: WorldState::init(&task.inner, &VocabBank::bundled()).map_err(value_err)? })
    }

    /// Executes `plan`; returns `(success, steps_executed, failure)`.
    fn execute(&mut self, plan: &PyPlan) -> (bool, usize, Option<String>) {
        let outcome = self.inner.execute_plan(&plan.inner);
        (outcome.success, outcome.steps_executed, outcome.failure.map(|f| format!("step {}: {}", f.step, f.reason)))
    }

    fn goal_satisfied(&self, task: &PyTask) -> bool {
        self.inner.goal_satisfied(&task.inner)
    }

    /// Labels of visible objects, optionally filtered by a name or group.
    #[pyo3(signature = (query = None))]
    fn list_objects(&self, query: Option<&str>) -> Vec<String> {
        self.inner.list_objects(query).into_iter().map(|o| o.label).collect()
    }

    #[getter]
    fn locations(&self) -> Vec<String> {
        self.inner.locations.clone()
    }

    fn state_hash(&self) -> String {
        self.inner.state_hash()
    }

    fn __repr__(&self) -> String {
        self.inner.to_string()
    }
}

/// The multi-agent planner, configured from a TOML run configuration.
#[pyclass(name = "Planner", frozen)]
struct PyPlanner {
    inner: Arc<CorePlanner>,
}

#[pymethods]
impl PyPlanner {
    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let config = RunConfig::from_path(&path).map_err(value_err)?;
        config.validate().map_err(value_err)?;
        Ok(Self { inner: Arc::new(config.planner(None).map_err(value_err)?) })
    }

    /// Runs the pipeline on `task` in a fresh world and returns the trace
    /// as a JSON string.
    fn run(&self, py: Python<'_>, task: &PyTask) -> PyResult<String> {
        let mut world = WorldState::init(&task.inner, &VocabBank::bundled()).map_err(value_err)?;
        let planner = self.inner.clone();
        let instruction = task.inner.instruction.clone();
        let trace = py.detach(move || planner.run_pipeline(&instruction, &mut world));
        serde_json::to_string(&trace).map_err(value_err)
    }
}

#[pymodule]
fn help_planner(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlan>()?;
    m.add_class::<PyTask>()?;
    m.add_class::<PyWorld>()?;
    m.add_class::<PyPlanner>()?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(ground_term, m)?)?;
    m.add_function(wrap_pyfunction!(generate_suite, m)?)?;
    m.add_function(wrap_pyfunction!(golden_script, m)?)?;
    Ok(())
}
