//! Seeded, template-based instruction datasets with ground-truth plans.
//!
//! Every generator is a pure function of `(bank, params, seed)`. Streams for
//! different classes and lengths draw from independent sub-seeds (see
//! [`crate::seed`]), so output does not depend on generation order.

mod feasibility;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::plan_dsl::{Action, Plan, UNSPECIFIED};
use crate::seed::{derive_seed, rng_for};
use crate::world_sim::{instance_labels, instance_names};

pub use feasibility::{generate_feasibility_set, infeasible_commands, FEASIBILITY_SET_SIZE};
pub use vocab::{ObjectEntry, Template, TemplateClass, VocabBank, LOCATION_COUNT, OBJECT_COUNT, TEMPLATE_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskGenError {
    #[error("vocabulary bank invalid: {0}")]
    BankInvalid(String),
    #[error("plan length {0} cannot be composed (need an even length in 2..=16)")]
    UnreachableLength(usize),
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskClass {
    Pick,
    PickPlace,
    PickPlace2,
    Composite(usize),
    Ambiguous,
    FeasibilityPositive,
    FeasibilityNegative,
}

impl fmt::Display for TaskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskClass::Pick => f.write_str("pick"),
            TaskClass::PickPlace => f.write_str("pick_place"),
            TaskClass::PickPlace2 => f.write_str("pick_place2"),
            TaskClass::Composite(k) => write!(f, "composite_{k}"),
            TaskClass::Ambiguous => f.write_str("ambiguous"),
            TaskClass::FeasibilityPositive => f.write_str("feasibility_positive"),
            TaskClass::FeasibilityNegative => f.write_str("feasibility_negative"),
        }
    }
}

impl FromStr for TaskClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pick" => TaskClass::Pick,
            "pick_place" => TaskClass::PickPlace,
            "pick_place2" => TaskClass::PickPlace2,
            "ambiguous" => TaskClass::Ambiguous,
            "feasibility_positive" => TaskClass::FeasibilityPositive,
            "feasibility_negative" => TaskClass::FeasibilityNegative,
            other => match other.strip_prefix("composite_").and_then(|k| k.parse().ok()) {
                Some(k) => TaskClass::Composite(k),
                None => return Err(format!("unknown task class `{other}`")),
            },
        })
    }
}

impl Serialize for TaskClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TaskClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl TaskClass {
    pub fn is_feasible(self) -> bool {
        self != TaskClass::FeasibilityNegative
    }
}

/// An object the task's world must contain. `location: None` lets the world
/// seed choose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalTarget {
    At(String),
    Held,
}

/// Final condition on one object instance (e.g. `shirt_1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub object: String,
    pub target: GoalTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub instruction: String,
    pub task_class: TaskClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_plan: Option<Plan>,
    pub world_seed: u64,
    #[serde(default)]
    pub scene: Vec<SceneObject>,
    #[serde(default)]
    pub goals: Vec<Goal>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl TaskInstance {
    /// Done-excluded ground-truth length.
    pub fn gt_len(&self) -> Option<usize> {
        self.gt_plan.as_ref().map(Plan::len)
    }
}

/// One pick (and optionally place) of a single object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub object: String,
    pub src: Option<String>,
    /// `None` leaves the object in the gripper.
    pub dst: Option<String>,
}

impl Unit {
    pub fn pick(object: &str, src: Option<&str>) -> Self {
        Self { object: object.into(), src: src.map(Into::into), dst: None }
    }

    pub fn pick_place(object: &str, src: Option<&str>, dst: &str) -> Self {
        Self { object: object.into(), src: src.map(Into::into), dst: Some(dst.into()) }
    }

    pub fn steps(&self) -> usize {
        if self.dst.is_some() { 4 } else { 2 }
    }
}

/// Ground-truth actions for one unit, addressing the object by `label`.
pub fn unit_actions(unit: &Unit, label: &str) -> Vec<Action> {
    let src = unit.src.as_deref().unwrap_or(UNSPECIFIED);
    let mut actions = vec![Action::new("move_to", [label, src]), Action::new("pick_up", [label, src])];
    if let Some(dst) = &unit.dst {
        actions.push(Action::new("move_to", [label, dst.as_str()]));
        actions.push(Action::new("put", [label, dst.as_str()]));
    }
    actions
}

/// Builds a task whose scene, goals and terminated ground-truth plan all
/// follow from `units`, in order.
pub fn task_from_units(
    id: impl Into<String>,
    instruction: impl Into<String>,
    task_class: TaskClass,
    units: &[Unit],
    world_seed: u64,
    mut metadata: BTreeMap<String, Value>,
) -> TaskInstance {
    let names: Vec<String> = units.iter().map(|u| u.object.clone()).collect();
    let instances = instance_names(&names);
    let labels = instance_labels(&names);
    let mut plan = Plan::new(Vec::new(), true);
    let mut goals = Vec::new();
    for ((unit, instance), label) in units.iter().zip(&instances).zip(&labels) {
        plan.actions.extend(unit_actions(unit, label));
        goals.push(Goal {
            object: instance.clone(),
            target: match &unit.dst {
                Some(d) => GoalTarget::At(d.clone()),
                None => GoalTarget::Held,
            },
        });
    }
    metadata.insert("target_length".into(), json!(plan.len()));
    metadata.insert("objects".into(), json!(names));
    TaskInstance {
        id: id.into(),
        instruction: instruction.into(),
        task_class,
        gt_plan: Some(plan),
        world_seed,
        scene: units
            .iter()
            .map(|u| SceneObject { name: u.object.clone(), location: u.src.clone() })
            .collect(),
        goals,
        metadata,
    }
}

struct Sampler<'a> {
    bank: &'a VocabBank,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn template(&mut self, class: TemplateClass) -> &'a Template {
        self.bank.templates_of(class).choose(&mut self.rng).copied().expect("bank validated")
    }

    /// An object whose base type is not yet in `used`.
    fn object(&mut self, used: &mut BTreeSet<String>) -> &'a str {
        let free: Vec<&ObjectEntry> = self.bank.objects.iter().filter(|o| !used.contains(o.base())).collect();
        let pick = free.choose(&mut self.rng).expect("bank has more types than any task uses");
        used.insert(pick.base().to_string());
        &pick.name
    }

    fn location(&mut self) -> &'a str {
        self.bank.locations.choose(&mut self.rng).expect("bank validated")
    }

    fn location_except(&mut self, avoid: Option<&str>) -> &'a str {
        let options: Vec<&String> = self.bank.locations.iter().filter(|l| Some(l.as_str()) != avoid).collect();
        options.choose(&mut self.rng).expect("bank has several locations")
    }

    fn world_seed(&mut self) -> u64 {
        self.rng.random()
    }

    /// Fills a single-object clause template, returning the text and its unit.
    fn clause(&mut self, class: TemplateClass, used: &mut BTreeSet<String>) -> (String, Unit, &'a str) {
        let template = self.template(class);
        let object = self.object(used);
        let src = template.has("src").then(|| self.location());
        let mut values = vec![("obj", object)];
        if let Some(s) = src {
            values.push(("src", s));
        }
        let unit = if class == TemplateClass::Pick {
            Unit::pick(object, src)
        } else {
            let dst = self.location_except(src);
            values.push(("dst", dst));
            Unit::pick_place(object, src, dst)
        };
        (template.fill(&values), unit, &template.id)
    }
}

fn base_metadata(template_id: &str) -> BTreeMap<String, Value> {
    BTreeMap::from([("template_id".to_string(), json!(template_id))])
}

fn core_task(sampler: &mut Sampler<'_>, class: TaskClass, id: String) -> TaskInstance {
    let mut used = BTreeSet::new();
    match class {
        TaskClass::Pick | TaskClass::PickPlace => {
            let tclass = if class == TaskClass::Pick { TemplateClass::Pick } else { TemplateClass::PickPlace };
            let (text, unit, tid) = sampler.clause(tclass, &mut used);
            let seed = sampler.world_seed();
            task_from_units(id, text, class, &[unit], seed, base_metadata(tid))
        }
        TaskClass::PickPlace2 => {
            let template = sampler.template(TemplateClass::PickPlace2);
            let (o1, o2) = (sampler.object(&mut used), sampler.object(&mut used));
            let src1 = template.has("src").then(|| sampler.location());
            let dst1 = sampler.location_except(src1);
            let src2 = template.has("src2").then(|| sampler.location());
            let dst2 = sampler.location_except(src2);
            let mut values = vec![("obj", o1), ("dst", dst1), ("obj2", o2), ("dst2", dst2)];
            if let Some(s) = src1 {
                values.push(("src", s));
            }
            if let Some(s) = src2 {
                values.push(("src2", s));
            }
            let units = [Unit::pick_place(o1, src1, dst1), Unit::pick_place(o2, src2, dst2)];
            let seed = sampler.world_seed();
            task_from_units(id, template.fill(&values), class, &units, seed, base_metadata(&template.id))
        }
        other => unreachable!("{other} is not a core class"),
    }
}

/// `n_per_class` tasks of each of Pick, PickPlace and PickPlace2.
pub fn generate_core(bank: &VocabBank, n_per_class: usize, seed: u64) -> Result<Vec<TaskInstance>, TaskGenError> {
    bank.validate()?;
    if n_per_class == 0 {
        return Err(TaskGenError::InvalidRequest("n_per_class must be at least 1".into()));
    }
    let mut tasks = Vec::with_capacity(3 * n_per_class);
    for class in [TaskClass::Pick, TaskClass::PickPlace, TaskClass::PickPlace2] {
        let mut sampler = Sampler { bank, rng: rng_for(seed, &format!("core/{class}")) };
        for i in 0..n_per_class {
            tasks.push(core_task(&mut sampler, class, format!("{class}-{:04}", i + 1)));
        }
    }
    Ok(tasks)
}

const CONNECTIVES: [&str; 2] = [" and then ", ", and then "];

/// Number of pick-and-place units and whether a trailing pick unit is needed
/// to reach exactly `length` steps.
pub fn composition(length: usize) -> Result<(usize, bool), TaskGenError> {
    if !(2..=16).contains(&length) || !length.is_multiple_of(2) {
        return Err(TaskGenError::UnreachableLength(length));
    }
    Ok((length / 4, length % 4 == 2))
}

fn composite_task(sampler: &mut Sampler<'_>, length: usize, id: String) -> Result<TaskInstance, TaskGenError> {
    let (n_pp, trailing_pick) = composition(length)?;
    let mut used = BTreeSet::new();
    let mut clauses = Vec::new();
    let mut units = Vec::new();
    let mut template_ids = Vec::new();
    let classes = std::iter::repeat_n(TemplateClass::PickPlace, n_pp)
        .chain(trailing_pick.then_some(TemplateClass::Pick));
    for class in classes {
        let (text, unit, tid) = sampler.clause(class, &mut used);
        clauses.push(text);
        units.push(unit);
        template_ids.push(tid.to_string());
    }
    let mut instruction = clauses[0].clone();
    for clause in &clauses[1..] {
        instruction.push_str(CONNECTIVES.choose(&mut sampler.rng).expect("non-empty"));
        instruction.push_str(clause);
    }
    let seed = sampler.world_seed();
    let metadata = BTreeMap::from([("template_ids".to_string(), json!(template_ids))]);
    Ok(task_from_units(id, instruction, TaskClass::Composite(length), &units, seed, metadata))
}

/// Long-horizon tasks: chains of pick-and-place units, plus one trailing pick
/// unit when `length % 4 == 2`.
pub fn compose_long_horizon(
    bank: &VocabBank,
    lengths: &[usize],
    n_per_length: usize,
    seed: u64,
) -> Result<Vec<TaskInstance>, TaskGenError> {
    bank.validate()?;
    for &len in lengths {
        composition(len)?;
    }
    let mut tasks = Vec::with_capacity(lengths.len() * n_per_length);
    for &length in lengths {
        let mut sampler = Sampler { bank, rng: rng_for(derive_seed(seed, length as u64), "lengths") };
        for i in 0..n_per_length {
            tasks.push(composite_task(&mut sampler, length, format!("len{length:02}-{:04}", i + 1))?);
        }
    }
    Ok(tasks)
}

/// All even lengths from 2 to 16.
pub fn standard_lengths() -> Vec<usize> {
    (2..=16).step_by(2).collect()
}

/// Instruction over a collective noun paired with the members actually
/// placed in the world.
pub fn ambiguous_task(
    id: impl Into<String>,
    instruction: impl Into<String>,
    collective: &str,
    members: &[&str],
    src: &str,
    dst: &str,
    world_seed: u64,
) -> TaskInstance {
    let units: Vec<Unit> = members.iter().map(|m| Unit::pick_place(m, Some(src), dst)).collect();
    let names: Vec<String> = members.iter().map(|m| m.to_string()).collect();
    let metadata = BTreeMap::from([
        ("collective".to_string(), json!(collective)),
        ("members".to_string(), json!(names)),
        ("member_instances".to_string(), json!(instance_names(&names))),
    ]);
    task_from_units(id, instruction, TaskClass::Ambiguous, &units, world_seed, metadata)
}

pub fn generate_ambiguous(bank: &VocabBank, n: usize, seed: u64) -> Result<Vec<TaskInstance>, TaskGenError> {
    bank.validate()?;
    if bank.collectives.is_empty() {
        return Err(TaskGenError::InvalidRequest("bank has no collectives".into()));
    }
    if bank.templates_of(TemplateClass::Ambiguous).is_empty() {
        return Err(TaskGenError::InvalidRequest("bank has no ambiguous templates".into()));
    }
    let mut sampler = Sampler { bank, rng: rng_for(seed, "ambiguous") };
    let groups: Vec<(&String, &Vec<String>)> = bank.collectives.iter().collect();
    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let template = sampler.template(TemplateClass::Ambiguous);
        let (group, pool) = *groups.choose(&mut sampler.rng).expect("non-empty");
        let count = sampler.rng.random_range(1..=pool.len().min(3));
        let mut members: Vec<&str> = pool.choose_multiple(&mut sampler.rng, count).map(String::as_str).collect();
        if sampler.rng.random_bool(0.25) {
            let dup = members[sampler.rng.random_range(0..members.len())];
            members.push(dup);
            members.sort_by_key(|m| pool.iter().position(|p| p == m));
        }
        let src = sampler.location();
        let dst = sampler.location_except(Some(src));
        let text = template.fill(&[("group", group), ("src", src), ("dst", dst)]);
        let seed = sampler.world_seed();
        let mut task = ambiguous_task(format!("ambiguous-{:04}", i + 1), text, group, &members, src, dst, seed);
        task.metadata.insert("template_id".into(), json!(template.id));
        tasks.push(task);
    }
    Ok(tasks)
}

/// Twenty fixed tasks covering every class, including the worked examples
/// used throughout the documentation.
pub fn smoke_suite(bank: &VocabBank) -> Result<Vec<TaskInstance>, TaskGenError> {
    bank.validate()?;
    let mut tasks = vec![
        task_from_units(
            "smoke-01",
            "pick up the pillow from the floor and put it on the couch",
            TaskClass::PickPlace,
            &[Unit::pick_place("pillow", Some("floor"), "couch")],
            101,
            BTreeMap::new(),
        ),
        task_from_units(
            "smoke-02",
            "pick up the bowl and put it on the table, and then place the spoon there as well",
            TaskClass::PickPlace2,
            &[Unit::pick_place("bowl", None, "table"), Unit::pick_place("spoon", None, "table")],
            102,
            BTreeMap::new(),
        ),
        task_from_units(
            "smoke-03",
            "put the toy cube in the white box",
            TaskClass::PickPlace,
            &[Unit::pick_place("toy cube", None, "white box")],
            103,
            BTreeMap::new(),
        ),
        ambiguous_task(
            "smoke-04",
            "pick up the clothes from the floor and place them in the drawer",
            "clothes",
            &["shirt", "jeans"],
            "floor",
            "drawer",
            104,
        ),
        ambiguous_task(
            "smoke-05",
            "put all the toys from the floor into the white box",
            "toys",
            &["toy cube", "teddy bear"],
            "floor",
            "white box",
            105,
        ),
        ambiguous_task(
            "smoke-06",
            "move all clothes from the couch to the closet",
            "clothes",
            &["shirt", "shirt", "socks"],
            "couch",
            "closet",
            106,
        ),
        task_from_units(
            "smoke-07",
            "grab the green apple from the kitchen counter",
            TaskClass::Pick,
            &[Unit::pick("green apple", Some("kitchen counter"))],
            107,
            BTreeMap::new(),
        ),
    ];
    let core = generate_core(bank, 2, 7)?;
    let picks = core.iter().filter(|t| t.task_class == TaskClass::Pick).take(2);
    let places = core.iter().filter(|t| t.task_class == TaskClass::PickPlace).take(2);
    let doubles = core.iter().filter(|t| t.task_class == TaskClass::PickPlace2).take(1);
    let lengths = compose_long_horizon(bank, &standard_lengths(), 1, 7)?;
    for task in picks.chain(places).chain(doubles).chain(lengths.iter()) {
        let mut task = task.clone();
        task.metadata.insert("source_id".into(), json!(task.id));
        task.id = format!("smoke-{:02}", tasks.len() + 1);
        tasks.push(task);
    }
    Ok(tasks)
}

/// One JSON object per line, newline-terminated.
pub fn to_jsonl(tasks: &[TaskInstance]) -> String {
    tasks
        .iter()
        .map(|t| serde_json::to_string(t).expect("task serializes") + "\n")
        .collect()
}

pub fn from_jsonl(text: &str) -> Result<Vec<TaskInstance>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub suite: String,
    pub seed: u64,
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub params: Value,
    pub bank_sha256: String,
    pub dataset_sha256: String,
    pub notes: Vec<String>,
}

impl DatasetManifest {
    pub fn new(suite: &str, seed: u64, params: Value, bank: &VocabBank, tasks: &[TaskInstance]) -> Self {
        let mut counts = BTreeMap::new();
        for t in tasks {
            *counts.entry(t.task_class.to_string()).or_insert(0) += 1;
        }
        Self {
            suite: suite.to_string(),
            seed,
            total: tasks.len(),
            counts,
            params,
            bank_sha256: bank.hash(),
            dataset_sha256: hex::encode(Sha256::digest(to_jsonl(tasks).as_bytes())),
            notes: vec![
                "composite tasks place the 2-step pick unit only at the end of the chain".into(),
                "locations omitted by a template appear as 'unspecified' in ground truth".into(),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan_dsl::{validate_plan, SkillRegistry};

    #[test]
    fn core_counts_and_determinism() {
        let bank = VocabBank::bundled();
        let a = generate_core(&bank, 200, 42).unwrap();
        assert_eq!(a.len(), 600);
        for class in [TaskClass::Pick, TaskClass::PickPlace, TaskClass::PickPlace2] {
            assert_eq!(a.iter().filter(|t| t.task_class == class).count(), 200);
        }
        let b = generate_core(&bank, 200, 42).unwrap();
        assert_eq!(to_jsonl(&a), to_jsonl(&b));
        let c = generate_core(&bank, 200, 43).unwrap();
        assert_ne!(to_jsonl(&a), to_jsonl(&c));
    }

    #[test]
    fn core_plan_shapes() {
        let bank = VocabBank::bundled();
        let registry = SkillRegistry::household();
        for t in generate_core(&bank, 50, 1).unwrap() {
            let plan = t.gt_plan.as_ref().unwrap();
            assert!(validate_plan(plan, &registry).is_valid());
            let skills: Vec<&str> = plan.actions.iter().map(|a| a.skill.as_str()).collect();
            let expected: &[&str] = match t.task_class {
                TaskClass::Pick => &["move_to", "pick_up"],
                TaskClass::PickPlace => &["move_to", "pick_up", "move_to", "put"],
                _ => &["move_to", "pick_up", "move_to", "put", "move_to", "pick_up", "move_to", "put"],
            };
            assert_eq!(skills, expected, "{}", t.id);
        }
    }

    #[test]
    fn pillow_pick_ground_truth() {
        let task = task_from_units(
            "p",
            "pick up the pillow from the floor",
            TaskClass::Pick,
            &[Unit::pick("pillow", Some("floor"))],
            1,
            BTreeMap::new(),
        );
        assert_eq!(
            task.gt_plan.unwrap().actions,
            vec![Action::new("move_to", ["pillow", "floor"]), Action::new("pick_up", ["pillow", "floor"])]
        );
    }

    #[test]
    fn missing_source_is_unspecified() {
        let bank = VocabBank::bundled();
        let tasks = generate_core(&bank, 60, 5).unwrap();
        let t = tasks
            .iter()
            .find(|t| t.task_class == TaskClass::Pick && t.scene[0].location.is_none())
            .expect("some pick template omits the source");
        assert!(t.gt_plan.as_ref().unwrap().actions.iter().all(|a| a.args[1] == UNSPECIFIED));
    }

    #[test]
    fn long_horizon_lengths() {
        let bank = VocabBank::bundled();
        let tasks = compose_long_horizon(&bank, &standard_lengths(), 200, 42).unwrap();
        assert_eq!(tasks.len(), 1600);
        for t in &tasks {
            let TaskClass::Composite(k) = t.task_class else { panic!() };
            assert_eq!(t.gt_len(), Some(k));
            let names: BTreeSet<_> = t.scene.iter().map(|s| bank.object(&s.name).unwrap().base()).collect();
            assert_eq!(names.len(), t.scene.len(), "objects distinct in {}", t.id);
            if k % 4 == 2 {
                assert_eq!(t.gt_plan.as_ref().unwrap().actions.last().unwrap().skill, "pick_up");
            }
            if t.scene.len() > 1 {
                assert!(t.instruction.contains("and then"), "{}", t.instruction);
            }
        }
    }

    #[test]
    fn unreachable_lengths() {
        let bank = VocabBank::bundled();
        for bad in [0, 1, 3, 18, 7] {
            assert_eq!(
                compose_long_horizon(&bank, &[bad], 1, 0).unwrap_err(),
                TaskGenError::UnreachableLength(bad)
            );
        }
    }

    #[test]
    fn length_streams_are_independent() {
        let bank = VocabBank::bundled();
        let all = compose_long_horizon(&bank, &[2, 4, 6], 5, 9).unwrap();
        let only6 = compose_long_horizon(&bank, &[6], 5, 9).unwrap();
        assert_eq!(&all[10..], &only6[..]);
    }

    #[test]
    fn ambiguous_examples() {
        let clothes = ambiguous_task(
            "a",
            "put all the clothes from the floor into the drawer",
            "clothes",
            &["shirt", "jeans"],
            "floor",
            "drawer",
            3,
        );
        assert_eq!(clothes.gt_len(), Some(8));
        assert_eq!(clothes.metadata["members"], json!(["shirt", "jeans"]));

        let single = ambiguous_task("b", "x", "toys", &["toy car"], "floor", "shelf", 3);
        assert_eq!(single.gt_len(), Some(4));

        let dup = ambiguous_task("c", "x", "clothes", &["shirt", "shirt"], "floor", "closet", 3);
        let args: BTreeSet<_> = dup.gt_plan.unwrap().actions.iter().map(|a| a.args[0].clone()).collect();
        assert_eq!(args, BTreeSet::from(["shirt_1".to_string(), "shirt_2".to_string()]));
    }

    #[test]
    fn generated_ambiguous_are_consistent() {
        let bank = VocabBank::bundled();
        for t in generate_ambiguous(&bank, 100, 11).unwrap() {
            let members = t.metadata["members"].as_array().unwrap();
            assert_eq!(t.gt_len(), Some(4 * members.len()));
            let group = t.metadata["collective"].as_str().unwrap();
            assert!(t.instruction.contains(group));
        }
    }

    #[test]
    fn smoke_suite_has_twenty() {
        let suite = smoke_suite(&VocabBank::bundled()).unwrap();
        assert_eq!(suite.len(), 20);
        let ids: BTreeSet<_> = suite.iter().map(|t| t.id.clone()).collect();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn jsonl_roundtrip() {
        let tasks = generate_core(&VocabBank::bundled(), 3, 1).unwrap();
        assert_eq!(from_jsonl(&to_jsonl(&tasks)).unwrap(), tasks);
    }

    #[test]
    fn task_class_strings() {
        for c in [TaskClass::Pick, TaskClass::Composite(14), TaskClass::FeasibilityNegative] {
            assert_eq!(c.to_string().parse::<TaskClass>().unwrap(), c);
        }
        assert!("composite_x".parse::<TaskClass>().is_err());
    }
}
