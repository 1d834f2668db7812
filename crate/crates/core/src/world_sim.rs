//! Deterministic household world: object store, skill execution and goal
//! checks.
//!
//! Instances are always indexed (`shirt_1`, `shirt_2`). Plans may address an
//! object by instance name, by full name (`green apple`) or by base type
//! (`apple`); exact names win over base types, then enumeration order
//! decides. The placeholder location `unspecified` resolves the same way.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::plan_dsl::{Action, Plan, UNSPECIFIED};
use crate::task_gen::{GoalTarget, TaskInstance, VocabBank};

pub const START: &str = "start";

/// `name_k` for the k-th occurrence of each name.
pub fn instance_names(names: &[String]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    names
        .iter()
        .map(|n| {
            let k = seen.entry(n.as_str()).or_insert(0);
            *k += 1;
            format!("{n}_{k}")
        })
        .collect()
}

/// How each object is referred to in plans and feedback: the plain name when
/// it is unique, the instance name otherwise.
pub fn instance_labels(names: &[String]) -> Vec<String> {
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for n in names {
        *totals.entry(n.as_str()).or_insert(0) += 1;
    }
    names
        .iter()
        .zip(instance_names(names))
        .map(|(n, inst)| if totals[n.as_str()] > 1 { inst } else { n.clone() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecError {
    #[error("hand is full (holding {holding})")]
    HandFull { holding: String },
    #[error("hand is empty")]
    HandEmpty,
    #[error("no `{object}` at {location}")]
    ObjectNotHere { object: String, location: String },
    #[error("robot is at {robot_at}, not at {location}")]
    RobotNotAt { location: String, robot_at: String },
    #[error("holding {holding}, not `{object}`")]
    WrongObject { object: String, holding: String },
    #[error("no object matches `{object}`")]
    NoSuchObject { object: String },
    #[error("no location named `{location}`")]
    NoSuchLocation { location: String },
    #[error("cannot execute `{skill}` with {arity} argument(s)")]
    UnsupportedAction { skill: String, arity: usize },
    #[error("grasp of {object} failed")]
    GraspFailed { object: String },
}

impl ExecError {
    /// Coarse precondition class.
    pub fn class(&self) -> &'static str {
        match self {
            ExecError::HandFull { .. } => "HandFull",
            ExecError::HandEmpty => "HandEmpty",
            ExecError::ObjectNotHere { .. } | ExecError::RobotNotAt { .. } | ExecError::WrongObject { .. } => {
                "ObjectNotHere"
            }
            ExecError::NoSuchObject { .. } => "NoSuchObject",
            ExecError::NoSuchLocation { .. } => "NoSuchLocation",
            ExecError::UnsupportedAction { .. } => "UnsupportedAction",
            ExecError::GraspFailed { .. } => "GraspFailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("task references `{0}`, which is not in the vocabulary")]
    VocabMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectState {
    pub instance: String,
    pub name: String,
    pub base: String,
    pub attributes: Vec<String>,
    /// `None` while held.
    pub location: Option<String>,
}

/// Drops a grasped object with fixed probability. Off unless configured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureInjector {
    pub drop_per_mille: u32,
    rng: ChaCha8Rng,
}

impl FailureInjector {
    pub fn new(drop_probability: f64, seed: u64) -> Self {
        Self {
            drop_per_mille: (drop_probability.clamp(0.0, 1.0) * 1000.0).round() as u32,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn drops(&mut self) -> bool {
        self.rng.random_range(0..1000) < self.drop_per_mille
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub locations: Vec<String>,
    pub objects: Vec<ObjectState>,
    pub robot_at: String,
    pub holding: Option<String>,
    #[serde(default)]
    pub collectives: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    pub failure: Option<FailureInjector>,
}

/// One entry of an inventory listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub instance: String,
    /// Name used in plans: plain when unique in the world, indexed otherwise.
    pub label: String,
    pub base: String,
    pub attributes: Vec<String>,
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFailure {
    /// 1-based step index.
    pub step: usize,
    pub reason: ExecError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub success: bool,
    pub steps_executed: usize,
    pub failure: Option<StepFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub action: String,
    pub pre_state_hash: String,
    pub result: Result<(), ExecError>,
}

fn singular(word: &str) -> Option<&str> {
    word.strip_suffix("es").into_iter().chain(word.strip_suffix('s')).next()
}

impl WorldState {
    /// Builds the world paired with `task`: every scene object at its stated
    /// location (or a seeded one that is not its goal destination), plus a
    /// few seeded distractors whose types do not occur in the task.
    pub fn init(task: &TaskInstance, bank: &VocabBank) -> Result<Self, WorldError> {
        let mut rng = ChaCha8Rng::seed_from_u64(task.world_seed);
        let names: Vec<String> = task.scene.iter().map(|s| s.name.clone()).collect();
        let instances = instance_names(&names);

        let mut used_bases = BTreeSet::new();
        let mut objects = Vec::new();
        for (scene, instance) in task.scene.iter().zip(&instances) {
            let entry = bank.object(&scene.name).ok_or_else(|| WorldError::VocabMismatch(scene.name.clone()))?;
            let location = match &scene.location {
                Some(l) if bank.is_location(l) => l.clone(),
                Some(l) => return Err(WorldError::VocabMismatch(l.clone())),
                None => {
                    let avoid: Vec<&str> = task
                        .goals
                        .iter()
                        .filter(|g| &g.object == instance)
                        .filter_map(|g| match &g.target {
                            GoalTarget::At(l) => Some(l.as_str()),
                            GoalTarget::Held => None,
                        })
                        .collect();
                    bank.locations
                        .iter()
                        .filter(|l| !avoid.contains(&l.as_str()))
                        .choose(&mut rng)
                        .expect("more than one location")
                        .clone()
                }
            };
            used_bases.insert(entry.base().to_string());
            objects.push(ObjectState {
                instance: instance.clone(),
                name: entry.name.clone(),
                base: entry.base().to_string(),
                attributes: entry.attributes(),
                location: Some(location),
            });
        }
        for goal in &task.goals {
            if let GoalTarget::At(l) = &goal.target {
                if !bank.is_location(l) {
                    return Err(WorldError::VocabMismatch(l.clone()));
                }
            }
        }

        let excluded: BTreeSet<&str> = task
            .metadata
            .get("collective")
            .and_then(|c| c.as_str())
            .and_then(|c| bank.collectives.get(c))
            .map(|m| m.iter().map(String::as_str).collect())
            .unwrap_or_default();
        let candidates: Vec<_> = bank
            .objects
            .iter()
            .filter(|o| !used_bases.contains(o.base()) && !excluded.contains(o.name.as_str()))
            .collect();
        let n_distractors = rng.random_range(2..=5).min(candidates.len());
        let mut distractors: Vec<_> = candidates.choose_multiple(&mut rng, n_distractors).collect();
        distractors.retain(|d| used_bases.insert(d.base().to_string()));
        for entry in distractors {
            let location = bank.locations.choose(&mut rng).expect("locations").clone();
            objects.push(ObjectState {
                instance: format!("{}_1", entry.name),
                name: entry.name.clone(),
                base: entry.base().to_string(),
                attributes: entry.attributes(),
                location: Some(location),
            });
        }

        Ok(Self {
            locations: bank.locations.clone(),
            objects,
            robot_at: START.to_string(),
            holding: None,
            collectives: bank.collectives.clone(),
            failure: None,
        })
    }

    pub fn with_failure_injection(mut self, injector: FailureInjector) -> Self {
        self.failure = Some(injector);
        self
    }

    pub fn is_location(&self, name: &str) -> bool {
        self.locations.iter().any(|l| l == name)
    }

    pub fn object(&self, instance: &str) -> Option<&ObjectState> {
        self.objects.iter().find(|o| o.instance == instance)
    }

    fn labels(&self) -> Vec<String> {
        let names: Vec<String> = self.objects.iter().map(|o| o.name.clone()).collect();
        instance_labels(&names)
    }

    /// Indices of objects matching `term`: exact instance or full-name
    /// matches first, then base-type matches, each in enumeration order.
    fn matching(&self, term: &str) -> Vec<usize> {
        let labels = self.labels();
        let exact = self
            .objects
            .iter()
            .enumerate()
            .filter(|(i, o)| o.instance == term || o.name == term || labels[*i] == term)
            .map(|(i, _)| i);
        let by_base = self.objects.iter().enumerate().filter(|(_, o)| o.base == term).map(|(i, _)| i);
        let mut out: Vec<usize> = Vec::new();
        for i in exact.chain(by_base) {
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out
    }

    fn query_matches(&self, obj: &ObjectState, label: &str, query: &str) -> bool {
        let candidates: Vec<&str> = std::iter::once(query).chain(singular(query)).collect();
        candidates.iter().any(|q| {
            obj.instance == *q
                || obj.name == *q
                || obj.base == *q
                || label == *q
                || self.collectives.get(*q).is_some_and(|m| m.contains(&obj.name))
        })
    }

    /// Inventory, optionally filtered by a noun phrase matched against
    /// instance name, full name, base type, or collective membership.
    pub fn list_objects(&self, query: Option<&str>) -> Vec<ObjectInfo> {
        let query = query.map(crate::plan_dsl::normalize_arg).filter(|q| !q.is_empty());
        self.objects
            .iter()
            .zip(self.labels())
            .filter(|(o, label)| query.as_deref().is_none_or(|q| self.query_matches(o, label, q)))
            .map(|(o, label)| ObjectInfo {
                instance: o.instance.clone(),
                label,
                base: o.base.clone(),
                attributes: o.attributes.clone(),
                location: o.location.clone(),
            })
            .collect()
    }

    fn check_location(&self, location: &str) -> Result<(), ExecError> {
        if self.is_location(location) {
            Ok(())
        } else {
            Err(ExecError::NoSuchLocation { location: location.to_string() })
        }
    }

    /// Applies one action in place. On error the state is unchanged.
    pub fn apply(&mut self, action: &Action) -> Result<(), ExecError> {
        let args: Vec<&str> = action.args.iter().map(String::as_str).collect();
        match (action.skill.as_str(), args.as_slice()) {
            ("done", []) => Ok(()),
            ("move_to", [object, location]) => self.move_to(object, location),
            ("pick_up", [object, location]) => self.pick_up(object, location),
            ("put", [object, location]) => self.put(object, location),
            (skill, args) => Err(ExecError::UnsupportedAction { skill: skill.to_string(), arity: args.len() }),
        }
    }

    fn move_to(&mut self, object: &str, location: &str) -> Result<(), ExecError> {
        if location != UNSPECIFIED {
            self.check_location(location)?;
            self.robot_at = location.to_string();
            return Ok(());
        }
        if self.is_location(object) {
            self.robot_at = object.to_string();
            return Ok(());
        }
        let matches = self.matching(object);
        if matches.is_empty() {
            return Err(ExecError::NoSuchObject { object: object.to_string() });
        }
        if let Some(loc) = matches.iter().find_map(|&i| self.objects[i].location.clone()) {
            self.robot_at = loc;
        }
        Ok(())
    }

    fn pick_up(&mut self, object: &str, location: &str) -> Result<(), ExecError> {
        if let Some(held) = &self.holding {
            return Err(ExecError::HandFull { holding: held.clone() });
        }
        if location != UNSPECIFIED {
            self.check_location(location)?;
            if self.robot_at != location {
                return Err(ExecError::RobotNotAt { location: location.to_string(), robot_at: self.robot_at.clone() });
            }
        }
        let matches = self.matching(object);
        if matches.is_empty() {
            return Err(ExecError::NoSuchObject { object: object.to_string() });
        }
        let here = matches
            .into_iter()
            .find(|&i| self.objects[i].location.as_deref() == Some(self.robot_at.as_str()))
            .ok_or_else(|| ExecError::ObjectNotHere { object: object.to_string(), location: self.robot_at.clone() })?;
        if let Some(injector) = self.failure.as_mut() {
            if injector.drops() {
                return Err(ExecError::GraspFailed { object: self.objects[here].instance.clone() });
            }
        }
        self.objects[here].location = None;
        self.holding = Some(self.objects[here].instance.clone());
        Ok(())
    }

    fn put(&mut self, object: &str, location: &str) -> Result<(), ExecError> {
        let Some(held) = self.holding.clone() else {
            return Err(ExecError::HandEmpty);
        };
        let held_idx = self.objects.iter().position(|o| o.instance == held).expect("held object exists");
        if !self.matching(object).contains(&held_idx) {
            return Err(ExecError::WrongObject { object: object.to_string(), holding: held });
        }
        let target = if location == UNSPECIFIED { self.robot_at.clone() } else { location.to_string() };
        self.check_location(&target)?;
        if self.robot_at != target {
            return Err(ExecError::RobotNotAt { location: target, robot_at: self.robot_at.clone() });
        }
        self.objects[held_idx].location = Some(target);
        self.holding = None;
        Ok(())
    }

    /// Pure single-step transition.
    pub fn execute_action(&self, action: &Action) -> Result<WorldState, ExecError> {
        let mut next = self.clone();
        next.apply(action)?;
        Ok(next)
    }

    /// Runs the plan in order and stops at the first failure, with no recovery.
    pub fn execute_plan(&mut self, plan: &Plan) -> ExecOutcome {
        self.execute_plan_traced(plan).0
    }

    pub fn execute_plan_traced(&mut self, plan: &Plan) -> (ExecOutcome, Vec<TraceStep>) {
        let mut trace = Vec::with_capacity(plan.len());
        for (i, action) in plan.actions.iter().enumerate() {
            let pre_state_hash = self.state_hash();
            let result = self.apply(action);
            trace.push(TraceStep { step: i + 1, action: action.to_string(), pre_state_hash, result: result.clone() });
            if let Err(reason) = result {
                let outcome = ExecOutcome {
                    success: false,
                    steps_executed: i,
                    failure: Some(StepFailure { step: i + 1, reason }),
                };
                return (outcome, trace);
            }
        }
        (ExecOutcome { success: true, steps_executed: plan.len(), failure: None }, trace)
    }

    /// True iff the task has goals and every one holds.
    pub fn goal_satisfied(&self, task: &TaskInstance) -> bool {
        !task.goals.is_empty()
            && task.goals.iter().all(|g| match &g.target {
                GoalTarget::Held => self.holding.as_deref() == Some(g.object.as_str()),
                GoalTarget::At(l) => self.object(&g.object).and_then(|o| o.location.as_deref()) == Some(l.as_str()),
            })
    }

    /// First 16 hex digits of the SHA-256 of the JSON snapshot.
    pub fn state_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("state serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

impl fmt::Display for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "robot at {}, holding {}", self.robot_at, self.holding.as_deref().unwrap_or("nothing"))?;
        for o in &self.objects {
            writeln!(f, "  {} @ {}", o.instance, o.location.as_deref().unwrap_or("gripper"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_gen::{ambiguous_task, task_from_units, TaskClass, Unit};

    fn bank() -> VocabBank {
        VocabBank::bundled()
    }

    fn pillow_task() -> TaskInstance {
        task_from_units(
            "pillow",
            "pick up the pillow from the floor and put it on the couch",
            TaskClass::PickPlace,
            &[Unit::pick_place("pillow", Some("floor"), "couch")],
            11,
            Default::default(),
        )
    }

    fn clothes_task() -> TaskInstance {
        ambiguous_task("c", "put all the clothes from the floor into the drawer", "clothes", &["shirt", "jeans"], "floor", "drawer", 5)
    }

    #[test]
    fn naming() {
        let names: Vec<String> = ["shirt", "jeans", "shirt"].iter().map(|s| s.to_string()).collect();
        assert_eq!(instance_names(&names), vec!["shirt_1", "jeans_1", "shirt_2"]);
        assert_eq!(instance_labels(&names), vec!["shirt_1", "jeans", "shirt_2"]);
    }

    #[test]
    fn init_pillow_world() {
        let world = WorldState::init(&pillow_task(), &bank()).unwrap();
        assert_eq!(world.object("pillow_1").unwrap().location.as_deref(), Some("floor"));
        assert!(world.is_location("couch"));
        assert!(world.objects.iter().all(|o| o.location.as_deref() != Some("gripper")));
        assert_eq!(world.robot_at, START);
        assert_eq!(world, WorldState::init(&pillow_task(), &bank()).unwrap());
    }

    #[test]
    fn init_clothes_world() {
        let world = WorldState::init(&clothes_task(), &bank()).unwrap();
        for inst in ["shirt_1", "jeans_1"] {
            assert_eq!(world.object(inst).unwrap().location.as_deref(), Some("floor"));
        }
        let found: Vec<_> = world.list_objects(Some("clothes")).into_iter().map(|o| o.instance).collect();
        assert_eq!(found, vec!["shirt_1", "jeans_1"]);
    }

    #[test]
    fn vocab_mismatch() {
        let mut task = pillow_task();
        task.scene[0].name = "kitten".into();
        assert_eq!(WorldState::init(&task, &bank()), Err(WorldError::VocabMismatch("kitten".into())));
    }

    #[test]
    fn toys_query() {
        let task = task_from_units(
            "t",
            "put the toy cube in the white box",
            TaskClass::PickPlace,
            &[Unit::pick_place("toy cube", None, "white box")],
            3,
            Default::default(),
        );
        let world = WorldState::init(&task, &bank()).unwrap();
        let toys: Vec<_> = world.list_objects(Some("toys")).into_iter().map(|o| o.instance).collect();
        assert_eq!(toys, vec!["toy cube_1"]);
        assert!(world.list_objects(Some("spaceship")).is_empty());
        assert_eq!(world.list_objects(None).len(), world.objects.len());
    }

    #[test]
    fn pick_up_with_empty_hand() {
        let mut world = WorldState::init(&pillow_task(), &bank()).unwrap();
        world.robot_at = "floor".into();
        let next = world.execute_action(&Action::new("pick_up", ["pillow", "floor"])).unwrap();
        assert_eq!(next.holding.as_deref(), Some("pillow_1"));
        assert_eq!(next.object("pillow_1").unwrap().location, None);
    }

    #[test]
    fn put_requires_being_at_target() {
        let mut world = WorldState::init(&pillow_task(), &bank()).unwrap();
        world.robot_at = "floor".into();
        world.apply(&Action::new("pick_up", ["pillow", "floor"])).unwrap();
        let err = world.execute_action(&Action::new("put", ["pillow", "couch"])).unwrap_err();
        assert_eq!(err, ExecError::RobotNotAt { location: "couch".into(), robot_at: "floor".into() });
        assert_eq!(err.class(), "ObjectNotHere");
    }

    #[test]
    fn unspecified_resolves_to_first_instance() {
        let task = task_from_units(
            "t",
            "put the toy cube in the white box",
            TaskClass::PickPlace,
            &[Unit::pick_place("toy cube", None, "white box")],
            3,
            Default::default(),
        );
        let world = WorldState::init(&task, &bank()).unwrap();
        let cube_at = world.object("toy cube_1").unwrap().location.clone().unwrap();
        assert_ne!(cube_at, "white box");
        let next = world.execute_action(&Action::new("move_to", ["toy cube", "unspecified"])).unwrap();
        assert_eq!(next.robot_at, cube_at);
    }

    #[test]
    fn ground_truth_pillow_plan() {
        let task = pillow_task();
        let mut world = WorldState::init(&task, &bank()).unwrap();
        assert!(!world.goal_satisfied(&task));
        let outcome = world.execute_plan(task.gt_plan.as_ref().unwrap());
        assert_eq!(outcome, ExecOutcome { success: true, steps_executed: 4, failure: None });
        assert!(world.goal_satisfied(&task));
        assert_eq!(world.object("pillow_1").unwrap().location.as_deref(), Some("couch"));
    }

    #[test]
    fn plan_starting_with_put() {
        let mut world = WorldState::init(&pillow_task(), &bank()).unwrap();
        let plan = Plan::new(vec![Action::new("put", ["pillow", "couch"])], true);
        let outcome = world.execute_plan(&plan);
        assert!(!outcome.success);
        assert_eq!(outcome.steps_executed, 0);
        assert_eq!(outcome.failure, Some(StepFailure { step: 1, reason: ExecError::HandEmpty }));
    }

    #[test]
    fn location_name_as_move_target() {
        let mut world = WorldState::init(&pillow_task(), &bank()).unwrap();
        world.apply(&Action::new("move_to", ["couch", "unspecified"])).unwrap();
        assert_eq!(world.robot_at, "couch");
    }

    #[test]
    fn hand_full_and_unknown() {
        let mut world = WorldState::init(&clothes_task(), &bank()).unwrap();
        world.apply(&Action::new("move_to", ["shirt", "floor"])).unwrap();
        world.apply(&Action::new("pick_up", ["shirt", "floor"])).unwrap();
        assert!(matches!(world.apply(&Action::new("pick_up", ["jeans", "floor"])), Err(ExecError::HandFull { .. })));
        assert!(matches!(world.apply(&Action::new("put", ["jeans", "floor"])), Err(ExecError::WrongObject { .. })));
        assert!(matches!(world.apply(&Action::new("move_to", ["unicorn", "unspecified"])), Err(ExecError::NoSuchObject { .. })));
        assert!(matches!(world.apply(&Action::new("move_to", ["shirt", "garage"])), Err(ExecError::NoSuchLocation { .. })));
    }

    #[test]
    fn injected_failures_stop_execution() {
        let task = pillow_task();
        let mut world = WorldState::init(&task, &bank()).unwrap().with_failure_injection(FailureInjector::new(1.0, 0));
        let outcome = world.execute_plan(task.gt_plan.as_ref().unwrap());
        assert_eq!(outcome.steps_executed, 1);
        assert!(matches!(outcome.failure.unwrap().reason, ExecError::GraspFailed { .. }));
    }

    #[test]
    fn trace_records_every_step() {
        let task = clothes_task();
        let mut world = WorldState::init(&task, &bank()).unwrap();
        let (outcome, trace) = world.execute_plan_traced(task.gt_plan.as_ref().unwrap());
        assert!(outcome.success);
        assert_eq!(trace.len(), 8);
        assert_eq!(trace[0].action, "move_to('shirt', 'floor')");
        assert_ne!(trace[0].pre_state_hash, trace[1].pre_state_hash);
    }
}
