use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::Deserialize;
use serde_json::json;

use super::{compose_long_horizon, generate_core, standard_lengths, TaskClass, TaskGenError, TaskInstance, VocabBank};
use crate::seed::{derive_seed, rng_for};

const INFEASIBLE: &str = include_str!("../../data/infeasible.json");

pub const FEASIBILITY_SET_SIZE: usize = 200;

#[derive(Deserialize)]
struct CommandBank {
    commands: Vec<String>,
}

/// Built-in commands outside the pick-and-place skill set.
pub fn infeasible_commands() -> Vec<String> {
    serde_json::from_str::<CommandBank>(INFEASIBLE).expect("bundled command bank parses").commands
}

/// 100 feasible tasks sampled from core and long-horizon generation plus 100
/// infeasible commands, shuffled together.
pub fn generate_feasibility_set(bank: &VocabBank, seed: u64) -> Result<Vec<TaskInstance>, TaskGenError> {
    let half = FEASIBILITY_SET_SIZE / 2;
    let mut pool = generate_core(bank, 40, derive_seed(seed, 1))?;
    pool.extend(compose_long_horizon(bank, &standard_lengths(), 25, derive_seed(seed, 2))?);

    let mut rng = rng_for(seed, "feasibility");
    let mut tasks: Vec<TaskInstance> = pool
        .choose_multiple(&mut rng, half)
        .map(|t| {
            let mut t = t.clone();
            t.metadata.insert("source_id".into(), json!(t.id));
            t.metadata.insert("source_class".into(), json!(t.task_class.to_string()));
            t.task_class = TaskClass::FeasibilityPositive;
            t
        })
        .collect();

    let commands = infeasible_commands();
    for command in commands.choose_multiple(&mut rng, half) {
        tasks.push(TaskInstance {
            id: String::new(),
            instruction: command.clone(),
            task_class: TaskClass::FeasibilityNegative,
            gt_plan: None,
            world_seed: rng.random(),
            scene: Vec::new(),
            goals: Vec::new(),
            metadata: BTreeMap::new(),
        });
    }
    tasks.shuffle(&mut rng);
    for (i, t) in tasks.iter_mut().enumerate() {
        t.id = format!("feasibility-{:03}", i + 1);
    }
    Ok(tasks)
}
