//! Scripted responses that make every agent answer a dataset perfectly.
//! Used for offline smoke runs and for checking the pipeline wiring: with
//! this script the final plan of every task equals its ground truth.

use std::collections::BTreeMap;

use crate::agents::{AgentProfile, Agents};
use crate::llm_gateway::{ScriptRule, ScriptedBackend};
use crate::plan_dsl::{Action, Plan, UNSPECIFIED};
use crate::task_gen::{TaskClass, TaskInstance, VocabBank};
use crate::world_sim::WorldState;

pub const HLP_MARKER: &str = "High Level Planner";
pub const LLP_MARKER: &str = "Low Level Planner";
pub const FEEDBACK_MARKER: &str = "feedback agent";
pub const FEASIBILITY_MARKER: &str = "feasibility and safety";

/// Splits a ground-truth plan into its pick (2 step) and pick-and-place
/// (4 step) units.
pub fn split_units(plan: &Plan) -> Vec<Vec<Action>> {
    let actions: Vec<&Action> = plan.actions.iter().filter(|a| !a.is_done()).collect();
    let mut units = Vec::new();
    let mut i = 0;
    while i < actions.len() {
        let placed = actions.get(i + 3).is_some_and(|a| a.skill == "put")
            && actions.get(i + 2).is_some_and(|a| a.skill == "move_to");
        let n = if placed { 4 } else { 2.min(actions.len() - i) };
        units.push(actions[i..i + n].iter().map(|a| (*a).clone()).collect());
        i += n;
    }
    units
}

/// A plain sentence naming exactly one unit.
pub fn unit_sentence(unit: &[Action]) -> String {
    let object = unit[0].args.first().map(String::as_str).unwrap_or_default();
    let src = unit.get(1).and_then(|a| a.args.get(1)).filter(|s| s.as_str() != UNSPECIFIED);
    let mut s = format!("pick up the {object}");
    if let Some(src) = src {
        s.push_str(&format!(" from the {src}"));
    }
    if let Some(dst) = unit.get(3).and_then(|a| a.args.get(1)) {
        s.push_str(&format!(" and put it on the {dst}"));
    }
    s
}

fn numbered(lines: &[String]) -> String {
    lines.iter().enumerate().map(|(i, l)| format!("{}. {l}", i + 1)).collect::<Vec<_>>().join("\n")
}

fn user(profile: &AgentProfile, instruction: &str, objects: &[String]) -> String {
    profile.user_text(instruction, objects).expect("bundled templates render")
}

/// Builds the script for `tasks`. Rules are keyed on the agent's system
/// marker plus its rendered user text, longest needle first so no rule
/// shadows a more specific one.
pub fn golden_script(tasks: &[TaskInstance], bank: &VocabBank, agents: &Agents) -> ScriptedBackend {
    let mut rules: BTreeMap<(&str, String), String> = BTreeMap::new();
    let mut add = |marker: &'static str, needle: String, response: String| {
        rules.entry((marker, needle)).or_insert(response);
    };
    for task in tasks {
        if task.task_class == TaskClass::FeasibilityNegative {
            add(FEASIBILITY_MARKER, user(&agents.feasibility, &task.instruction, &[]), "Not feasible".into());
            continue;
        }
        let Some(gt) = &task.gt_plan else { continue };
        let collective = task.metadata.get("collective").and_then(|v| v.as_str());
        let objects = match (collective, WorldState::init(task, bank)) {
            (Some(c), Ok(world)) => world.list_objects(Some(c)).into_iter().map(|o| o.label).collect(),
            _ => Vec::new(),
        };
        add(
            FEEDBACK_MARKER,
            user(&agents.feedback, &task.instruction, &[]),
            match collective {
                Some(c) if !objects.is_empty() => format!("Query: {c}"),
                _ => "Query: none".into(),
            },
        );

        let units = split_units(gt);
        let subtasks: Vec<String> = match units.len() {
            1 => vec![task.instruction.clone()],
            _ => units.iter().map(|u| unit_sentence(u)).collect(),
        };
        add(HLP_MARKER, user(&agents.hlp, &task.instruction, &objects), numbered(&subtasks));
        for (subtask, unit) in subtasks.iter().zip(&units) {
            let plan = Plan::new(unit.clone(), true);
            add(LLP_MARKER, user(&agents.llp, subtask, &[]), plan.to_text());
        }
        if units.len() > 1 {
            // llp_only runs hand the whole instruction to the LLP.
            add(LLP_MARKER, user(&agents.llp, &task.instruction, &[]), gt.to_text());
        }
    }
    let mut rules: Vec<_> = rules.into_iter().collect();
    rules.sort_by(|a, b| b.0 .1.len().cmp(&a.0 .1.len()).then_with(|| a.0.cmp(&b.0)));
    let mut script: Vec<ScriptRule> =
        rules.into_iter().map(|((marker, needle), response)| ScriptRule::for_agent(marker, &needle, &response)).collect();
    script.push(ScriptRule::for_agent(FEASIBILITY_MARKER, "", "Feasible"));
    ScriptedBackend::new(script)
}

/// Agent profile markers as they appear in the bundled prompts.
pub fn markers_present(agents: &Agents) -> bool {
    [
        (&agents.hlp, HLP_MARKER),
        (&agents.llp, LLP_MARKER),
        (&agents.feedback, FEEDBACK_MARKER),
        (&agents.feasibility, FEASIBILITY_MARKER),
    ]
    .iter()
    .all(|(p, m)| p.profile.contains(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_gen::smoke_suite;

    #[test]
    fn units_and_sentences() {
        let bank = VocabBank::bundled();
        let tasks = smoke_suite(&bank).unwrap();
        let two = tasks.iter().find(|t| t.id == "smoke-02").unwrap();
        let units = split_units(two.gt_plan.as_ref().unwrap());
        assert_eq!(units.len(), 2);
        assert_eq!(unit_sentence(&units[0]), "pick up the bowl and put it on the table");
        for t in &tasks {
            let gt = t.gt_plan.as_ref().unwrap();
            assert_eq!(split_units(gt).iter().map(Vec::len).sum::<usize>(), gt.len());
        }
    }

    #[test]
    fn bundled_profiles_carry_markers() {
        assert!(markers_present(&Agents::bundled()));
    }
}
