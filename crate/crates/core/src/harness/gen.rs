use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::json;

use super::{write_json, write_text, HarnessError};
use crate::task_gen::{
    compose_long_horizon, generate_ambiguous, generate_core, generate_feasibility_set, smoke_suite, standard_lengths,
    to_jsonl, DatasetManifest, TaskGenError, TaskInstance, VocabBank,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Core,
    Lengths,
    Ambiguous,
    Feasibility,
    Smoke,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Core, Suite::Lengths, Suite::Ambiguous, Suite::Feasibility, Suite::Smoke];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Core => "core",
            Suite::Lengths => "lengths",
            Suite::Ambiguous => "ambiguous",
            Suite::Feasibility => "feasibility",
            Suite::Smoke => "smoke",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteParams {
    pub per_class: usize,
    pub per_length: usize,
    pub lengths: Vec<usize>,
    pub ambiguous: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self { per_class: 200, per_length: 200, lengths: standard_lengths(), ambiguous: 100 }
    }
}

pub fn generate_suite(
    suite: Suite,
    params: &SuiteParams,
    bank: &VocabBank,
    seed: u64,
) -> Result<(Vec<TaskInstance>, DatasetManifest), TaskGenError> {
    let (tasks, recorded) = match suite {
        Suite::Core => (generate_core(bank, params.per_class, seed)?, json!({ "per_class": params.per_class })),
        Suite::Lengths => (
            compose_long_horizon(bank, &params.lengths, params.per_length, seed)?,
            json!({ "per_length": params.per_length, "lengths": params.lengths }),
        ),
        Suite::Ambiguous => (generate_ambiguous(bank, params.ambiguous, seed)?, json!({ "n": params.ambiguous })),
        Suite::Feasibility => (generate_feasibility_set(bank, seed)?, json!({})),
        Suite::Smoke => (smoke_suite(bank)?, json!({})),
    };
    let manifest = DatasetManifest::new(&suite.to_string(), seed, recorded, bank, &tasks);
    Ok((tasks, manifest))
}

/// `dataset.jsonl` and `manifest.json` under `dir`.
pub fn write_dataset(dir: &Path, tasks: &[TaskInstance], manifest: &DatasetManifest) -> Result<(), HarnessError> {
    write_text(&dir.join("dataset.jsonl"), &to_jsonl(tasks))?;
    write_json(&dir.join("manifest.json"), manifest)
}
