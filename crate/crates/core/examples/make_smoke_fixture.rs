//! Regenerates `fixtures/smoke`: the 20-task smoke dataset, its golden
//! script and a config that runs it offline.
//!
//! cargo run -p help-core --example make_smoke_fixture [-- <dir>]

use std::path::PathBuf;

use help_core::agents::Agents;
use help_core::harness::golden::golden_script;
use help_core::harness::{generate_suite, write_dataset, Suite, SuiteParams};
use help_core::task_gen::VocabBank;

const CONFIG: &str = r#"# Offline smoke run on the golden scripted backend.
seed = 42
dataset = "dataset.jsonl"
parallelism = 4

[backend]
kind = "scripted"
script = "script.json"

[pipeline]
mode = "help"
selection = "similarity"
exemplars = 5
grounding = true
threshold = 0.35
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/smoke"));
    let bank = VocabBank::bundled();
    let (tasks, manifest) = generate_suite(Suite::Smoke, &SuiteParams::default(), &bank, 42)?;
    write_dataset(&dir, &tasks, &manifest)?;
    let script = golden_script(&tasks, &bank, &Agents::bundled());
    std::fs::write(dir.join("script.json"), script.to_json())?;
    std::fs::write(dir.join("config.toml"), CONFIG)?;
    println!("wrote {} tasks to {}", tasks.len(), dir.display());
    Ok(())
}
