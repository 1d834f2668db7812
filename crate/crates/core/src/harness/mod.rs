//! Experiment plumbing behind the command-line tool: configuration,
//! dataset generation, pipeline runs, evaluation and reports.

mod eval;
mod gen;
pub mod golden;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentProfile, Agents, EmbeddingScorer, PipelineConfig, Planner};
use crate::grounding::{Embedder, RemoteEmbedder, TrigramEmbedder};
use crate::llm_gateway::{ChatBackend, Decoding, Gateway, HttpBackend, HttpConfig, ScriptedBackend};
use crate::task_gen::{from_jsonl, TaskInstance, VocabBank};

pub use eval::{evaluate, EvalOptions, EvalSummary, FeasibilitySummary, SimSummary};
pub use gen::{generate_suite, write_dataset, Suite, SuiteParams};
pub use report::{compare_reports, render_markdown, render_table, ReportFile};
pub use run::{run_feasibility, run_tasks, RunKind, RunManifest, RunSummary, TaskTrace};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Data { path: path.into(), message: message.to_string() }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes through a temporary sibling so readers never see partial files.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_dataset(path: &Path) -> Result<(Vec<TaskInstance>, String), HarnessError> {
    let text = read_text(path)?;
    let tasks = from_jsonl(&text).map_err(|e| HarnessError::data(path, e))?;
    Ok((tasks, sha256_hex(text.as_bytes())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Scripted rules file.
    pub script: Option<PathBuf>,
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub stop: Vec<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let decoding = Decoding::default();
        let http = HttpConfig::default();
        Self {
            kind: BackendKind::Scripted,
            script: None,
            base_url: http.base_url,
            api_key_env: None,
            model: decoding.model,
            temperature: decoding.temperature,
            max_tokens: decoding.max_tokens,
            stop: decoding.stop,
            timeout_ms: decoding.timeout_ms,
            retries: http.retries,
            backoff_ms: http.backoff_ms,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    Trigram,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbedderKind,
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Trigram,
            base_url: "http://localhost:8001".into(),
            model: "sentence-encoder".into(),
            api_key_env: None,
            timeout_ms: 30_000,
        }
    }
}

/// Everything a run depends on. Read from TOML; every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Vocabulary bank; the bundled one when unset.
    pub bank: Option<PathBuf>,
    /// Directory with replacement `hlp.json`, `llp.json`, `feedback.json`
    /// and `feasibility.json` profiles.
    pub prompts: Option<PathBuf>,
    pub parallelism: usize,
    pub backend: BackendConfig,
    pub pipeline: PipelineConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dataset: None,
            out: None,
            bank: None,
            prompts: None,
            parallelism: 4,
            backend: BackendConfig::default(),
            pipeline: PipelineConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

fn env_key(var: &Option<String>) -> Option<String> {
    var.as_ref().and_then(|v| std::env::var(v).ok())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let mut config = Self::from_toml(&read_text(path)?).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.dataset,
            &mut config.out,
            &mut config.bank,
            &mut config.prompts,
            &mut config.backend.script,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of the settings that influence results; file locations are
    /// excluded so relocated runs compare equal.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.dataset = None;
        c.out = None;
        c.bank = None;
        c.prompts = None;
        c.backend.script = None;
        c.parallelism = 0;
        c.backend.concurrency = 0;
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let p = &self.pipeline;
        if !(p.threshold.is_finite()) {
            return Err(HarnessError::Config("pipeline.threshold must be finite".into()));
        }
        if p.exemplars == 0 {
            return Err(HarnessError::Config("pipeline.exemplars must be at least 1".into()));
        }
        if self.backend.temperature < 0.0 {
            return Err(HarnessError::Config("backend.temperature must be non-negative".into()));
        }
        for path in [&self.bank, &self.prompts, &self.backend.script].into_iter().flatten() {
            if !path.exists() {
                return Err(HarnessError::Config(format!("{} does not exist", path.display())));
            }
        }
        if self.backend.kind == BackendKind::Scripted && self.backend.script.is_none() {
            return Err(HarnessError::Config("the scripted backend needs backend.script".into()));
        }
        Ok(())
    }

    pub fn bank(&self) -> Result<VocabBank, HarnessError> {
        match &self.bank {
            Some(path) => VocabBank::from_path(path).map_err(|e| HarnessError::data(path, e)),
            None => Ok(VocabBank::bundled()),
        }
    }

    pub fn backend(&self) -> Result<Arc<dyn ChatBackend>, HarnessError> {
        let b = &self.backend;
        Ok(match b.kind {
            BackendKind::Scripted => {
                let path = b.script.as_ref().ok_or_else(|| HarnessError::Config("backend.script is not set".into()))?;
                Arc::new(ScriptedBackend::from_path(path).map_err(|e| HarnessError::data(path, e))?)
            }
            BackendKind::Http => Arc::new(HttpBackend::new(HttpConfig {
                base_url: b.base_url.clone(),
                api_key: env_key(&b.api_key_env),
                retries: b.retries,
                backoff_ms: b.backoff_ms,
            })),
        })
    }

    pub fn decoding(&self) -> Decoding {
        let b = &self.backend;
        Decoding {
            model: b.model.clone(),
            temperature: b.temperature,
            max_tokens: b.max_tokens,
            stop: b.stop.clone(),
            timeout_ms: b.timeout_ms,
        }
    }

    pub fn agents(&self) -> Result<Agents, HarnessError> {
        let mut agents = Agents::bundled();
        if let Some(dir) = &self.prompts {
            let load = |file: &str| {
                let path = dir.join(file);
                if path.exists() {
                    AgentProfile::from_path(&path).map(Some).map_err(|e| HarnessError::data(&path, e))
                } else {
                    Ok(None)
                }
            };
            if let Some(p) = load("hlp.json")? {
                agents.hlp = p;
            }
            if let Some(p) = load("llp.json")? {
                agents.llp = p;
            }
            if let Some(p) = load("feedback.json")? {
                agents.feedback = p;
            }
            if let Some(p) = load("feasibility.json")? {
                agents.feasibility = p;
            }
        }
        if self.embedding.kind == EmbedderKind::Remote {
            let e = &self.embedding;
            let embedder: Arc<dyn Embedder> = Arc::new(RemoteEmbedder {
                base_url: e.base_url.clone(),
                model: e.model.clone(),
                api_key: env_key(&e.api_key_env),
                timeout: Duration::from_millis(e.timeout_ms),
            });
            agents.scorer = Arc::new(EmbeddingScorer(embedder.clone()));
            agents.embedder = embedder;
        } else {
            agents.embedder = Arc::new(TrigramEmbedder);
        }
        agents.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(agents)
    }

    /// Planner wired to the configured backend. `request_log` receives every
    /// exchange with wall-clock timestamps.
    pub fn planner(&self, request_log: Option<&Path>) -> Result<Planner, HarnessError> {
        let mut gateway = Gateway::new(self.backend()?, self.decoding(), self.backend.concurrency);
        if let Some(path) = request_log {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
            }
            gateway = gateway.with_log(path).map_err(|e| HarnessError::io(path, e))?;
        }
        Ok(Planner::new(gateway, self.agents()?, self.pipeline.clone()))
    }
}

/// Provenance stamped into every output artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub dataset_sha256: String,
    pub backend: String,
    pub agents_sha256: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Mode, Selection};

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 7
            [backend]
            kind = "http"
            base_url = "http://127.0.0.1:9000"
            model = "vicuna-7b"
            [pipeline]
            mode = "llp_only"
            selection = "fixed"
            grounding = false
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.pipeline.mode, Mode::LlpOnly);
        assert_eq!(cfg.pipeline.selection, Selection::Fixed);
        assert_eq!(cfg.pipeline.exemplars, 5);
        assert_eq!(cfg.backend.temperature, 0.0);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("sede = 1"), Err(HarnessError::Config(_))));
    }

    #[test]
    fn hash_ignores_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        b.backend.script = Some("x.json".into());
        assert_eq!(a.hash(), b.hash());
        b.pipeline.threshold = 0.5;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn scripted_without_script_is_invalid() {
        assert!(RunConfig::default().validate().is_err());
    }
}
