//! The four planning agents and the pipeline that chains them.
//!
//! Prompts are data: each agent has a JSON profile holding its system text,
//! the user-message template and an exemplar pool. Templates use
//! `{{name}}` placeholders; `{{skills}}` in a system text expands to the
//! skill registry listing.

mod pipeline;
mod select;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grounding::{Embedder, Grounder, GroundingDecision, TrigramEmbedder};
use crate::llm_gateway::{Gateway, GatewayError, Message};
use crate::plan_dsl::{normalize_arg, parse_plan, parse_plan_detailed, ParamRole, Plan, SkillRegistry};

pub use pipeline::{Mode, PipelineConfig, PipelineTrace, StageError};
pub use select::{select_exemplars, term_frequencies, EmbeddingScorer, Scorer, Selection, TfCosineScorer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("asked for {requested} exemplars but the pool has {available}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("no subtasks could be read from the planner output")]
    EmptyDecomposition,
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid agent profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Feasibility,
    Feedback,
    Hlp,
    Llp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<String>,
    pub output: String,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl Exemplar {
    pub fn new(id: impl Into<String>, instruction: impl Into<String>, output: impl Into<String>) -> Self {
        Self { id: id.into(), instruction: instruction.into(), objects: Vec::new(), output: output.into(), tags: BTreeMap::new() }
    }
}

/// Replaces every `{{name}}`; an unresolved placeholder is an error.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> Result<String, AgentError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or_else(|| AgentError::Template(format!("unclosed placeholder in `{template}`")))?;
        let key = after[..close].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| AgentError::Template(format!("no value for `{{{{{key}}}}}`")))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// One line per skill: `move_to(object, location): description`.
pub fn describe_skills(registry: &SkillRegistry) -> String {
    registry
        .skills()
        .iter()
        .map(|s| {
            let params: Vec<&str> = s
                .params
                .iter()
                .map(|r| match r {
                    ParamRole::Object => "object",
                    ParamRole::Location => "location",
                })
                .collect();
            format!("{}({}): {}", s.name, params.join(", "), s.description)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent: AgentKind,
    pub version: String,
    #[serde(default)]
    pub note: String,
    /// System-role text.
    pub profile: String,
    /// User message for one input; must contain `{{instruction}}`.
    pub input_template: String,
    /// Line appended to the user message when objects are supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects_template: Option<String>,
    #[serde(default)]
    pub tools: Vec<String>,
    pub exemplars: Vec<Exemplar>,
}

impl AgentProfile {
    pub fn bundled(kind: AgentKind) -> Self {
        let text = match kind {
            AgentKind::Feasibility => include_str!("../../data/prompts/feasibility.json"),
            AgentKind::Feedback => include_str!("../../data/prompts/feedback.json"),
            AgentKind::Hlp => include_str!("../../data/prompts/hlp.json"),
            AgentKind::Llp => include_str!("../../data/prompts/llp.json"),
        };
        serde_json::from_str(text).expect("bundled profile parses")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Profile(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AgentError::Profile(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self, registry: &SkillRegistry) -> Result<(), AgentError> {
        if self.profile.trim().is_empty() {
            return Err(AgentError::Profile(format!("{:?} profile text is empty", self.agent)));
        }
        if !self.input_template.contains("{{instruction}}") {
            return Err(AgentError::Profile("input template lacks {{instruction}}".into()));
        }
        self.system_text(registry)?;
        for e in &self.exemplars {
            self.user_text(&e.instruction, &e.objects)?;
            if self.agent == AgentKind::Llp {
                parse_plan(&e.output, registry)
                    .map_err(|err| AgentError::Profile(format!("exemplar {} does not parse: {err}", e.id)))?;
            }
        }
        Ok(())
    }

    pub fn system_text(&self, registry: &SkillRegistry) -> Result<String, AgentError> {
        render_template(&self.profile, &[("skills", &describe_skills(registry))])
    }

    pub fn user_text(&self, instruction: &str, objects: &[String]) -> Result<String, AgentError> {
        let mut text = render_template(&self.input_template, &[("instruction", instruction)])?;
        if let (Some(template), false) = (&self.objects_template, objects.is_empty()) {
            text.push('\n');
            text.push_str(&render_template(template, &[("objects", &objects.join(", "))])?);
        }
        Ok(text)
    }

    /// System text, then one user/assistant pair per exemplar, then the query.
    pub fn messages(
        &self,
        registry: &SkillRegistry,
        exemplars: &[&Exemplar],
        instruction: &str,
        objects: &[String],
    ) -> Result<Vec<Message>, AgentError> {
        let mut messages = vec![Message::system(self.system_text(registry)?)];
        for e in exemplars {
            messages.push(Message::user(self.user_text(&e.instruction, &e.objects)?));
            messages.push(Message::assistant(e.output.clone()));
        }
        messages.push(Message::user(self.user_text(instruction, objects)?));
        Ok(messages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Feasible,
    NotFeasible,
}

/// Reads a verdict; anything unrecognizable counts as not feasible.
pub fn parse_verdict(text: &str) -> (Verdict, Option<String>) {
    let lower = text.to_lowercase();
    let negative = ["not feasible", "infeasible", "unfeasible", "not possible"];
    if negative.iter().any(|n| lower.contains(n)) {
        (Verdict::NotFeasible, None)
    } else if lower.contains("feasible") {
        (Verdict::Feasible, None)
    } else {
        (Verdict::NotFeasible, Some(format!("unrecognized verdict `{}`", text.trim())))
    }
}

/// The lookup phrase from a `Query: x` answer, `None` for `none`.
pub fn parse_query(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let raw = lines
        .iter()
        .find_map(|l| {
            let lower = l.to_lowercase();
            lower.find("query:").map(|i| l[i + "query:".len()..].to_string())
        })
        .or_else(|| lines.first().map(|l| l.to_string()))?;
    let query = normalize_arg(raw.trim_end_matches(['.', '!']));
    match query.as_str() {
        "" | "none" | "n/a" | "null" => None,
        _ => Some(query),
    }
}

fn strip_marker(line: &str) -> Option<&str> {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &line[digits..];
        return rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')).or_else(|| rest.strip_prefix(':')).map(str::trim);
    }
    line.strip_prefix(['-', '*', '•']).map(str::trim)
}

/// Subtasks from numbered or bulleted lines; plain lines when nothing is
/// numbered.
pub fn parse_subtasks(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let marked: Vec<String> = lines.iter().filter_map(|l| strip_marker(l)).filter(|l| !l.is_empty()).map(str::to_string).collect();
    if marked.is_empty() {
        lines.into_iter().map(str::to_string).collect()
    } else {
        marked
    }
}

/// One prompt and its completion, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub agent: AgentKind,
    pub messages: Vec<Message>,
    pub completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<GatewayError>,
}

/// LLP output for one subtask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskPlan {
    pub subtask: String,
    pub exemplar_ids: Vec<String>,
    pub raw: String,
    pub parse_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub parsed: Option<Plan>,
    pub grounded: Plan,
    #[serde(default)]
    pub decisions: Vec<GroundingDecision>,
}

/// Profiles plus the registry and similarity hooks they are used with.
#[derive(Clone)]
pub struct Agents {
    pub feasibility: AgentProfile,
    pub feedback: AgentProfile,
    pub hlp: AgentProfile,
    pub llp: AgentProfile,
    pub registry: SkillRegistry,
    pub scorer: Arc<dyn Scorer>,
    pub embedder: Arc<dyn Embedder>,
}

impl Agents {
    pub fn bundled() -> Self {
        Self {
            feasibility: AgentProfile::bundled(AgentKind::Feasibility),
            feedback: AgentProfile::bundled(AgentKind::Feedback),
            hlp: AgentProfile::bundled(AgentKind::Hlp),
            llp: AgentProfile::bundled(AgentKind::Llp),
            registry: SkillRegistry::household(),
            scorer: Arc::new(TfCosineScorer),
            embedder: Arc::new(TrigramEmbedder),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        for p in [&self.feasibility, &self.feedback, &self.hlp, &self.llp] {
            p.validate(&self.registry)?;
        }
        Ok(())
    }

    /// SHA-256 over the profiles, registry and hook identities.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::json!({
            "profiles": [&self.feasibility, &self.feedback, &self.hlp, &self.llp],
            "registry": serde_json::from_str::<serde_json::Value>(&self.registry.to_json()).expect("registry json"),
            "scorer": self.scorer.identity(),
            "embedder": self.embedder.identity(),
        });
        hex::encode(Sha256::digest(json.to_string().as_bytes()))
    }
}

/// Agents bound to a gateway and pipeline settings.
#[derive(Clone)]
pub struct Planner {
    pub gateway: Gateway,
    pub agents: Agents,
    pub config: PipelineConfig,
}

impl Planner {
    pub fn new(gateway: Gateway, agents: Agents, config: PipelineConfig) -> Self {
        Self { gateway, agents, config }
    }

    fn call(&self, agent: AgentKind, messages: Vec<Message>, log: &mut Vec<Exchange>) -> Result<String, AgentError> {
        let result = self.gateway.chat(messages.clone());
        log.push(Exchange {
            agent,
            messages,
            completion: result.as_ref().ok().cloned(),
            error: result.as_ref().err().cloned(),
        });
        Ok(result?)
    }

    fn prompt(&self, profile: &AgentProfile, instruction: &str, objects: &[String]) -> Result<Vec<Message>, AgentError> {
        let exemplars: Vec<&Exemplar> = profile.exemplars.iter().collect();
        profile.messages(&self.agents.registry, &exemplars, instruction, objects)
    }

    pub fn check_feasibility(&self, instruction: &str, log: &mut Vec<Exchange>) -> Result<(Verdict, Option<String>), AgentError> {
        let messages = self.prompt(&self.agents.feasibility, instruction, &[])?;
        let text = self.call(AgentKind::Feasibility, messages, log)?;
        let (verdict, warning) = parse_verdict(&text);
        if let Some(w) = &warning {
            log::warn!("{w}; treating as not feasible");
        }
        Ok((verdict, warning))
    }

    pub fn feedback_query(&self, instruction: &str, log: &mut Vec<Exchange>) -> Result<Option<String>, AgentError> {
        let messages = self.prompt(&self.agents.feedback, instruction, &[])?;
        Ok(parse_query(&self.call(AgentKind::Feedback, messages, log)?))
    }

    pub fn hlp_decompose(&self, instruction: &str, objects: &[String], log: &mut Vec<Exchange>) -> Result<Vec<String>, AgentError> {
        if instruction.trim().is_empty() {
            return Err(AgentError::EmptyInput("instruction"));
        }
        let messages = self.prompt(&self.agents.hlp, instruction, objects)?;
        let subtasks = parse_subtasks(&self.call(AgentKind::Hlp, messages, log)?);
        if subtasks.is_empty() {
            return Err(AgentError::EmptyDecomposition);
        }
        Ok(subtasks)
    }

    /// Plans one subtask. Unparseable output yields an empty plan with
    /// `parse_ok = false`; only gateway failures are errors.
    pub fn llp_plan(&self, subtask: &str, grounder: Option<&Grounder>, log: &mut Vec<Exchange>) -> Result<SubtaskPlan, AgentError> {
        if subtask.trim().is_empty() {
            return Err(AgentError::EmptyInput("subtask"));
        }
        let profile = &self.agents.llp;
        let scorer = match self.config.selection {
            Selection::Similarity => Some(self.agents.scorer.as_ref()),
            Selection::Fixed => None,
        };
        let k = self.config.exemplars.min(profile.exemplars.len());
        let chosen = select_exemplars(subtask, &profile.exemplars, k, scorer)?;
        let messages = profile.messages(&self.agents.registry, &chosen, subtask, &[])?;
        let raw = self.call(AgentKind::Llp, messages, log)?;

        let mut out = SubtaskPlan {
            subtask: subtask.to_string(),
            exemplar_ids: chosen.iter().map(|e| e.id.clone()).collect(),
            raw: raw.clone(),
            parse_ok: false,
            parse_error: None,
            warnings: Vec::new(),
            parsed: None,
            grounded: Plan::new(Vec::new(), true),
            decisions: Vec::new(),
        };
        match parse_plan_detailed(&raw, &self.agents.registry) {
            Ok(parsed) => {
                out.parse_ok = true;
                out.warnings = parsed.warnings;
                out.grounded = parsed.plan.clone();
                if let Some(g) = grounder {
                    match g.ground_plan(&parsed.plan, &self.agents.registry) {
                        Ok((plan, decisions)) => {
                            out.grounded = plan;
                            out.decisions = decisions;
                        }
                        Err(e) => out.warnings.push(format!("grounding skipped: {e}")),
                    }
                }
                out.parsed = Some(parsed.plan);
            }
            Err(e) => out.parse_error = Some(e.to_string()),
        }
        Ok(out)
    }
}
