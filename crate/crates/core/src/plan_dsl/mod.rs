//! Skill registry and the numbered pseudocode used for plans.
//!
//! A plan is written one call per step, e.g.
//!
//! ```text
//! 1. move_to('pillow', 'floor')
//! 2. pick_up('pillow', 'floor')
//! 3. move_to('pillow', 'couch')
//! 4. put('pillow', 'couch')
//! 5. done()
//! ```
//!
//! `done()` is a terminator and is not counted as a step.

mod parse;
mod registry;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use parse::{parse_plan, parse_plan_detailed, ParsedPlan};
pub use registry::{ParamRole, SkillRegistry, SkillSchema};

/// Name of the terminator skill.
pub const DONE: &str = "done";
/// Location placeholder left for the executor to resolve.
pub const UNSPECIFIED: &str = "unspecified";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("empty plan text")]
    EmptyInput,
    #[error("line {line}: unknown skill `{name}`")]
    UnknownSkill { name: String, line: usize },
    #[error("line {line}: `{skill}` expects {expected} argument(s), got {got}")]
    ArityMismatch {
        skill: String,
        expected: usize,
        got: usize,
        line: usize,
    },
    #[error("line {line}, column {column}: {message}")]
    SyntaxError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("skill registry: {0}")]
    Registry(String),
}

/// One grounded skill invocation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub skill: String,
    pub args: Vec<String>,
}

impl Action {
    /// Builds an action, case-folding the skill name and normalizing every argument.
    pub fn new<S, I, A>(skill: S, args: I) -> Self
    where
        S: AsRef<str>,
        I: IntoIterator<Item = A>,
        A: AsRef<str>,
    {
        Self {
            skill: skill.as_ref().trim().to_lowercase(),
            args: args.into_iter().map(|a| normalize_arg(a.as_ref())).collect(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.skill == DONE
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.skill)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let quote = if arg.contains('\'') { '"' } else { '\'' };
            write!(f, "{quote}{arg}{quote}")?;
        }
        f.write_str(")")
    }
}

/// Ordered action sequence. `terminated` records a trailing `done()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub terminated: bool,
}

impl Plan {
    pub fn new(actions: Vec<Action>, terminated: bool) -> Self {
        Self { actions, terminated }
    }

    /// Number of steps, not counting the terminator.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Canonical text without validation. Use [`render_plan`] to validate first.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = self
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}. {a}", i + 1))
            .collect();
        if self.terminated {
            lines.push(format!("{}. {DONE}()", self.actions.len() + 1));
        }
        lines.join("\n")
    }

    /// Parses canonical text without consulting a registry. Skill names are
    /// case-folded but not checked.
    pub fn from_text(text: &str) -> Result<Self, DslError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        parse::parse_unchecked(text)
    }

    /// Appends `other`'s actions, dropping its terminator.
    pub fn extend_from(&mut self, other: &Plan) {
        self.actions.extend(other.actions.iter().cloned());
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Plan::from_text(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownSkill { name: String },
    ArityMismatch { expected: usize, got: usize },
    EmptyArgument { position: usize },
    MisplacedTerminator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based step index.
    pub step: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::UnknownSkill { name } => write!(f, "step {}: unknown skill `{name}`", self.step),
            ViolationKind::ArityMismatch { expected, got } => {
                write!(f, "step {}: expected {expected} argument(s), got {got}", self.step)
            }
            ViolationKind::EmptyArgument { position } => {
                write!(f, "step {}: argument {position} is empty", self.step)
            }
            ViolationKind::MisplacedTerminator => {
                write!(f, "step {}: `done` may only terminate a plan", self.step)
            }
        }
    }
}

/// Every schema violation in a plan. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_plan(plan: &Plan, registry: &SkillRegistry) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, action) in plan.actions.iter().enumerate() {
        let step = i + 1;
        if action.is_done() {
            violations.push(Violation { step, kind: ViolationKind::MisplacedTerminator });
            continue;
        }
        match registry.lookup(&action.skill) {
            None => violations.push(Violation {
                step,
                kind: ViolationKind::UnknownSkill { name: action.skill.clone() },
            }),
            Some(schema) if schema.arity() != action.args.len() => violations.push(Violation {
                step,
                kind: ViolationKind::ArityMismatch { expected: schema.arity(), got: action.args.len() },
            }),
            Some(_) => {}
        }
        for (pos, arg) in action.args.iter().enumerate() {
            if arg.trim().is_empty() {
                violations.push(Violation { step, kind: ViolationKind::EmptyArgument { position: pos + 1 } });
            }
        }
    }
    ValidationReport { violations }
}

/// Canonical `N. skill('a', 'b')` form, one step per line, 1-indexed.
pub fn render_plan(plan: &Plan, registry: &SkillRegistry) -> Result<String, DslError> {
    let report = validate_plan(plan, registry);
    if let Some(first) = report.violations.first() {
        return Err(DslError::InvalidPlan(first.to_string()));
    }
    Ok(plan.to_text())
}

fn is_quote(c: char) -> bool {
    matches!(c, '\'' | '"' | '`' | '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}')
}

/// Lowercases, trims, strips surrounding quotes and collapses internal
/// whitespace (any Unicode whitespace counts).
pub fn normalize_arg(raw: &str) -> String {
    let mut s = raw.trim();
    loop {
        let mut chars = s.chars();
        match (chars.next(), chars.next_back()) {
            (Some(a), Some(b)) if is_quote(a) && is_quote(b) => {
                s = chars.as_str().trim();
            }
            _ => break,
        }
    }
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pillow_plan() -> Plan {
        Plan::new(
            vec![
                Action::new("move_to", ["pillow", "floor"]),
                Action::new("pick_up", ["pillow", "floor"]),
                Action::new("move_to", ["couch", "unspecified"]),
                Action::new("put", ["pillow", "couch"]),
            ],
            true,
        )
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_arg(" 'Green Apple' "), "green apple");
        assert_eq!(normalize_arg("unspecified"), "unspecified");
        assert_eq!(normalize_arg("TOY\u{00A0}cube"), "toy cube");
        assert_eq!(normalize_arg("\"'nested'\""), "nested");
        assert_eq!(normalize_arg("''"), "");
    }

    #[test]
    fn render_single_action() {
        let plan = Plan::new(vec![Action::new("pick_up", ["apple", "table"])], false);
        assert_eq!(
            render_plan(&plan, &SkillRegistry::household()).unwrap(),
            "1. pick_up('apple', 'table')"
        );
    }

    #[test]
    fn render_terminator_only() {
        let plan = Plan::new(vec![], true);
        assert_eq!(render_plan(&plan, &SkillRegistry::household()).unwrap(), "1. done()");
    }

    #[test]
    fn render_pillow_plan() {
        let text = render_plan(&pillow_plan(), &SkillRegistry::household()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "5. done()");
        assert_eq!(lines[2], "3. move_to('couch', 'unspecified')");
    }

    #[test]
    fn render_rejects_invalid() {
        let plan = Plan::new(vec![Action::new("slice", ["apple"])], false);
        assert!(matches!(
            render_plan(&plan, &SkillRegistry::household()),
            Err(DslError::InvalidPlan(_))
        ));
    }

    #[test]
    fn validate_examples() {
        let household = SkillRegistry::household();
        assert!(validate_plan(&pillow_plan(), &household).is_valid());

        let slice = Plan::new(vec![Action::new("slice", ["apple"])], false);
        assert_eq!(
            validate_plan(&slice, &household).violations,
            vec![Violation { step: 1, kind: ViolationKind::UnknownSkill { name: "slice".into() } }]
        );
        assert!(validate_plan(&slice, &SkillRegistry::alfred()).is_valid());
    }

    #[test]
    fn validate_reports_every_violation() {
        let plan = Plan::new(
            vec![
                Action::new("put", ["pillow"]),
                Action::new("done", Vec::<String>::new()),
                Action::new("pick_up", ["", "floor"]),
            ],
            false,
        );
        let kinds: Vec<_> = validate_plan(&plan, &SkillRegistry::household())
            .violations
            .into_iter()
            .map(|v| (v.step, v.kind))
            .collect();
        assert_eq!(
            kinds,
            vec![
                (1, ViolationKind::ArityMismatch { expected: 2, got: 1 }),
                (2, ViolationKind::MisplacedTerminator),
                (3, ViolationKind::EmptyArgument { position: 1 }),
            ]
        );
    }

    #[test]
    fn serde_uses_canonical_text() {
        let json = serde_json::to_string(&pillow_plan()).unwrap();
        assert!(json.starts_with("\"1. move_to('pillow', 'floor')\\n"));
        let back: Plan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pillow_plan());
    }

    #[test]
    fn apostrophes_switch_quote_style() {
        let plan = Plan::new(vec![Action::new("pick_up", ["dog's bowl", "floor"])], false);
        assert_eq!(plan.to_text(), "1. pick_up(\"dog's bowl\", 'floor')");
        assert_eq!(Plan::from_text(&plan.to_text()).unwrap(), plan);
    }
}
