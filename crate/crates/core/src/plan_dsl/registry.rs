use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DslError;

const DEFAULT_REGISTRY: &str = include_str!("../../data/skills/default.json");
const ALFRED_REGISTRY: &str = include_str!("../../data/skills/alfred.json");

/// Role of a skill parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamRole {
    Object,
    Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSchema {
    pub name: String,
    pub params: Vec<ParamRole>,
    #[serde(default)]
    pub description: String,
    /// Alternate spellings accepted by the parser. Matching is case-insensitive.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    /// When set, a call that omits the trailing location argument is filled
    /// with `unspecified`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional_location: bool,
}

impl SkillSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Name used in parsed actions and rendered plans.
    pub fn canonical_name(&self) -> String {
        self.name.to_lowercase()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegistryDoc {
    skills: Vec<SkillSchema>,
}

/// Set of skills an agent can execute, keyed by case-folded name and alias.
#[derive(Debug, Clone)]
pub struct SkillRegistry {
    skills: Vec<SkillSchema>,
    index: HashMap<String, usize>,
}

impl SkillRegistry {
    pub fn new(skills: Vec<SkillSchema>) -> Result<Self, DslError> {
        let mut index = HashMap::new();
        for (i, skill) in skills.iter().enumerate() {
            if skill.name.trim().is_empty() {
                return Err(DslError::Registry("skill with empty name".into()));
            }
            let canonical = skill.canonical_name();
            if canonical == super::DONE && !skill.params.is_empty() {
                return Err(DslError::Registry("`done` must take no parameters".into()));
            }
            if skill.optional_location && skill.params.last() != Some(&ParamRole::Location) {
                return Err(DslError::Registry(format!(
                    "skill `{}` marks an optional location but its last parameter is not a location",
                    skill.name
                )));
            }
            let keys = std::iter::once(canonical).chain(skill.aliases.iter().map(|a| a.to_lowercase()));
            for key in keys {
                if index.insert(key.clone(), i).is_some() {
                    return Err(DslError::Registry(format!("duplicate skill name `{key}`")));
                }
            }
        }
        Ok(Self { skills, index })
    }

    pub fn from_json(text: &str) -> Result<Self, DslError> {
        let doc: RegistryDoc =
            serde_json::from_str(text).map_err(|e| DslError::Registry(e.to_string()))?;
        Self::new(doc.skills)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DslError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DslError::Registry(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// The household registry: `move_to`, `pick_up`, `put` and `done`.
    pub fn household() -> Self {
        Self::from_json(DEFAULT_REGISTRY).expect("bundled default registry is valid")
    }

    /// The eight ALFRED high-level skills plus `done`.
    pub fn alfred() -> Self {
        Self::from_json(ALFRED_REGISTRY).expect("bundled alfred registry is valid")
    }

    pub fn lookup(&self, name: &str) -> Option<&SkillSchema> {
        self.index.get(&name.trim().to_lowercase()).map(|&i| &self.skills[i])
    }

    pub fn skills(&self) -> &[SkillSchema] {
        &self.skills
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RegistryDoc { skills: self.skills.clone() })
            .expect("registry serializes")
    }
}

impl Default for SkillRegistry {
    fn default() -> Self {
        Self::household()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registries_load() {
        let household = SkillRegistry::household();
        assert_eq!(household.skills().len(), 4);
        assert_eq!(household.lookup("done").unwrap().arity(), 0);
        assert!(household.lookup("MOVE_TO").unwrap().optional_location);

        let alfred = SkillRegistry::alfred();
        assert_eq!(alfred.skills().len(), 9);
        assert_eq!(alfred.lookup("slice").unwrap().name, "SliceObject");
        assert_eq!(alfred.lookup("sliceobject").unwrap().arity(), 1);
    }

    #[test]
    fn duplicate_names_rejected() {
        let json = r#"{"skills": [{"name": "a", "params": []}, {"name": "A", "params": ["object"]}]}"#;
        assert!(matches!(SkillRegistry::from_json(json), Err(DslError::Registry(_))));
    }

    #[test]
    fn done_with_params_rejected() {
        let json = r#"{"skills": [{"name": "done", "params": ["object"]}]}"#;
        assert!(SkillRegistry::from_json(json).is_err());
    }
}
