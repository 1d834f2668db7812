use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TaskGenError;

const BUNDLED_BANK: &str = include_str!("../../data/vocab.json");

pub const TEMPLATE_COUNT: usize = 30;
pub const OBJECT_COUNT: usize = 38;
pub const LOCATION_COUNT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub name: String,
    /// Object type; defaults to the full name. `green apple` has base `apple`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
}

impl ObjectEntry {
    pub fn base(&self) -> &str {
        self.base.as_deref().unwrap_or(&self.name)
    }

    /// Words of the name that are not part of the base type.
    pub fn attributes(&self) -> Vec<String> {
        let base: BTreeSet<&str> = self.base().split_whitespace().collect();
        self.name
            .split_whitespace()
            .filter(|w| !base.contains(w))
            .map(str::to_string)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateClass {
    Pick,
    PickPlace,
    PickPlace2,
    Ambiguous,
}

impl TemplateClass {
    fn required(self) -> &'static [&'static str] {
        match self {
            TemplateClass::Pick => &["obj"],
            TemplateClass::PickPlace => &["obj", "dst"],
            TemplateClass::PickPlace2 => &["obj", "dst", "obj2", "dst2"],
            TemplateClass::Ambiguous => &["group", "src", "dst"],
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            TemplateClass::Pick => &["obj", "src"],
            TemplateClass::PickPlace => &["obj", "src", "dst"],
            TemplateClass::PickPlace2 => &["obj", "src", "dst", "obj2", "src2", "dst2"],
            TemplateClass::Ambiguous => &["group", "src", "dst"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub class: TemplateClass,
    pub text: String,
}

impl Template {
    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            let Some(close) = rest[open..].find('}') else { break };
            out.push(&rest[open + 1..open + close]);
            rest = &rest[open + close + 1..];
        }
        out
    }

    pub fn has(&self, placeholder: &str) -> bool {
        self.placeholders().contains(&placeholder)
    }

    pub fn fill(&self, values: &[(&str, &str)]) -> String {
        let mut text = self.text.clone();
        for (key, value) in values {
            text = text.replace(&format!("{{{key}}}"), value);
        }
        text
    }
}

/// Objects, locations, collectives and instruction templates used for generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabBank {
    pub objects: Vec<ObjectEntry>,
    pub locations: Vec<String>,
    /// Collective noun to member object names, e.g. `clothes -> [shirt, jeans, ...]`.
    pub collectives: BTreeMap<String, Vec<String>>,
    pub templates: Vec<Template>,
}

impl VocabBank {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_BANK).expect("bundled vocabulary parses")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TaskGenError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TaskGenError::BankInvalid(format!("{}: {e}", path.display())))?;
        let bank: Self =
            serde_json::from_str(&text).map_err(|e| TaskGenError::BankInvalid(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<(), TaskGenError> {
        let invalid = |m: String| Err(TaskGenError::BankInvalid(m));
        if self.templates.len() != TEMPLATE_COUNT {
            return invalid(format!("expected {TEMPLATE_COUNT} templates, found {}", self.templates.len()));
        }
        if self.objects.len() != OBJECT_COUNT {
            return invalid(format!("expected {OBJECT_COUNT} objects, found {}", self.objects.len()));
        }
        if self.locations.len() != LOCATION_COUNT {
            return invalid(format!("expected {LOCATION_COUNT} locations, found {}", self.locations.len()));
        }
        let names: BTreeSet<&str> = self.objects.iter().map(|o| o.name.as_str()).collect();
        if names.len() != self.objects.len() {
            return invalid("duplicate object names".into());
        }
        let locations: BTreeSet<&str> = self.locations.iter().map(String::as_str).collect();
        if locations.len() != self.locations.len() {
            return invalid("duplicate location names".into());
        }
        if let Some(clash) = names.intersection(&locations).next() {
            return invalid(format!("`{clash}` is both an object and a location"));
        }
        for (group, members) in &self.collectives {
            if members.is_empty() {
                return invalid(format!("collective `{group}` has no members"));
            }
            if let Some(m) = members.iter().find(|m| !names.contains(m.as_str())) {
                return invalid(format!("collective `{group}` lists unknown object `{m}`"));
            }
        }
        let mut ids = BTreeSet::new();
        for t in &self.templates {
            if !ids.insert(t.id.as_str()) {
                return invalid(format!("duplicate template id `{}`", t.id));
            }
            let found = t.placeholders();
            if let Some(p) = found.iter().find(|p| !t.class.allowed().contains(p)) {
                return invalid(format!("template `{}` uses unknown placeholder {{{p}}}", t.id));
            }
            if let Some(p) = t.class.required().iter().find(|p| !found.contains(p)) {
                return invalid(format!("template `{}` lacks {{{p}}}", t.id));
            }
        }
        for class in [TemplateClass::Pick, TemplateClass::PickPlace, TemplateClass::PickPlace2] {
            if !self.templates.iter().any(|t| t.class == class) {
                return invalid(format!("no templates of class {class:?}"));
            }
        }
        Ok(())
    }

    pub fn templates_of(&self, class: TemplateClass) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.class == class).collect()
    }

    pub fn object(&self, name: &str) -> Option<&ObjectEntry> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn is_location(&self, name: &str) -> bool {
        self.locations.iter().any(|l| l == name)
    }

    /// Collectives the object belongs to.
    pub fn collectives_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.collectives
            .iter()
            .filter(move |(_, members)| members.iter().any(|m| m == name))
            .map(|(g, _)| g.as_str())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("bank serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

impl Default for VocabBank {
    fn default() -> Self {
        Self::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_bank_is_valid() {
        let bank = VocabBank::bundled();
        bank.validate().unwrap();
        for name in [
            "pillow", "bowl", "spoon", "shirt", "jeans", "green apple", "toy cube",
        ] {
            assert!(bank.object(name).is_some(), "{name}");
        }
        for loc in ["couch", "table", "closet", "drawer", "floor", "white box"] {
            assert!(bank.is_location(loc), "{loc}");
        }
        assert!(bank.collectives["clothes"].contains(&"shirt".to_string()));
    }

    #[test]
    fn attributes_split_from_base() {
        let bank = VocabBank::bundled();
        assert_eq!(bank.object("green apple").unwrap().attributes(), vec!["green"]);
        assert_eq!(bank.object("apple").unwrap().attributes(), Vec::<String>::new());
    }

    #[test]
    fn count_violation_rejected() {
        let mut bank = VocabBank::bundled();
        bank.objects.pop();
        assert!(matches!(bank.validate(), Err(TaskGenError::BankInvalid(_))));
    }

    #[test]
    fn unknown_placeholder_rejected() {
        let mut bank = VocabBank::bundled();
        bank.templates[0].text = "pick up the {thing}".into();
        assert!(bank.validate().is_err());
    }

    #[test]
    fn template_fill() {
        let t = Template { id: "x".into(), class: TemplateClass::PickPlace, text: "move the {obj} to the {dst}".into() };
        assert_eq!(t.placeholders(), vec!["obj", "dst"]);
        assert_eq!(t.fill(&[("obj", "bowl"), ("dst", "table")]), "move the bowl to the table");
    }
}
