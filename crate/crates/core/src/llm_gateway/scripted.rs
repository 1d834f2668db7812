use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::Digest;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, LogRecord};

/// A canned completion and the conditions under which it fires. Every
/// condition that is set must hold; a rule with none set matches anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Substring of the system message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    /// Substring of the final user message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_contains: Option<String>,
    /// Hash of the whole message list, see [`ChatRequest::prompt_sha256`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub response: String,
}

impl ScriptRule {
    pub fn user_contains(needle: &str, response: &str) -> Self {
        Self { system_contains: None, user_contains: Some(needle.into()), prompt_sha256: None, response: response.into() }
    }

    pub fn for_agent(system_needle: &str, user_needle: &str, response: &str) -> Self {
        Self { system_contains: Some(system_needle.into()), ..Self::user_contains(user_needle, response) }
    }

    pub fn prompt_hash(hash: &str, response: &str) -> Self {
        Self { system_contains: None, user_contains: None, prompt_sha256: Some(hash.into()), response: response.into() }
    }

    // The user text is short, so it is checked before the system prompt.
    fn matches(&self, system: Option<&str>, user: Option<&str>, hash: &str) -> bool {
        let contains = |needle: &Option<String>, hay: Option<&str>| {
            needle.as_deref().is_none_or(|n| hay.is_some_and(|h| h.contains(n)))
        };
        contains(&self.user_contains, user)
            && self.prompt_sha256.as_deref().is_none_or(|h| h == hash)
            && contains(&self.system_contains, system)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedBackend {
    pub rules: Vec<ScriptRule>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Self { rules }
    }

    /// Loads `{"rules": [...]}`.
    pub fn from_path(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Hash rules answering every successful exchange in a request log.
    pub fn from_log(records: &[LogRecord]) -> Self {
        Self::new(
            records
                .iter()
                .filter_map(|r| r.response.as_ref().ok().map(|resp| ScriptRule::prompt_hash(&r.prompt_sha256, &resp.content)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let hash = request.prompt_sha256();
        let (system, user) = (request.system_text(), request.last_user_text());
        self.rules
            .iter()
            .find(|r| r.matches(system, user, &hash))
            .map(|r| ChatResponse {
                content: r.response.clone(),
                finish_reason: Some("stop".into()),
                latency_ms: 0,
                usage: None,
            })
            .ok_or(GatewayError::ScriptMiss { prompt_sha256: hash })
    }

    fn identity(&self) -> String {
        let json = serde_json::to_string(&self.rules).expect("rules serialize");
        let digest = hex::encode(sha2::Sha256::digest(json.as_bytes()));
        format!("scripted:{}", &digest[..16])
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Decoding, Message};
    use super::*;

    fn req(system: &str, user: &str) -> ChatRequest {
        ChatRequest::new(vec![Message::system(system), Message::user(user)], Decoding::default())
    }

    #[test]
    fn empty_script_misses() {
        let err = ScriptedBackend::default().complete(&req("s", "u")).unwrap_err();
        assert!(matches!(err, GatewayError::ScriptMiss { .. }));
    }

    #[test]
    fn first_rule_wins() {
        let backend = ScriptedBackend::new(vec![
            ScriptRule::user_contains("pillow", "first"),
            ScriptRule::user_contains("pillow from", "second"),
        ]);
        assert_eq!(backend.complete(&req("s", "Pick up a pillow from the floor")).unwrap().content, "first");
    }

    #[test]
    fn system_condition_and_hash() {
        let r = req("You are the low level planner", "Pick up a pillow");
        let backend = ScriptedBackend::new(vec![
            ScriptRule::for_agent("high level", "pillow", "wrong agent"),
            ScriptRule::prompt_hash(&r.prompt_sha256(), "by hash"),
        ]);
        assert_eq!(backend.complete(&r).unwrap().content, "by hash");
        assert!(backend.complete(&req("You are the low level planner", "Pick up a bowl")).is_err());
    }

    #[test]
    fn deterministic_identity() {
        let a = ScriptedBackend::new(vec![ScriptRule::user_contains("a", "b")]);
        assert_eq!(a.identity(), a.clone().identity());
        assert_ne!(a.identity(), ScriptedBackend::default().identity());
        let back: ScriptedBackend = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
