use super::{normalize_arg, Action, DslError, Plan, SkillRegistry, DONE, UNSPECIFIED};

/// Parse result together with any non-fatal warnings (ignored trailing prose).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPlan {
    pub plan: Plan,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
struct RawCall {
    name: String,
    args: Vec<String>,
    line: usize,
    column: usize,
}

struct LineScanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl LineScanner {
    fn new(src: &str, line: usize) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn error(&self, message: impl Into<String>) -> DslError {
        DslError::SyntaxError { line: self.line, column: self.pos + 1, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn skip_separators(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace() || matches!(c, ',' | ';' | '.')) {
            self.pos += 1;
        }
    }

    /// Scans every call on the line. On error, the calls scanned before the
    /// failure point are returned alongside it.
    fn scan(mut self) -> (Vec<RawCall>, Option<DslError>) {
        let mut calls = Vec::new();
        loop {
            self.skip_separators();
            if self.peek().is_none() {
                return (calls, None);
            }
            match self.call() {
                Ok(call) => calls.push(call),
                Err(e) => return (calls, Some(e)),
            }
        }
    }

    fn call(&mut self) -> Result<RawCall, DslError> {
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            match self.peek() {
                Some('.') | Some(')') => self.pos += 1,
                _ => return Err(self.error("expected `.` after step number")),
            }
            self.skip_ws();
        }

        let column = self.pos + 1;
        if !self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Err(self.error("expected a skill name"));
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        self.skip_ws();
        if self.peek() != Some('(') {
            return Err(self.error("expected `(` after skill name"));
        }
        self.pos += 1;

        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(RawCall { name, args, line: self.line, column });
        }
        loop {
            self.skip_ws();
            let arg_pos = self.pos;
            let raw = self.argument()?;
            let arg = normalize_arg(&raw);
            if arg.is_empty() {
                self.pos = arg_pos;
                return Err(self.error("empty argument"));
            }
            args.push(arg);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(RawCall { name, args, line: self.line, column });
                }
                _ => return Err(self.error("expected `,` or `)`")),
            }
        }
    }

    fn argument(&mut self) -> Result<String, DslError> {
        let closer = match self.peek() {
            Some('\'') => Some('\''),
            Some('"') => Some('"'),
            Some('`') => Some('`'),
            Some('\u{2018}') => Some('\u{2019}'),
            Some('\u{201C}') => Some('\u{201D}'),
            _ => None,
        };
        match closer {
            Some(closer) => {
                let open = self.pos;
                self.pos += 1;
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c == closer {
                        let text = self.chars[start..self.pos].iter().collect();
                        self.pos += 1;
                        return Ok(text);
                    }
                    self.pos += 1;
                }
                self.pos = open;
                Err(self.error("unterminated quoted argument"))
            }
            None => {
                let start = self.pos;
                while self.peek().is_some_and(|c| !matches!(c, ',' | ')' | '(')) {
                    self.pos += 1;
                }
                Ok(self.chars[start..self.pos].iter().collect())
            }
        }
    }
}

fn scan_calls(text: &str) -> Result<(Vec<RawCall>, Vec<String>), DslError> {
    if text.trim().is_empty() {
        return Err(DslError::EmptyInput);
    }
    let scanned: Vec<_> = text
        .lines()
        .enumerate()
        .map(|(i, line)| LineScanner::new(line, i + 1).scan())
        .collect();

    let mut calls = Vec::new();
    let mut warnings = Vec::new();
    let structured: Vec<bool> = scanned.iter().map(|(c, _)| !c.is_empty()).collect();
    for (i, (line_calls, error)) in scanned.into_iter().enumerate() {
        calls.extend(line_calls);
        if let Some(err) = error {
            let structured_later = structured[i + 1..].iter().any(|&s| s);
            if structured_later || calls.is_empty() {
                return Err(err);
            }
            let message = format!("ignored trailing text from line {}", i + 1);
            log::warn!("{message}");
            warnings.push(message);
            break;
        }
    }
    Ok((calls, warnings))
}

fn assemble(calls: Vec<RawCall>, registry: Option<&SkillRegistry>) -> Result<Plan, DslError> {
    let total = calls.len();
    let mut plan = Plan::default();
    for (i, call) in calls.into_iter().enumerate() {
        let schema = match registry {
            Some(reg) => Some(reg.lookup(&call.name).ok_or_else(|| DslError::UnknownSkill {
                name: call.name.to_lowercase(),
                line: call.line,
            })?),
            None => None,
        };
        let skill = schema.map_or_else(|| call.name.to_lowercase(), |s| s.canonical_name());

        if skill == DONE {
            if !call.args.is_empty() {
                return Err(DslError::ArityMismatch {
                    skill,
                    expected: 0,
                    got: call.args.len(),
                    line: call.line,
                });
            }
            if i + 1 != total {
                return Err(DslError::SyntaxError {
                    line: call.line,
                    column: call.column,
                    message: "`done()` must be the last step".into(),
                });
            }
            plan.terminated = true;
            continue;
        }

        let mut args = call.args;
        if let Some(schema) = schema {
            let expected = schema.arity();
            if schema.optional_location && args.len() + 1 == expected {
                args.push(UNSPECIFIED.to_string());
            }
            if args.len() != expected {
                return Err(DslError::ArityMismatch {
                    skill,
                    expected,
                    got: args.len(),
                    line: call.line,
                });
            }
        }
        plan.actions.push(Action { skill, args });
    }
    Ok(plan)
}

/// Parses numbered plan pseudocode against a registry.
///
/// Accepts optional `N.` prefixes, either quote style, free spacing, and
/// comma or newline separated calls. A trailing `done()` sets
/// `terminated`. Prose after the last parseable line is dropped with a
/// warning.
pub fn parse_plan(text: &str, registry: &SkillRegistry) -> Result<Plan, DslError> {
    parse_plan_detailed(text, registry).map(|p| p.plan)
}

pub fn parse_plan_detailed(text: &str, registry: &SkillRegistry) -> Result<ParsedPlan, DslError> {
    let (calls, warnings) = scan_calls(text)?;
    Ok(ParsedPlan { plan: assemble(calls, Some(registry))?, warnings })
}

pub(super) fn parse_unchecked(text: &str) -> Result<Plan, DslError> {
    let (calls, _) = scan_calls(text)?;
    assemble(calls, None)
}
