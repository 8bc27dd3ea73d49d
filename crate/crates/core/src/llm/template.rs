use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

pub const PART_INDEX: &str = "{part_index}";
pub const CONTENT: &str = "{content}";
pub const PREVIOUS_OUTPUT: &str = "{previous_output}";

const REGENERATE_TOML: &str = include_str!("../../templates/regenerate.toml");
const REORGANIZE_TOML: &str = include_str!("../../templates/reorganize.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Regenerate,
    Reorganize,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Regenerate => "regenerate",
            Mode::Reorganize => "reorganize",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regenerate" => Ok(Mode::Regenerate),
            "reorganize" => Ok(Mode::Reorganize),
            other => Err(LlmError::Template(format!("unknown mode {other:?}"))),
        }
    }
}

/// Prompt texts for one mode. Loaded from TOML so they can be edited
/// without touching code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub mode: Mode,
    pub system: String,
    pub first_user: String,
    pub continuation_user: String,
    pub assistant_context: String,
    /// Appended to the system message after a blank line when non-empty.
    #[serde(default)]
    pub output_format: String,
}

impl PromptTemplate {
    pub fn builtin(mode: Mode) -> PromptTemplate {
        let text = match mode {
            Mode::Regenerate => REGENERATE_TOML,
            Mode::Reorganize => REORGANIZE_TOML,
        };
        PromptTemplate::from_toml(text).expect("bundled templates are valid")
    }

    pub fn from_toml(text: &str) -> Result<PromptTemplate, LlmError> {
        let template: PromptTemplate =
            toml::from_str(text).map_err(|e| LlmError::Template(e.to_string()))?;
        template.validate()?;
        Ok(template)
    }

    pub fn load(path: &Path) -> Result<PromptTemplate, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
        PromptTemplate::from_toml(&text)
    }

    /// Placeholders must each appear exactly once in their host text and
    /// nowhere else. The user texts ahead of the content must not contain
    /// `<` or `[`, so the content start stays recognizable.
    pub fn validate(&self) -> Result<(), LlmError> {
        let all = [PART_INDEX, CONTENT, PREVIOUS_OUTPUT];
        let fields: [(&str, &str, &[&str]); 5] = [
            ("system", &self.system, &[]),
            ("first_user", &self.first_user, &[]),
            ("continuation_user", &self.continuation_user, &[PART_INDEX, CONTENT]),
            ("assistant_context", &self.assistant_context, &[PREVIOUS_OUTPUT]),
            ("output_format", &self.output_format, &[]),
        ];
        for (name, text, required) in fields {
            for placeholder in all {
                let count = text.matches(placeholder).count();
                let expected = usize::from(required.contains(&placeholder));
                if count != expected {
                    return Err(LlmError::Template(format!(
                        "{name} contains {placeholder} {count} times, expected {expected}"
                    )));
                }
            }
        }
        let lead = self
            .continuation_user
            .split(CONTENT)
            .next()
            .unwrap_or_default();
        for (name, text) in [("first_user", self.first_user.as_str()), ("continuation_user", lead)] {
            if text.contains(['<', '[']) {
                return Err(LlmError::Template(format!(
                    "{name} must not contain '<' or '[' before the content"
                )));
            }
        }
        Ok(())
    }

    pub fn system_message(&self) -> String {
        if self.output_format.trim().is_empty() {
            self.system.clone()
        } else {
            format!("{}\n\n{}", self.system, self.output_format)
        }
    }

    pub fn first_user_message(&self, content: &str) -> String {
        format!("{}\n\n{content}", self.first_user)
    }

    pub fn continuation_message(&self, part_index: usize, content: &str) -> String {
        fill(
            &self.continuation_user,
            &[(PART_INDEX, &part_index.to_string()), (CONTENT, content)],
        )
    }

    pub fn assistant_message(&self, previous_output: &str) -> String {
        fill(&self.assistant_context, &[(PREVIOUS_OUTPUT, previous_output)])
    }
}

/// Single-pass substitution, so values that happen to contain a placeholder
/// are left alone.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
    let mut rest = template;
    loop {
        let next = values
            .iter()
            .filter_map(|(key, value)| rest.find(key).map(|at| (at, *key, *value)))
            .min_by_key(|(at, _, _)| *at);
        let Some((at, key, value)) = next else {
            out.push_str(rest);
            return out;
        };
        out.push_str(&rest[..at]);
        out.push_str(value);
        rest = &rest[at + key.len()..];
    }
}
