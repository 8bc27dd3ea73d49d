//! Chat-model access: prompt assembly, strictly sequential chunk calls that
//! thread each answer into the next prompt, and payload extraction.

mod mock;
mod remote;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chunker::estimate_tokens;

pub use mock::{user_content, MockProvider, MockReply};
pub use remote::RemoteChatProvider;
pub use template::{Mode, PromptTemplate, CONTENT, PART_INDEX, PREVIOUS_OUTPUT};

/// Input context of the target model, in tokens.
pub const INPUT_WINDOW: usize = 128_000;
/// Completion cap of the target model, in tokens.
pub const MAX_OUTPUT_TOKENS: usize = 16_384;
/// Estimated framing cost of one chat message.
pub const MESSAGE_OVERHEAD: usize = 4;
/// Largest accepted chunk budget. Leaves room in the window for the prompt
/// texts and for prior-output context.
pub const MAX_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            model: "gpt-4o".to_string(),
            temperature: 0.2,
            max_tokens: 16_384,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

/// Estimated prompt size of a message list.
pub fn estimate_messages(messages: &[ChatMessage]) -> usize {
    messages
        .iter()
        .map(|m| estimate_tokens(&m.content) + MESSAGE_OVERHEAD)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    /// `"length"` means the model hit `max_tokens`.
    pub finish_reason: Option<String>,
}

impl Completion {
    pub fn truncated(&self) -> bool {
        self.finish_reason.as_deref() == Some("length")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unreadable provider response: {0}")]
    Decode(String),
    #[error("mock provider: {0}")]
    Mock(String),
    #[error("part {index} needs previous output")]
    MissingPrevious { index: usize },
    #[error("prompt of {needed} tokens exceeds the {window}-token window")]
    WindowExceeded { needed: usize, window: usize },
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, messages: &[ChatMessage], params: &ModelParams) -> Result<Completion, LlmError>;
}

/// Prompt for part `index` (1-based). Parts after the first carry the
/// previous answer, cut from the front so the whole prompt fits the window.
pub fn build_messages(
    template: &PromptTemplate,
    index: usize,
    content: &str,
    previous_output: Option<&str>,
) -> Result<Vec<ChatMessage>, LlmError> {
    let system = ChatMessage::new(Role::System, template.system_message());
    if index <= 1 {
        let messages = vec![
            system,
            ChatMessage::new(Role::User, template.first_user_message(content)),
        ];
        check_window(&messages)?;
        return Ok(messages);
    }
    let previous = previous_output.ok_or(LlmError::MissingPrevious { index })?;
    let user = ChatMessage::new(Role::User, template.continuation_message(index, content));
    let empty_context = ChatMessage::new(Role::Assistant, template.assistant_message(""));
    let fixed = estimate_messages(&[system.clone(), empty_context, user.clone()]);
    let allowance = INPUT_WINDOW
        .checked_sub(fixed)
        .ok_or(LlmError::WindowExceeded {
            needed: fixed,
            window: INPUT_WINDOW,
        })?;
    let kept = keep_tail(previous, allowance.saturating_sub(1) * 4);
    let messages = vec![
        system,
        ChatMessage::new(Role::Assistant, template.assistant_message(kept)),
        user,
    ];
    check_window(&messages)?;
    Ok(messages)
}

fn check_window(messages: &[ChatMessage]) -> Result<(), LlmError> {
    let needed = estimate_messages(messages);
    if needed > INPUT_WINDOW {
        return Err(LlmError::WindowExceeded {
            needed,
            window: INPUT_WINDOW,
        });
    }
    Ok(())
}

/// Last `max_bytes` bytes of `text`, moved forward to a char boundary.
fn keep_tail(text: &str, max_bytes: usize) -> &str {
    if text.len() <= max_bytes {
        return text;
    }
    let mut start = text.len() - max_bytes;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    &text[start..]
}

#[derive(Debug, thiserror::Error)]
#[error("part {index}: {source}")]
pub struct SequenceError {
    pub index: usize,
    #[source]
    pub source: LlmError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequenceOutput {
    pub responses: Vec<String>,
    /// 1-based parts whose answers stopped at `max_tokens`.
    pub truncated: Vec<usize>,
    /// Estimated prompt plus completion tokens over the whole run.
    pub tokens_used: usize,
}

/// One provider call per part, in order, each seeing the previous answer.
/// Stops at the first failure.
pub fn run_sequence(
    parts: &[String],
    template: &PromptTemplate,
    provider: &dyn ChatProvider,
    params: &ModelParams,
) -> Result<SequenceOutput, SequenceError> {
    let mut out = SequenceOutput::default();
    for (i, content) in parts.iter().enumerate() {
        let index = i + 1;
        let previous = out.responses.last().map(String::as_str);
        let messages = build_messages(template, index, content, previous)
            .map_err(|source| SequenceError { index, source })?;
        let completion = provider
            .complete(&messages, params)
            .map_err(|source| SequenceError { index, source })?;
        if completion.truncated() {
            tracing::warn!(part = index, "completion stopped at max_tokens");
            out.truncated.push(index);
        }
        out.tokens_used += estimate_messages(&messages) + estimate_tokens(&completion.content);
        out.responses.push(completion.content);
    }
    Ok(out)
}

fn fenced_block(response: &str) -> Option<&str> {
    let start = response.find("```")?;
    let after = &response[start + 3..];
    // Skip the info string (e.g. `html`) on the opening line.
    let body = match after.find('\n') {
        Some(nl) => &after[nl + 1..],
        None => after,
    };
    let end = body.find("```").unwrap_or(body.len());
    Some(body[..end].trim())
}

/// HTML part of a model answer: the first fenced block, else the span from
/// the first `<` to the last `>`, else the trimmed answer.
pub fn extract_html_payload(response: &str) -> &str {
    if let Some(block) = fenced_block(response) {
        return block;
    }
    match (response.find('<'), response.rfind('>')) {
        (Some(a), Some(b)) if a < b => &response[a..=b],
        _ => response.trim(),
    }
}

/// JSON array inside a model answer, located like [`extract_html_payload`]
/// with brackets.
pub fn extract_json_array(response: &str) -> Option<&str> {
    let text = fenced_block(response).unwrap_or(response);
    match (text.find('['), text.rfind(']')) {
        (Some(a), Some(b)) if a < b => Some(&text[a..=b]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regen() -> PromptTemplate {
        PromptTemplate::builtin(Mode::Regenerate)
    }

    #[test]
    fn default_params() {
        let p = ModelParams::default();
        assert_eq!(p.temperature, 0.2);
        assert_eq!(p.max_tokens, 16_384);
        assert_eq!(p.top_p, 1.0);
        assert_eq!(p.frequency_penalty, 0.0);
        assert_eq!(p.presence_penalty, 0.0);
        assert_eq!(p.max_tokens as usize, MAX_OUTPUT_TOKENS);
    }

    #[test]
    fn first_part_has_no_assistant_message() {
        let m = build_messages(&regen(), 1, "<p>a</p>", None).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].role, Role::System);
        assert_eq!(m[1].role, Role::User);
        assert!(m[1].content.ends_with("<p>a</p>"));
    }

    #[test]
    fn later_parts_carry_previous_output() {
        let m = build_messages(&regen(), 2, "<p>b</p>", Some("…<div>A</div>")).unwrap();
        assert_eq!(
            m.iter().map(|m| m.role).collect::<Vec<_>>(),
            [Role::System, Role::Assistant, Role::User]
        );
        assert!(m[1].content.contains("…<div>A</div>"));
        assert!(m[2].content.contains("part 2"));
    }

    #[test]
    fn later_part_without_previous_is_an_error() {
        assert_eq!(
            build_messages(&regen(), 2, "x", None),
            Err(LlmError::MissingPrevious { index: 2 })
        );
    }

    #[test]
    fn previous_output_keeps_its_tail() {
        let previous = format!("{}<div>SEAM</div>", "h".repeat(INPUT_WINDOW * 5));
        let m = build_messages(&regen(), 2, "<p>b</p>", Some(&previous)).unwrap();
        assert!(m[1].content.ends_with("<div>SEAM</div>"));
        assert!(m[1].content.len() < previous.len());
        assert!(estimate_messages(&m) <= INPUT_WINDOW);
    }

    #[test]
    fn build_messages_is_pure() {
        let a = build_messages(&regen(), 3, "<p>c</p>", Some("<p>b</p>")).unwrap();
        let b = build_messages(&regen(), 3, "<p>c</p>", Some("<p>b</p>")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_part_is_refused() {
        let huge = "x".repeat(INPUT_WINDOW * 4 + 8);
        assert!(matches!(
            build_messages(&regen(), 1, &huge, None),
            Err(LlmError::WindowExceeded { .. })
        ));
    }

    #[test]
    fn payload_extraction() {
        assert_eq!(extract_html_payload("```html\n<p>a</p>\n```"), "<p>a</p>");
        assert_eq!(extract_html_payload("<p>a</p>"), "<p>a</p>");
        assert_eq!(
            extract_html_payload("Here is the page: <div>x</div> Done."),
            "<div>x</div>"
        );
        assert_eq!(extract_html_payload("  no markup  "), "no markup");
        assert_eq!(extract_html_payload("```\n<p>open"), "<p>open");
    }

    #[test]
    fn json_array_extraction() {
        assert_eq!(extract_json_array("[1]"), Some("[1]"));
        assert_eq!(
            extract_json_array("Sure:\n```json\n[{\"node\":5}]\n```\nthanks"),
            Some("[{\"node\":5}]")
        );
        assert_eq!(extract_json_array("no array"), None);
    }

    #[test]
    fn sequence_threads_previous_output() {
        let mock = MockProvider::scripted(["<p>one</p>", "<p>two</p>", "<p>three</p>"]);
        let parts: Vec<String> = ["<p>a</p>", "<p>b</p>", "<p>c</p>"].map(String::from).to_vec();
        let out = run_sequence(&parts, &regen(), &mock, &ModelParams::default()).unwrap();
        assert_eq!(out.responses, ["<p>one</p>", "<p>two</p>", "<p>three</p>"]);
        let calls = mock.calls();
        assert_eq!(calls.len(), 3);
        assert_eq!(calls[0].len(), 2);
        for (call, previous) in calls[1..].iter().zip(&out.responses) {
            assert_eq!(call[1].content, regen().assistant_message(previous));
        }
    }

    #[test]
    fn echo_returns_the_part() {
        let mock = MockProvider::echo();
        let parts = vec!["<main>x</main>".to_string()];
        let out = run_sequence(&parts, &regen(), &mock, &ModelParams::default()).unwrap();
        assert_eq!(out.responses, parts);
    }

    #[test]
    fn failure_aborts_with_index() {
        let mock = MockProvider::new(vec![
            MockReply::Text("<p>1</p>".into()),
            MockReply::Fail("boom".into()),
            MockReply::Text("<p>3</p>".into()),
        ]);
        let parts: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let err = run_sequence(&parts, &regen(), &mock, &ModelParams::default()).unwrap_err();
        assert_eq!(err.index, 2);
        assert_eq!(mock.call_count(), 2);
    }

    #[test]
    fn truncation_is_reported() {
        let mock = MockProvider::new(vec![MockReply::Truncated("<p>cut".into())]);
        let out = run_sequence(&["a".to_string()], &regen(), &mock, &ModelParams::default()).unwrap();
        assert_eq!(out.truncated, [1]);
    }
}
