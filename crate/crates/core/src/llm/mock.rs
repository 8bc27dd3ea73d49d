use std::sync::Mutex;

use super::{ChatMessage, ChatProvider, Completion, LlmError, ModelParams, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Text(String),
    /// Answer cut off at `max_tokens`.
    Truncated(String),
    Fail(String),
}

type ReplyFn = dyn Fn(usize, &[ChatMessage]) -> MockReply + Send + Sync;

enum Behaviour {
    Script(Vec<MockReply>),
    Echo,
    Func(Box<ReplyFn>),
}

/// Deterministic provider for tests and offline runs. Every call is logged.
pub struct MockProvider {
    behaviour: Behaviour,
    log: Mutex<Vec<Vec<ChatMessage>>>,
}

impl MockProvider {
    /// Replays `replies` in order; calls beyond the script fail.
    pub fn new(replies: Vec<MockReply>) -> Self {
        Self::with(Behaviour::Script(replies))
    }

    pub fn scripted<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(replies.into_iter().map(|r| MockReply::Text(r.into())).collect())
    }

    /// Answers with the part content of the last user message: everything
    /// from its first `<` or `[`.
    pub fn echo() -> Self {
        Self::with(Behaviour::Echo)
    }

    /// `f` receives the 0-based call number and the prompt.
    pub fn from_fn(f: impl Fn(usize, &[ChatMessage]) -> MockReply + Send + Sync + 'static) -> Self {
        Self::with(Behaviour::Func(Box::new(f)))
    }

    fn with(behaviour: Behaviour) -> Self {
        MockProvider {
            behaviour,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.log.lock().expect("mock log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().expect("mock log poisoned").len()
    }
}

/// Part content of the last user message in `messages`.
pub fn user_content(messages: &[ChatMessage]) -> &str {
    let user = messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map_or("", |m| m.content.as_str());
    match user.find(['<', '[']) {
        Some(at) => &user[at..],
        None => "",
    }
}

impl ChatProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, messages: &[ChatMessage], _params: &ModelParams) -> Result<Completion, LlmError> {
        let call = {
            let mut log = self.log.lock().expect("mock log poisoned");
            log.push(messages.to_vec());
            log.len() - 1
        };
        let reply = match &self.behaviour {
            Behaviour::Script(replies) => replies
                .get(call)
                .cloned()
                .unwrap_or_else(|| MockReply::Fail(format!("script has no reply for call {}", call + 1))),
            Behaviour::Echo => MockReply::Text(user_content(messages).to_string()),
            Behaviour::Func(f) => f(call, messages),
        };
        match reply {
            MockReply::Text(content) => Ok(Completion {
                content,
                finish_reason: Some("stop".into()),
            }),
            MockReply::Truncated(content) => Ok(Completion {
                content,
                finish_reason: Some("length".into()),
            }),
            MockReply::Fail(message) => Err(LlmError::Mock(message)),
        }
    }
}
