use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::messages::{Message, Part, Role};
use crate::env::WallClock;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("model transport failed: {0}")]
    Transport(String),
    #[error("model endpoint answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected model reply: {0}")]
    BadReply(String),
    #[error("missing credential: set {0}")]
    MissingCredential(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const EXTENDED_MAX_TOKENS: u32 = 2048;

impl ModelSettings {
    pub fn new(model: impl Into<String>) -> Self {
        ModelSettings {
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Doubles the output budget for models that need longer replies.
    pub fn with_extended_output(mut self, extended: bool) -> Self {
        self.max_tokens = if extended {
            EXTENDED_MAX_TOKENS
        } else {
            DEFAULT_MAX_TOKENS
        };
        self
    }
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self::new("default")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelReply {
    pub text: String,
    pub usage: Usage,
    /// Redacted request and raw response, for the run log.
    pub exchange: Option<Value>,
}

/// A chat model that sees text and images.
pub trait ModelClient: Send {
    fn complete(
        &mut self,
        messages: &[Message],
        settings: &ModelSettings,
    ) -> Result<ModelReply, ModelError>;
}

impl<M: ModelClient + ?Sized> ModelClient for Box<M> {
    fn complete(
        &mut self,
        messages: &[Message],
        settings: &ModelSettings,
    ) -> Result<ModelReply, ModelError> {
        (**self).complete(messages, settings)
    }
}

/// One scripted answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockReply {
    Text(String),
    TransportError(String),
}

impl From<&str> for MockReply {
    fn from(s: &str) -> Self {
        MockReply::Text(s.to_string())
    }
}

impl From<String> for MockReply {
    fn from(s: String) -> Self {
        MockReply::Text(s)
    }
}

/// Plays back a fixed transcript. Once the script runs out it repeats its
/// fallback reply, or fails if there is none.
pub struct MockModel {
    script: VecDeque<MockReply>,
    fallback: Option<MockReply>,
    latency: Option<(Arc<dyn WallClock>, u64)>,
    calls: Arc<Mutex<Vec<Vec<Message>>>>,
    record_calls: bool,
}

impl MockModel {
    pub fn new<R: Into<MockReply>>(script: impl IntoIterator<Item = R>) -> Self {
        MockModel {
            script: script.into_iter().map(Into::into).collect(),
            fallback: None,
            latency: None,
            calls: Arc::default(),
            record_calls: false,
        }
    }

    /// The same reply every time.
    pub fn always(reply: impl Into<MockReply>) -> Self {
        Self::new(Vec::<MockReply>::new()).then_forever(reply)
    }

    pub fn then_forever(mut self, reply: impl Into<MockReply>) -> Self {
        self.fallback = Some(reply.into());
        self
    }

    /// Each call lets `ms` of wall time pass on `clock` before answering.
    pub fn with_latency(mut self, clock: Arc<dyn WallClock>, ms: u64) -> Self {
        self.latency = Some((clock, ms));
        self
    }

    /// Keeps a copy of every request; see [`MockModel::call_log`].
    pub fn recording(mut self) -> Self {
        self.record_calls = true;
        self
    }

    /// Shared view of the recorded requests.
    pub fn call_log(&self) -> Arc<Mutex<Vec<Vec<Message>>>> {
        Arc::clone(&self.calls)
    }
}

impl ModelClient for MockModel {
    fn complete(
        &mut self,
        messages: &[Message],
        _settings: &ModelSettings,
    ) -> Result<ModelReply, ModelError> {
        if let Some((clock, ms)) = &self.latency {
            clock.sleep_ms(*ms);
        }
        if self.record_calls {
            self.calls.lock().unwrap().push(messages.to_vec());
        }
        let reply = self
            .script
            .pop_front()
            .or_else(|| self.fallback.clone())
            .ok_or_else(|| ModelError::Transport("mock transcript exhausted".into()))?;
        match reply {
            MockReply::Text(text) => Ok(ModelReply {
                usage: estimate_usage(messages, &text),
                text,
                exchange: None,
            }),
            MockReply::TransportError(e) => Err(ModelError::Transport(e)),
        }
    }
}

/// Rough token counts for models that do not report any: four characters
/// per token, plus a flat charge per image.
fn estimate_usage(messages: &[Message], reply: &str) -> Usage {
    const IMAGE_TOKENS: u64 = 258;
    let prompt = messages
        .iter()
        .flat_map(|m| &m.parts)
        .map(|p| match p {
            Part::Text(t) => (t.len() as u64).div_ceil(4),
            Part::Image(_) => IMAGE_TOKENS,
        })
        .sum();
    Usage {
        prompt_tokens: prompt,
        completion_tokens: (reply.len() as u64).div_ceil(4),
    }
}

pub const DEFAULT_CREDENTIAL_VAR: &str = "ARCADE_API_KEY";

/// Client for an OpenAI-style `chat/completions` endpoint.
pub struct ChatCompletionsClient {
    endpoint: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl ChatCompletionsClient {
    /// Reads the API key from `credential_var`. A missing variable is fine
    /// for endpoints that need no key.
    pub fn new(endpoint: impl Into<String>, credential_var: &str) -> Result<Self, ModelError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        Ok(ChatCompletionsClient {
            endpoint: endpoint.into(),
            api_key: std::env::var(credential_var).ok().filter(|k| !k.is_empty()),
            http,
        })
    }
}

impl ModelClient for ChatCompletionsClient {
    fn complete(
        &mut self,
        messages: &[Message],
        settings: &ModelSettings,
    ) -> Result<ModelReply, ModelError> {
        let body = request_body(messages, settings)?;
        let mut request = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        if !status.is_success() {
            let status = status.as_u16();
            // rate limits and server errors are worth retrying
            return Err(if status == 429 || status >= 500 {
                ModelError::Transport(format!("HTTP {status}"))
            } else {
                ModelError::Status { status, body: text }
            });
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| ModelError::BadReply(e.to_string()))?;
        let (reply, usage) = parse_completion(&value)?;
        Ok(ModelReply {
            text: reply,
            usage,
            exchange: Some(json!({ "request": redact(&body), "response": value })),
        })
    }
}

/// The request payload. Images travel as PNG data URLs.
pub fn request_body(messages: &[Message], settings: &ModelSettings) -> Result<Value, ModelError> {
    let messages = messages
        .iter()
        .map(|m| {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            let content = match m.parts.as_slice() {
                [Part::Text(t)] => Value::String(t.clone()),
                parts => Value::Array(parts.iter().map(part_json).collect::<Result<_, _>>()?),
            };
            Ok(json!({ "role": role, "content": content }))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(json!({
        "model": settings.model,
        "messages": messages,
        "temperature": settings.temperature,
        "max_tokens": settings.max_tokens,
    }))
}

fn part_json(part: &Part) -> Result<Value, ModelError> {
    Ok(match part {
        Part::Text(t) => json!({ "type": "text", "text": t }),
        Part::Image(frame) => {
            let png = frame
                .to_png()
                .map_err(|e| ModelError::Transport(e.to_string()))?;
            let url = format!(
                "data:image/png;base64,{}",
                base64::engine::general_purpose::STANDARD.encode(png)
            );
            json!({ "type": "image_url", "image_url": { "url": url } })
        }
    })
}

/// Copy of a request with image payloads replaced by their size, so logs
/// stay small. Credentials are never part of the body.
pub fn redact(body: &Value) -> Value {
    match body {
        Value::String(s) if s.starts_with("data:image/") => {
            Value::String(format!("<image {} bytes>", s.len()))
        }
        Value::Array(items) => Value::Array(items.iter().map(redact).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), redact(v)))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn parse_completion(value: &Value) -> Result<(String, Usage), ModelError> {
    let content = &value["choices"][0]["message"]["content"];
    let text = match content {
        Value::String(s) => s.clone(),
        // some servers answer with a list of content parts
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        _ => return Err(ModelError::BadReply("no choices[0].message.content".into())),
    };
    let usage = Usage {
        prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok((text, usage))
}
