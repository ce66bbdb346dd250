//! The ReAct agent: builds a request from recent frames, history and the
//! scratchpad, asks a model, and turns the reply into commands.

mod client;
mod memory;
mod messages;
mod prompts;
mod response;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{DefaultTimings, ParseContext};
use crate::env::WallClock;
use crate::frame::{Frame, SurfaceBounds};

pub use client::{
    redact, request_body, ChatCompletionsClient, MockModel, MockReply, ModelClient, ModelError,
    ModelReply, ModelSettings, Usage, DEFAULT_CREDENTIAL_VAR, DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE, EXTENDED_MAX_TOKENS,
};
pub use memory::{ContextWindow, HistoryEntry, Scratchpad, DEFAULT_CONTEXT_STEPS};
pub use messages::{build_messages, Message, MessageOptions, Part, Role, MEMORY_HEADER};
pub use prompts::{builtin_prompt, load_prompt};
pub use response::{parse_console_response, parse_desktop_response, AgentTurn, ResponseError};

/// Which reply format the agent is asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionInterface {
    /// JSON object naming one keyboard or mouse action.
    Desktop,
    /// Fenced list of console buttons.
    Console,
}

impl ActionInterface {
    pub fn for_bounds(bounds: SurfaceBounds) -> Self {
        if bounds == SurfaceBounds::CONSOLE {
            ActionInterface::Console
        } else {
            ActionInterface::Desktop
        }
    }
}

pub const DEFAULT_ATTEMPTS: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub interface: ActionInterface,
    pub context_steps: usize,
    /// Model calls allowed per turn, first try included.
    pub attempts: u32,
    /// Wall time to wait after a transport failure before trying again.
    pub retry_backoff_ms: u64,
    pub settings: ModelSettings,
    pub messages: MessageOptions,
    pub timings: DefaultTimings,
}

impl AgentConfig {
    pub fn new(interface: ActionInterface) -> Self {
        AgentConfig {
            interface,
            context_steps: DEFAULT_CONTEXT_STEPS,
            attempts: DEFAULT_ATTEMPTS,
            retry_backoff_ms: 1000,
            settings: ModelSettings::default(),
            messages: MessageOptions::default(),
            timings: DefaultTimings::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("model unavailable after {attempts} attempts: {last}")]
    ModelUnavailable { attempts: u32, last: ModelError },
}

/// Result of one agent turn.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub turn: AgentTurn,
    /// Model calls made for this turn.
    pub attempts: u32,
    /// Why earlier attempts (or all of them, for a no-op turn) failed.
    pub errors: Vec<String>,
    pub usage: Usage,
    /// Redacted request/response pairs, when the client provides them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchanges: Vec<serde_json::Value>,
}

impl StepOutcome {
    /// No usable reply was obtained; nothing will be executed.
    pub fn is_noop(&self) -> bool {
        self.turn.parsed.is_empty()
    }
}

pub struct Agent {
    config: AgentConfig,
    system_prompt: String,
    window: ContextWindow,
    memory: Scratchpad,
    model: Box<dyn ModelClient>,
    clock: Arc<dyn WallClock>,
}

impl Agent {
    /// `clock` is what backoff sleeps run on.
    pub fn new(
        config: AgentConfig,
        system_prompt: impl Into<String>,
        model: Box<dyn ModelClient>,
        clock: Arc<dyn WallClock>,
    ) -> Self {
        assert!(config.attempts > 0, "at least one attempt per turn");
        Agent {
            window: ContextWindow::new(config.context_steps),
            system_prompt: system_prompt.into(),
            memory: Scratchpad::new(),
            config,
            model,
            clock,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn system_prompt(&self) -> &str {
        &self.system_prompt
    }

    pub fn memory(&self) -> &Scratchpad {
        &self.memory
    }

    pub fn window(&self) -> &ContextWindow {
        &self.window
    }

    /// The request the next turn would send for `frames`.
    pub fn messages_for(&self, frames: &[Frame]) -> Vec<Message> {
        build_messages(
            &self.system_prompt,
            &self.window,
            &self.memory,
            frames,
            self.config.messages,
        )
    }

    /// Runs one turn. Unusable replies are retried; if every attempt gives
    /// an unusable reply the turn is a no-op. If every attempt fails to
    /// reach the model, the model is unavailable.
    pub fn step(
        &mut self,
        frames: &[Frame],
        bounds: SurfaceBounds,
    ) -> Result<StepOutcome, AgentError> {
        assert!(!frames.is_empty(), "a turn needs at least one frame");
        let messages = self.messages_for(frames);
        let ctx = ParseContext::new(bounds, self.config.timings);
        let mut outcome = StepOutcome::default();
        let mut last_transport = None;
        let mut reached_model = false;
        for attempt in 1..=self.config.attempts {
            outcome.attempts = attempt;
            let reply = match self.model.complete(&messages, &self.config.settings) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("model call {attempt} failed: {e}");
                    outcome.errors.push(e.to_string());
                    last_transport = Some(e);
                    if attempt < self.config.attempts {
                        self.clock.sleep_ms(self.config.retry_backoff_ms);
                    }
                    continue;
                }
            };
            reached_model = true;
            outcome.usage += reply.usage;
            outcome.exchanges.extend(reply.exchange);
            let parsed = match self.config.interface {
                ActionInterface::Desktop => parse_desktop_response(&reply.text, &ctx),
                ActionInterface::Console => parse_console_response(&reply.text, &ctx.timings),
            };
            match parsed {
                Ok(turn) => {
                    self.memory.apply_update(&turn.memory_update);
                    self.window.push(HistoryEntry {
                        frame: frames.last().expect("checked above").clone(),
                        thought: turn.thought.clone(),
                        action: turn.action_text(),
                    });
                    outcome.turn = turn;
                    return Ok(outcome);
                }
                Err(e) => {
                    log::info!("unusable reply on attempt {attempt}: {e}");
                    outcome.errors.push(e.to_string());
                    outcome.turn.raw_response = reply.text;
                }
            }
        }
        if !reached_model {
            return Err(AgentError::ModelUnavailable {
                attempts: outcome.attempts,
                last: last_transport.expect("every attempt failed"),
            });
        }
        Ok(outcome)
    }
}
