use serde::{Deserialize, Serialize};

use super::memory::{ContextWindow, Scratchpad};
use crate::frame::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Part {
    Text(String),
    Image(Frame),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Message {
            role,
            parts: vec![Part::Text(text.into())],
        }
    }

    /// All text parts, newline separated.
    pub fn joined_text(&self) -> String {
        let texts: Vec<&str> = self
            .parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image(_) => None,
            })
            .collect();
        texts.join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.parts
            .iter()
            .filter(|p| matches!(p, Part::Image(_)))
            .count()
    }
}

/// How history frames are attached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageOptions {
    /// Halve history frames in each dimension to keep requests small.
    pub downscale_history: bool,
}

pub const MEMORY_HEADER: &str = "Memory:";

/// Lays out a request: the system prompt, then each remembered turn as a
/// user frame followed by the assistant's thought and action, then the
/// current frames with the scratchpad after them.
pub fn build_messages(
    system_prompt: &str,
    window: &ContextWindow,
    memory: &Scratchpad,
    frames: &[Frame],
    options: MessageOptions,
) -> Vec<Message> {
    let mut messages = Vec::with_capacity(2 + 2 * window.len());
    messages.push(Message::text(Role::System, system_prompt));
    for entry in window.entries() {
        let frame = if options.downscale_history {
            entry.frame.downscale_2x()
        } else {
            entry.frame.clone()
        };
        messages.push(Message {
            role: Role::User,
            parts: vec![Part::Image(frame)],
        });
        messages.push(Message::text(
            Role::Assistant,
            format!("{}\nAction: {}", entry.thought, entry.action),
        ));
    }
    let mut current: Vec<Part> = frames.iter().cloned().map(Part::Image).collect();
    current.push(Part::Text(format!("{MEMORY_HEADER}\n{}", memory.text())));
    messages.push(Message {
        role: Role::User,
        parts: current,
    });
    messages
}
