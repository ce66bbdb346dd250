use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::action::{
    parse_dos_action_with, parse_gameboy_actions, ActionCommand, ActionError, DefaultTimings,
    Hazard, ParseContext,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResponseError {
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error(transparent)]
    Action(#[from] ActionError),
}

/// One ReAct cycle as parsed from the model's reply.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub thought: String,
    pub action_name: String,
    pub action_input: String,
    pub memory_update: String,
    pub raw_response: String,
    pub parsed: Vec<ActionCommand>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hazards: Vec<Hazard>,
}

impl AgentTurn {
    /// The action as the agent stated it, `name input`.
    pub fn action_text(&self) -> String {
        if self.action_input.is_empty() {
            self.action_name.clone()
        } else {
            format!("{} {}", self.action_name, self.action_input)
        }
    }
}

/// Reads a desktop reply: a JSON object with `thought`, `action`,
/// `action_input` and `memory`. Code fences and text around the object are
/// tolerated, as are raw line breaks inside its strings.
pub fn parse_desktop_response(text: &str, ctx: &ParseContext) -> Result<AgentTurn, ResponseError> {
    let object = extract_object(text)
        .ok_or_else(|| ResponseError::Malformed("no JSON object found".into()))?;
    let value: Value = serde_json::from_str(object)
        .or_else(|_| serde_json::from_str(&escape_raw_controls(object)))
        .map_err(|e| ResponseError::Malformed(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(ResponseError::Malformed("reply is not an object".into()));
    };
    let field = |name: &str| -> Result<Option<String>, ResponseError> {
        match map.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v @ (Value::Number(_) | Value::Bool(_))) => Ok(Some(v.to_string())),
            Some(_) => Err(ResponseError::Malformed(format!("field {name:?} is not text"))),
        }
    };
    let action_name = field("action")?
        .ok_or_else(|| ResponseError::Malformed("missing \"action\"".into()))?
        .trim()
        .to_string();
    let action_input = field("action_input")?.unwrap_or_default();
    let command = parse_dos_action_with(&action_name, &action_input, ctx)?;
    Ok(AgentTurn {
        thought: field("thought")?.unwrap_or_default(),
        action_name,
        action_input,
        memory_update: field("memory")?.unwrap_or_default(),
        raw_response: text.to_string(),
        hazards: command.hazards(),
        parsed: vec![command],
    })
}

/// Reads a console reply: one fenced ` ```actions ` block, with everything
/// outside it taken as the thought.
pub fn parse_console_response(
    text: &str,
    timings: &DefaultTimings,
) -> Result<AgentTurn, ResponseError> {
    let actions = parse_gameboy_actions(text, timings)?;
    let before = text[..actions.block.start].trim();
    let after = text[actions.block.end..].trim();
    let thought = match (before.is_empty(), after.is_empty()) {
        (false, false) => format!("{before}\n{after}"),
        (false, true) => before.to_string(),
        _ => after.to_string(),
    };
    let body = text[actions.block.clone()]
        .trim_start_matches("```actions")
        .trim_end_matches("```")
        .trim()
        .to_string();
    Ok(AgentTurn {
        thought,
        action_name: "press_button".into(),
        action_input: body,
        memory_update: String::new(),
        raw_response: text.to_string(),
        hazards: actions.hazards,
        parsed: vec![ActionCommand::ButtonSequence(actions.chords)],
    })
}

/// The first balanced `{...}` in `text`, skipping braces inside strings.
fn extract_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Escapes literal control characters that appear inside JSON strings.
fn escape_raw_controls(json: &str) -> String {
    let mut out = String::with_capacity(json.len());
    let mut in_string = false;
    let mut escaped = false;
    for c in json.chars() {
        if in_string {
            match c {
                _ if escaped => {
                    escaped = false;
                    out.push(c);
                }
                '\\' => {
                    escaped = true;
                    out.push(c);
                }
                '"' => {
                    in_string = false;
                    out.push(c);
                }
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                '\t' => out.push_str("\\t"),
                c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                c => out.push(c),
            }
        } else {
            if c == '"' {
                in_string = true;
            }
            out.push(c);
        }
    }
    out
}
