//! The text action interface agents and humans use to drive games.
//!
//! Two surface syntaxes share one command model:
//!
//! * console agents answer with a fenced ` ```actions ` block holding a
//!   Python-style list of button names and tuples (see [`parse_gameboy_actions`]);
//! * desktop agents name an action and its input (see [`parse_dos_action`]),
//!   which also has a one-line canonical form `name input` produced by
//!   [`serialize`] and read back by [`parse_command_line`].
//!
//! The grammar is written out in `docs/action-grammar.md`.

mod gameboy;
mod keys;
mod line;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::frame::SurfaceBounds;

pub use gameboy::{parse_gameboy_actions, ButtonActions};
pub use keys::{Button, Key};
pub use line::{parse_action_text, parse_command_line, parse_dos_action, parse_dos_action_with};

/// Longest accepted press or hold, in milliseconds (one day).
pub const MAX_DURATION_MS: u64 = 86_400_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("expected exactly one ```actions block, found {found}")]
    NoActionBlock { found: usize },
    #[error("malformed action list at byte {at}: {reason}")]
    MalformedList { at: usize, reason: String },
    #[error("unknown button {0:?}; valid buttons are A, B, START, SELECT, UP, DOWN, LEFT, RIGHT")]
    UnknownButton(String),
    #[error("empty button tuple")]
    EmptyTuple,
    #[error("button {0} appears twice in one chord")]
    DuplicateButton(Button),
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("empty command")]
    EmptyCommand,
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("empty key chord")]
    EmptyChord,
    #[error("key {0} appears twice in one chord")]
    DuplicateKey(Key),
    #[error("unknown click option {0:?}; expected left, right, shift, ctrl or alt")]
    UnknownClickOption(String),
    #[error("malformed coordinates {0:?}; expected x,y")]
    MalformedCoordinates(String),
    #[error("coordinate ({x}, {y}) is outside the {bounds} surface")]
    CoordinateOutOfRange { x: i64, y: i64, bounds: SurfaceBounds },
    #[error("bad duration {0:?}; expected positive seconds")]
    BadDuration(String),
    #[error("bad scroll amount {0:?}; expected a positive integer")]
    BadAmount(String),
    #[error("write needs non-empty text")]
    EmptyText,
}

/// Default press lengths applied when a command does not state one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefaultTimings {
    pub key_press_ms: u64,
    pub button_press_ms: u64,
    pub hold_key_ms: u64,
}

impl Default for DefaultTimings {
    fn default() -> Self {
        DefaultTimings {
            key_press_ms: 100,
            button_press_ms: 500,
            hold_key_ms: 500,
        }
    }
}

/// Everything a parser needs beyond the text itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseContext {
    pub bounds: SurfaceBounds,
    pub timings: DefaultTimings,
}

impl ParseContext {
    pub fn new(bounds: SurfaceBounds, timings: DefaultTimings) -> Self {
        ParseContext { bounds, timings }
    }

    pub fn desktop() -> Self {
        ParseContext::default()
    }

    pub fn console() -> Self {
        ParseContext {
            bounds: SurfaceBounds::CONSOLE,
            ..Default::default()
        }
    }
}

/// Buttons pressed together for `duration_ms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ButtonChord {
    buttons: Vec<Button>,
    duration_ms: u64,
}

impl ButtonChord {
    pub fn new(buttons: Vec<Button>, duration_ms: u64) -> Result<Self, ActionError> {
        if buttons.is_empty() {
            return Err(ActionError::EmptyTuple);
        }
        if let Some(dup) = first_duplicate(&buttons) {
            return Err(ActionError::DuplicateButton(dup));
        }
        check_duration_ms(duration_ms)?;
        Ok(ButtonChord {
            buttons,
            duration_ms,
        })
    }

    pub fn buttons(&self) -> &[Button] {
        &self.buttons
    }

    pub fn duration_ms(&self) -> u64 {
        self.duration_ms
    }

    /// START and SELECT together reset most handheld emulators.
    pub fn is_reset_combo(&self) -> bool {
        self.buttons.contains(&Button::Start) && self.buttons.contains(&Button::Select)
    }
}

/// Keys pressed together for `duration_ms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyChord {
    keys: Vec<Key>,
    duration_ms: u64,
}

impl KeyChord {
    pub fn new(keys: Vec<Key>, duration_ms: u64) -> Result<Self, ActionError> {
        if keys.is_empty() {
            return Err(ActionError::EmptyChord);
        }
        if let Some(dup) = first_duplicate(&keys) {
            return Err(ActionError::DuplicateKey(dup));
        }
        check_duration_ms(duration_ms)?;
        Ok(KeyChord { keys, duration_ms })
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn duration_ms(&self) -> u64 {
        self.duration_ms
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MouseButton {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Modifiers {
    pub shift: bool,
    pub ctrl: bool,
    pub alt: bool,
}

impl Modifiers {
    pub const NONE: Modifiers = Modifiers {
        shift: false,
        ctrl: false,
        alt: false,
    };
}

/// A parsed agent intent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionCommand {
    ButtonSequence(Vec<ButtonChord>),
    KeySequence(Vec<KeyChord>),
    HoldKey { key: Key, duration_ms: u64 },
    Click { button: MouseButton, modifiers: Modifiers },
    MouseMove { x: u32, y: u32 },
    Drag { x: u32, y: u32 },
    ScrollUp(u32),
    ScrollDown(u32),
    Write(String),
}

/// A parse-time warning that does not make a command invalid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hazard {
    /// Chord at this index presses START and SELECT together.
    StartSelect { chord: usize },
}

impl ActionCommand {
    pub fn name(&self) -> &'static str {
        match self {
            ActionCommand::ButtonSequence(_) => "press_button",
            ActionCommand::KeySequence(_) => "press_key",
            ActionCommand::HoldKey { .. } => "hold_key",
            ActionCommand::Click { .. } => "click",
            ActionCommand::MouseMove { .. } => "move",
            ActionCommand::Drag { .. } => "drag",
            ActionCommand::ScrollUp(_) => "scroll_up",
            ActionCommand::ScrollDown(_) => "scroll_down",
            ActionCommand::Write(_) => "write",
        }
    }

    /// Checks the invariants a parser would enforce, against `bounds`.
    pub fn validate(&self, bounds: SurfaceBounds) -> Result<(), ActionError> {
        match self {
            ActionCommand::ButtonSequence(chords) => chords
                .iter()
                .try_for_each(|c| ButtonChord::new(c.buttons.clone(), c.duration_ms).map(drop)),
            ActionCommand::KeySequence(chords) => chords
                .iter()
                .try_for_each(|c| KeyChord::new(c.keys.clone(), c.duration_ms).map(drop)),
            ActionCommand::HoldKey { duration_ms, .. } => check_duration_ms(*duration_ms),
            ActionCommand::MouseMove { x, y } | ActionCommand::Drag { x, y } => {
                check_point(*x as i64, *y as i64, bounds).map(drop)
            }
            ActionCommand::ScrollUp(n) | ActionCommand::ScrollDown(n) if *n == 0 => {
                Err(ActionError::BadAmount("0".into()))
            }
            ActionCommand::Write(text) if text.is_empty() => Err(ActionError::EmptyText),
            _ => Ok(()),
        }
    }

    /// Splits the command into atomic steps, each paired with how long its
    /// inputs stay asserted. Sequences become one step per chord; pointer
    /// and text commands are instantaneous.
    pub fn atoms(&self) -> Vec<(ActionCommand, u64)> {
        match self {
            ActionCommand::ButtonSequence(chords) => chords
                .iter()
                .map(|c| (ActionCommand::ButtonSequence(vec![c.clone()]), c.duration_ms))
                .collect(),
            ActionCommand::KeySequence(chords) => chords
                .iter()
                .map(|c| (ActionCommand::KeySequence(vec![c.clone()]), c.duration_ms))
                .collect(),
            ActionCommand::HoldKey { duration_ms, .. } => vec![(self.clone(), *duration_ms)],
            other => vec![(other.clone(), 0)],
        }
    }

    /// Total time the command keeps inputs asserted.
    pub fn duration_ms(&self) -> u64 {
        self.atoms().iter().map(|(_, d)| d).sum()
    }

    pub fn hazards(&self) -> Vec<Hazard> {
        match self {
            ActionCommand::ButtonSequence(chords) => chords
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_reset_combo())
                .map(|(chord, _)| Hazard::StartSelect { chord })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// The chord's single arrow key, if this is a one-chord, one-key press
    /// (or hold) of an arrow.
    pub fn single_arrow(&self) -> Option<Key> {
        match self {
            ActionCommand::KeySequence(chords) if chords.len() == 1 => match chords[0].keys() {
                [k] if k.is_arrow() => Some(*k),
                _ => None,
            },
            ActionCommand::HoldKey { key, .. } if key.is_arrow() => Some(*key),
            _ => None,
        }
    }
}

/// Canonical one-line form. Chord durations equal to the defaults in
/// `timings` are omitted; any other duration is written as `@seconds`.
pub fn serialize(command: &ActionCommand, timings: &DefaultTimings) -> String {
    let input = match command {
        ActionCommand::ButtonSequence(chords) => join_chords(chords.iter().map(|c| {
            let names: Vec<&str> = c.buttons.iter().map(|b| b.name()).collect();
            with_duration(names.join("+"), c.duration_ms, timings.button_press_ms)
        })),
        ActionCommand::KeySequence(chords) => join_chords(chords.iter().map(|c| {
            let names: Vec<&str> = c.keys.iter().map(|k| k.name()).collect();
            with_duration(names.join("+"), c.duration_ms, timings.key_press_ms)
        })),
        ActionCommand::HoldKey { key, duration_ms } => {
            if *duration_ms == timings.hold_key_ms {
                key.to_string()
            } else {
                format!("{key},{}", format_seconds(*duration_ms))
            }
        }
        ActionCommand::Click { button, modifiers } => {
            let mut opts = Vec::new();
            if *button == MouseButton::Right {
                opts.push("right");
            }
            if modifiers.shift {
                opts.push("shift");
            }
            if modifiers.ctrl {
                opts.push("ctrl");
            }
            if modifiers.alt {
                opts.push("alt");
            }
            opts.join("+")
        }
        ActionCommand::MouseMove { x, y } | ActionCommand::Drag { x, y } => format!("{x},{y}"),
        ActionCommand::ScrollUp(n) | ActionCommand::ScrollDown(n) => n.to_string(),
        ActionCommand::Write(text) => text.clone(),
    };
    if input.is_empty() {
        command.name().to_string()
    } else {
        format!("{} {}", command.name(), input)
    }
}

fn join_chords(parts: impl Iterator<Item = String>) -> String {
    parts.collect::<Vec<_>>().join(",")
}

fn with_duration(chord: String, ms: u64, default_ms: u64) -> String {
    if ms == default_ms {
        chord
    } else {
        format!("{chord}@{}", format_seconds(ms))
    }
}

/// Milliseconds as a short decimal number of seconds (`1500` -> `1.5`).
pub fn format_seconds(ms: u64) -> String {
    let (whole, frac) = (ms / 1000, ms % 1000);
    if frac == 0 {
        whole.to_string()
    } else {
        let frac = format!("{frac:03}");
        format!("{whole}.{}", frac.trim_end_matches('0'))
    }
}

/// Decimal seconds to whole milliseconds. Zero, negative, non-finite, or
/// absurdly long values are rejected.
pub fn parse_seconds(text: &str) -> Result<u64, ActionError> {
    let bad = || ActionError::BadDuration(text.to_string());
    let t = text.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return Err(bad());
    }
    let secs: f64 = t.parse().map_err(|_| bad())?;
    let ms = (secs * 1000.0).round();
    if !(ms >= 1.0 && ms <= MAX_DURATION_MS as f64) {
        return Err(bad());
    }
    Ok(ms as u64)
}

fn check_duration_ms(ms: u64) -> Result<(), ActionError> {
    if ms == 0 || ms > MAX_DURATION_MS {
        return Err(ActionError::BadDuration(format_seconds(ms)));
    }
    Ok(())
}

fn check_point(x: i64, y: i64, bounds: SurfaceBounds) -> Result<(u32, u32), ActionError> {
    if !bounds.contains(x, y) {
        return Err(ActionError::CoordinateOutOfRange { x, y, bounds });
    }
    Ok((x as u32, y as u32))
}

fn first_duplicate<T: PartialEq + Copy>(items: &[T]) -> Option<T> {
    items
        .iter()
        .enumerate()
        .find(|(i, a)| items[..*i].contains(a))
        .map(|(_, a)| *a)
}

impl fmt::Display for ActionCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self, &DefaultTimings::default()))
    }
}

/// Parses the canonical line form with default timings and unbounded-enough
/// coordinates (`u32::MAX`); callers that need surface checks use
/// [`parse_command_line`] with their own context.
impl FromStr for ActionCommand {
    type Err = ActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ctx = ParseContext {
            bounds: SurfaceBounds::new(u32::MAX, u32::MAX),
            timings: DefaultTimings::default(),
        };
        parse_command_line(s, &ctx)
    }
}

impl Serialize for ActionCommand {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ActionCommand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
