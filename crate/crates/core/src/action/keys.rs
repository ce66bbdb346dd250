use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ActionError;

/// Canonical key names, spelled the way browser `KeyboardEvent.code`
/// values are.
const KEY_NAMES: &[&str] = &[
    "KeyA", "KeyB", "KeyC", "KeyD", "KeyE", "KeyF", "KeyG", "KeyH", "KeyI", "KeyJ", "KeyK",
    "KeyL", "KeyM", "KeyN", "KeyO", "KeyP", "KeyQ", "KeyR", "KeyS", "KeyT", "KeyU", "KeyV",
    "KeyW", "KeyX", "KeyY", "KeyZ", "Digit0", "Digit1", "Digit2", "Digit3", "Digit4", "Digit5",
    "Digit6", "Digit7", "Digit8", "Digit9", "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9",
    "F10", "F11", "F12", "ArrowLeft", "ArrowRight", "ArrowUp", "ArrowDown", "Enter", "Escape",
    "Backspace", "Tab", "Space", "Control", "Alt", "Shift", "Meta", "Delete", "Insert", "Home",
    "End", "PageUp", "PageDown", "CapsLock", "Minus", "Equal", "BracketLeft", "BracketRight",
    "Semicolon", "Quote", "Comma", "Period", "Slash", "Backslash", "Backquote",
];

const ALIASES: &[(&str, &str)] = &[
    ("ctrl", "Control"),
    ("esc", "Escape"),
    ("return", "Enter"),
    ("up", "ArrowUp"),
    ("down", "ArrowDown"),
    ("left", "ArrowLeft"),
    ("right", "ArrowRight"),
    ("del", "Delete"),
    ("pgup", "PageUp"),
    ("pgdn", "PageDown"),
];

/// A keyboard key from the closed vocabulary.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key(&'static str);

impl Key {
    /// Resolves a key name. Canonical names match case-insensitively; bare
    /// letters and digits (`A`, `7`) and a few common abbreviations (`Ctrl`,
    /// `Esc`) are accepted as aliases.
    pub fn parse(name: &str) -> Result<Key, ActionError> {
        let name = name.trim();
        if let Some(k) = KEY_NAMES.iter().find(|k| k.eq_ignore_ascii_case(name)) {
            return Ok(Key(k));
        }
        let mut chars = name.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            let canonical = if c.is_ascii_alphabetic() {
                Some(format!("Key{}", c.to_ascii_uppercase()))
            } else if c.is_ascii_digit() {
                Some(format!("Digit{c}"))
            } else {
                None
            };
            if let Some(k) = canonical.and_then(|n| KEY_NAMES.iter().find(|k| **k == n)) {
                return Ok(Key(k));
            }
        }
        if let Some((_, target)) = ALIASES.iter().find(|(a, _)| a.eq_ignore_ascii_case(name)) {
            return Ok(Key(KEY_NAMES.iter().find(|k| *k == target).expect("alias target")));
        }
        Err(ActionError::UnknownKey(name.to_string()))
    }

    pub fn name(&self) -> &'static str {
        self.0
    }

    pub fn is_arrow(&self) -> bool {
        self.0.starts_with("Arrow")
    }

    /// Every canonical key.
    pub fn all() -> impl Iterator<Item = Key> {
        KEY_NAMES.iter().map(|k| Key(k))
    }

    pub const ARROW_LEFT: Key = Key("ArrowLeft");
    pub const ARROW_RIGHT: Key = Key("ArrowRight");
    pub const ARROW_UP: Key = Key("ArrowUp");
    pub const ARROW_DOWN: Key = Key("ArrowDown");
    pub const SPACE: Key = Key("Space");
    pub const CONTROL: Key = Key("Control");
    pub const SHIFT: Key = Key("Shift");
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.0)
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Key::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Console buttons. The set is closed: exactly these eight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Button {
    A,
    B,
    Start,
    Select,
    Up,
    Down,
    Left,
    Right,
}

impl Button {
    pub const ALL: [Button; 8] = [
        Button::A,
        Button::B,
        Button::Start,
        Button::Select,
        Button::Up,
        Button::Down,
        Button::Left,
        Button::Right,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Button::A => "A",
            Button::B => "B",
            Button::Start => "START",
            Button::Select => "SELECT",
            Button::Up => "UP",
            Button::Down => "DOWN",
            Button::Left => "LEFT",
            Button::Right => "RIGHT",
        }
    }

    /// Exact, case-sensitive match against the eight button names.
    pub fn parse(name: &str) -> Result<Button, ActionError> {
        Button::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| ActionError::UnknownButton(name.to_string()))
    }
}

impl fmt::Display for Button {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
