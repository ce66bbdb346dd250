use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::frame::Frame;

/// Free-form notes the agent carries from turn to turn.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scratchpad {
    text: String,
}

impl Scratchpad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Replaces the notes with `update` unless it is empty (or only
    /// whitespace), which means "keep what you have". Returns whether the
    /// notes changed.
    pub fn apply_update(&mut self, update: &str) -> bool {
        if update.trim().is_empty() {
            return false;
        }
        self.text = update.to_string();
        true
    }
}

/// One completed turn as the model will see it later.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry {
    pub frame: Frame,
    pub thought: String,
    pub action: String,
}

/// The most recent turns, oldest first, capped at a fixed capacity.
#[derive(Clone, Debug)]
pub struct ContextWindow {
    capacity: usize,
    entries: VecDeque<HistoryEntry>,
}

pub const DEFAULT_CONTEXT_STEPS: usize = 20;

impl ContextWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "context window needs room for one turn");
        ContextWindow {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a turn, evicting the oldest one when full. Returns the
    /// evicted entry.
    pub fn push(&mut self, entry: HistoryEntry) -> Option<HistoryEntry> {
        let evicted = if self.entries.len() == self.capacity {
            self.entries.pop_front()
        } else {
            None
        };
        self.entries.push_back(entry);
        evicted
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

impl Default for ContextWindow {
    fn default() -> Self {
        Self::new(DEFAULT_CONTEXT_STEPS)
    }
}
