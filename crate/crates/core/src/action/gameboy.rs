use std::ops::Range;

use super::{ActionError, Button, ButtonChord, DefaultTimings, Hazard};

const OPEN_FENCE: &str = "```actions";
const FENCE: &str = "```";

/// Result of parsing a console action block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ButtonActions {
    pub chords: Vec<ButtonChord>,
    pub hazards: Vec<Hazard>,
    /// Byte range of the whole fenced block (fences included) in the input.
    pub block: Range<usize>,
}

/// Parses the single ` ```actions ` block in an agent response.
///
/// The block holds a list like `["A", ("B", "UP"), "RIGHT"]`: a bare name is
/// a one-button chord, a tuple is a simultaneous chord. Quotes may be single
/// or double or omitted, trailing commas are allowed and `#` starts a comment.
/// Every chord lasts `timings.button_press_ms`.
pub fn parse_gameboy_actions(
    text: &str,
    timings: &DefaultTimings,
) -> Result<ButtonActions, ActionError> {
    let opens: Vec<usize> = text.match_indices(OPEN_FENCE).map(|(i, _)| i).collect();
    if opens.len() != 1 {
        return Err(ActionError::NoActionBlock { found: opens.len() });
    }
    let body_start = opens[0] + OPEN_FENCE.len();
    let Some(close) = text[body_start..].find(FENCE) else {
        return Err(ActionError::NoActionBlock { found: 0 });
    };
    let body_end = body_start + close;
    let mut parser = ListParser {
        src: &text[body_start..body_end],
        pos: 0,
        offset: body_start,
    };
    let items = parser.parse()?;

    let mut chords = Vec::with_capacity(items.len());
    for item in items {
        let buttons = item
            .into_iter()
            .map(|name| Button::parse(name))
            .collect::<Result<Vec<_>, _>>()?;
        chords.push(ButtonChord::new(buttons, timings.button_press_ms)?);
    }
    let hazards = chords
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_reset_combo())
        .map(|(chord, _)| Hazard::StartSelect { chord })
        .collect();
    Ok(ButtonActions {
        chords,
        hazards,
        block: opens[0]..body_end + FENCE.len(),
    })
}

struct ListParser<'a> {
    src: &'a str,
    pos: usize,
    offset: usize,
}

impl<'a> ListParser<'a> {
    fn err(&self, reason: impl Into<String>) -> ActionError {
        ActionError::MalformedList {
            at: self.offset + self.pos,
            reason: reason.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_trivia(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(b) = self.peek() {
                    if b == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Returns one entry per chord; each entry is the list of button names.
    fn parse(&mut self) -> Result<Vec<Vec<&'a str>>, ActionError> {
        self.skip_trivia();
        let bracketed = self.peek() == Some(b'[');
        if bracketed {
            self.pos += 1;
        }
        let close = if bracketed { Some(b']') } else { None };
        let items = self.sequence(close, true)?;
        if bracketed {
            self.pos += 1;
        }
        self.skip_trivia();
        if self.pos != self.src.len() {
            return Err(self.err("unexpected text after the action list"));
        }
        Ok(items)
    }

    /// Comma-separated entries up to `close` (or end of input when `None`).
    /// Tuples are only allowed at the top level.
    fn sequence(
        &mut self,
        close: Option<u8>,
        allow_tuples: bool,
    ) -> Result<Vec<Vec<&'a str>>, ActionError> {
        let mut items = Vec::new();
        loop {
            self.skip_trivia();
            match (self.peek(), close) {
                (None, None) => return Ok(items),
                (None, Some(c)) => return Err(self.err(format!("missing '{}'", c as char))),
                (Some(b), Some(c)) if b == c => return Ok(items),
                _ => {}
            }
            let item = match self.peek() {
                Some(b'(') if allow_tuples => {
                    self.pos += 1;
                    let inner = self.sequence(Some(b')'), false)?;
                    self.pos += 1;
                    if inner.is_empty() {
                        return Err(ActionError::EmptyTuple);
                    }
                    inner.into_iter().flatten().collect()
                }
                Some(b'(') => return Err(self.err("nested tuple")),
                _ => vec![self.name()?],
            };
            items.push(item);
            self.skip_trivia();
            match (self.peek(), close) {
                (Some(b','), _) => self.pos += 1,
                (None, None) => return Ok(items),
                (Some(b), Some(c)) if b == c => return Ok(items),
                _ => return Err(self.err("expected ','")),
            }
        }
    }

    fn name(&mut self) -> Result<&'a str, ActionError> {
        match self.peek() {
            Some(q @ (b'"' | b'\'')) => {
                let start = self.pos + 1;
                let len = self.src[start..]
                    .find(q as char)
                    .ok_or_else(|| self.err("unterminated string"))?;
                self.pos = start + len + 1;
                Ok(&self.src[start..start + len])
            }
            Some(b) if b.is_ascii_alphanumeric() || b == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
                    self.pos += 1;
                }
                Ok(&self.src[start..self.pos])
            }
            _ => Err(self.err("expected a button name")),
        }
    }
}
