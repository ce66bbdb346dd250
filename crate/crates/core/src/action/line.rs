use super::gameboy::parse_gameboy_actions;
use super::{
    check_point, parse_seconds, ActionCommand, ActionError, Button, ButtonChord, Key, KeyChord,
    Modifiers, MouseButton, ParseContext,
};

/// Parses `name input` (the canonical one-line form). The input is
/// everything after the first space; it is trimmed for every action except
/// `write`, whose text is taken verbatim.
pub fn parse_command_line(line: &str, ctx: &ParseContext) -> Result<ActionCommand, ActionError> {
    let line = line.trim_start();
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() {
        return Err(ActionError::EmptyCommand);
    }
    let (name, input) = match line.find(|c: char| c == ' ' || c == '\t') {
        Some(i) => (&line[..i], &line[i + 1..]),
        None => (line, ""),
    };
    parse_dos_action_with(name, input, ctx)
}

/// Parses an action name and input using the desktop surface and default
/// timings.
pub fn parse_dos_action(action_name: &str, action_input: &str) -> Result<ActionCommand, ActionError> {
    parse_dos_action_with(action_name, action_input, &ParseContext::desktop())
}

pub fn parse_dos_action_with(
    action_name: &str,
    action_input: &str,
    ctx: &ParseContext,
) -> Result<ActionCommand, ActionError> {
    let input = action_input.trim();
    match action_name.trim() {
        "click" => parse_click(input),
        "move" => {
            let (x, y) = parse_point(input, ctx)?;
            Ok(ActionCommand::MouseMove { x, y })
        }
        "drag" => {
            let (x, y) = parse_point(input, ctx)?;
            Ok(ActionCommand::Drag { x, y })
        }
        "scroll_up" => Ok(ActionCommand::ScrollUp(parse_amount(input)?)),
        "scroll_down" => Ok(ActionCommand::ScrollDown(parse_amount(input)?)),
        "write" => {
            if action_input.is_empty() {
                Err(ActionError::EmptyText)
            } else {
                Ok(ActionCommand::Write(action_input.to_string()))
            }
        }
        "press_key" => parse_key_sequence(input, ctx),
        "hold_key" => parse_hold(input, ctx),
        "press_button" => parse_button_sequence(input, ctx),
        "" => Err(ActionError::EmptyCommand),
        other => Err(ActionError::UnknownAction(other.to_string())),
    }
}

/// Accepts either a fenced console action block or a canonical command line.
/// This is the entry point shared by agents, the CLI and the human console.
pub fn parse_action_text(text: &str, ctx: &ParseContext) -> Result<ActionCommand, ActionError> {
    if text.contains("```") {
        let parsed = parse_gameboy_actions(text, &ctx.timings)?;
        Ok(ActionCommand::ButtonSequence(parsed.chords))
    } else {
        parse_command_line(text, ctx)
    }
}

fn parse_click(input: &str) -> Result<ActionCommand, ActionError> {
    let mut button = MouseButton::Left;
    let mut modifiers = Modifiers::NONE;
    if !input.is_empty() {
        for opt in input.split('+') {
            match opt.trim().to_ascii_lowercase().as_str() {
                "left" => button = MouseButton::Left,
                "right" => button = MouseButton::Right,
                "shift" => modifiers.shift = true,
                "ctrl" | "control" => modifiers.ctrl = true,
                "alt" => modifiers.alt = true,
                _ => return Err(ActionError::UnknownClickOption(opt.trim().to_string())),
            }
        }
    }
    Ok(ActionCommand::Click { button, modifiers })
}

fn parse_point(input: &str, ctx: &ParseContext) -> Result<(u32, u32), ActionError> {
    let malformed = || ActionError::MalformedCoordinates(input.to_string());
    let inner = input
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(input);
    let (x, y) = inner.split_once(',').ok_or_else(malformed)?;
    let parse = |s: &str| {
        let s = s.trim();
        let digits = s.strip_prefix('-').unwrap_or(s);
        if digits.is_empty() || digits.len() > 12 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        s.parse::<i64>().map_err(|_| malformed())
    };
    let (x, y) = (parse(x)?, parse(y)?);
    check_point(x, y, ctx.bounds)
}

fn parse_amount(input: &str) -> Result<u32, ActionError> {
    match input.parse::<u32>() {
        Ok(n) if n > 0 && input.bytes().all(|b| b.is_ascii_digit()) => Ok(n),
        _ => Err(ActionError::BadAmount(input.to_string())),
    }
}

/// Splits an optional `@seconds` suffix off a chord token.
fn split_duration(token: &str, default_ms: u64) -> Result<(&str, u64), ActionError> {
    match token.split_once('@') {
        Some((chord, secs)) => Ok((chord, parse_seconds(secs)?)),
        None => Ok((token, default_ms)),
    }
}

// `,` separates chords pressed one after another; `+` binds keys pressed
// together, so it always binds tighter.
fn parse_key_sequence(input: &str, ctx: &ParseContext) -> Result<ActionCommand, ActionError> {
    let mut chords = Vec::new();
    for token in input.split(',') {
        let (chord, ms) = split_duration(token.trim(), ctx.timings.key_press_ms)?;
        if chord.trim().is_empty() {
            return Err(ActionError::EmptyChord);
        }
        let keys = chord
            .split('+')
            .map(|k| {
                if k.trim().is_empty() {
                    Err(ActionError::EmptyChord)
                } else {
                    Key::parse(k)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        chords.push(KeyChord::new(keys, ms)?);
    }
    Ok(ActionCommand::KeySequence(chords))
}

fn parse_button_sequence(input: &str, ctx: &ParseContext) -> Result<ActionCommand, ActionError> {
    if input.is_empty() {
        return Ok(ActionCommand::ButtonSequence(Vec::new()));
    }
    let mut chords = Vec::new();
    for token in input.split(',') {
        let (chord, ms) = split_duration(token.trim(), ctx.timings.button_press_ms)?;
        if chord.trim().is_empty() {
            return Err(ActionError::EmptyTuple);
        }
        let buttons = chord
            .split('+')
            .map(|b| Button::parse(b.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        chords.push(ButtonChord::new(buttons, ms)?);
    }
    Ok(ActionCommand::ButtonSequence(chords))
}

fn parse_hold(input: &str, ctx: &ParseContext) -> Result<ActionCommand, ActionError> {
    let (key, secs) = match input.split_once(',') {
        Some((k, d)) => (k, Some(d)),
        None => match input.split_once(char::is_whitespace) {
            Some((k, d)) => (k, Some(d)),
            None => (input, None),
        },
    };
    if key.trim().is_empty() {
        return Err(ActionError::EmptyChord);
    }
    let key = Key::parse(key)?;
    let duration_ms = match secs {
        Some(d) => parse_seconds(d)?,
        None => ctx.timings.hold_key_ms,
    };
    Ok(ActionCommand::HoldKey { key, duration_ms })
}
