use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Limits, RunConfig, TerminationReason};
use crate::agent::{AgentConfig, StepOutcome, Usage};
use crate::checkpoint::MatchEvent;
use crate::phash::{HashAlgorithm, PerceptualHash};

pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: u32,
    pub config: RunConfig,
    pub limits: Limits,
    pub algorithm: HashAlgorithm,
    pub checkpoint_count: usize,
    pub walkthrough_length_ms: u64,
    pub agent: AgentConfig,
    pub system_prompt: String,
    /// Wall clock.
    pub started_at_unix_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// One-based.
    pub index: u64,
    /// Game time when the observation finished.
    pub game_time_ms: u64,
    /// Hashes of the frames the agent was shown, oldest first.
    pub observation: Vec<PerceptualHash>,
    pub agent: StepOutcome,
    /// Game time that passed while the model was thinking.
    pub think_game_ms: u64,
    /// Set when the command was skipped by the reset-combo veto.
    #[serde(default)]
    pub vetoed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_error: Option<String>,
    /// Wall clock.
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFooter {
    pub termination: TerminationReason,
    pub detail: String,
    pub turns: u64,
    pub game_time_ms: u64,
    pub progress: f64,
    pub furthest_checkpoint: Option<usize>,
    pub checkpoint_events: Vec<MatchEvent>,
    /// The observation pending when the run stopped; empty if there was
    /// none.
    pub final_observation: Vec<PerceptualHash>,
    pub usage: Usage,
    pub cost: f64,
    /// Wall clock.
    pub wall_ms: u64,
}

/// One line of a run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header(RunHeader),
    Turn(TurnRecord),
    Footer(RunFooter),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub header: RunHeader,
    pub turns: Vec<TurnRecord>,
    pub footer: RunFooter,
}

impl RunRecord {
    pub fn termination(&self) -> TerminationReason {
        self.footer.termination
    }

    pub fn progress(&self) -> f64 {
        self.footer.progress
    }

    /// A copy with every wall-clock field zeroed, for comparing runs.
    pub fn without_wall_clock(&self) -> RunRecord {
        let mut r = self.clone();
        r.header.started_at_unix_ms = 0;
        r.footer.wall_ms = 0;
        for t in &mut r.turns {
            t.wall_ms = 0;
        }
        r
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
}

fn corrupt(line: usize, reason: impl Into<String>) -> LogError {
    LogError::CorruptLog {
        line,
        reason: reason.into(),
    }
}

/// Streams a log one line at a time, flushing after each.
pub struct LogWriter<W: Write> {
    out: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(out: W) -> Self {
        LogWriter { out }
    }

    pub fn write(&mut self, line: &LogLine) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_log(record: &RunRecord, out: impl Write) -> std::io::Result<()> {
    let mut w = LogWriter::new(out);
    w.write(&LogLine::Header(record.header.clone()))?;
    for t in &record.turns {
        w.write(&LogLine::Turn(t.clone()))?;
    }
    w.write(&LogLine::Footer(record.footer.clone()))
}

/// Reads a complete log: a header, turns numbered from one, and a footer.
pub fn read_log(input: impl BufRead) -> Result<RunRecord, LogError> {
    let mut header = None;
    let mut turns: Vec<TurnRecord> = Vec::new();
    let mut footer = None;
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(corrupt(n, "content after footer"));
        }
        let parsed: LogLine =
            serde_json::from_str(&line).map_err(|e| corrupt(n, e.to_string()))?;
        match parsed {
            LogLine::Header(h) if header.is_none() => {
                if h.version != LOG_VERSION {
                    return Err(corrupt(n, format!("unsupported version {}", h.version)));
                }
                header = Some(h);
            }
            LogLine::Header(_) => return Err(corrupt(n, "second header")),
            _ if header.is_none() => return Err(corrupt(n, "missing header")),
            LogLine::Turn(t) => {
                if t.index != turns.len() as u64 + 1 {
                    return Err(corrupt(n, format!("turn {} out of order", t.index)));
                }
                turns.push(t);
            }
            LogLine::Footer(f) => {
                if f.turns != turns.len() as u64 {
                    return Err(corrupt(n, "footer turn count disagrees"));
                }
                footer = Some(f);
            }
        }
    }
    let header = header.ok_or_else(|| corrupt(0, "empty log"))?;
    let footer = footer.ok_or_else(|| corrupt(0, "missing footer; run was cut short"))?;
    Ok(RunRecord {
        header,
        turns,
        footer,
    })
}
