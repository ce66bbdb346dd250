use std::io::Write;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use super::record::{LogLine, LogWriter, RunFooter, RunHeader, RunRecord, TurnRecord, LOG_VERSION};
use super::termination::{check_termination, LossTracker, RunSnapshot, StuckDetector};
use super::{Driver, LiteDriver, RealtimeDriver, RunConfig, RunError, TerminationReason};
use crate::agent::{Agent, AgentError, Usage};
use crate::checkpoint::{progress_score, CheckpointPack, ProgressState};
use crate::env::{ClockMode, EnvError, Environment, WallClock};
use crate::frame::Frame;
use crate::phash::{hash_frame, PerceptualHash};

/// Receives the log as it is produced. Each turn is delivered before the
/// next one starts.
pub trait RunSink {
    fn line(&mut self, line: &LogLine) -> std::io::Result<()>;

    /// Frames shown to the agent for turn `turn`.
    fn observation(&mut self, _turn: u64, _frames: &[Frame]) {}
}

/// Discards everything.
pub struct NullSink;

impl RunSink for NullSink {
    fn line(&mut self, _line: &LogLine) -> std::io::Result<()> {
        Ok(())
    }
}

impl<W: Write> RunSink for LogWriter<W> {
    fn line(&mut self, line: &LogLine) -> std::io::Result<()> {
        self.write(line)
    }
}

/// Plays one game to termination and returns the full record.
pub fn run(
    config: &RunConfig,
    pack: &CheckpointPack,
    env: Box<dyn Environment>,
    agent: &mut Agent,
    wall: Arc<dyn WallClock>,
) -> Result<RunRecord, RunError> {
    run_with(config, pack, env, agent, wall, &mut NullSink).map(|(r, _)| r)
}

/// Like [`run`], streaming the log to `sink` and handing the environment
/// back when it is still available.
pub fn run_with(
    config: &RunConfig,
    pack: &CheckpointPack,
    env: Box<dyn Environment>,
    agent: &mut Agent,
    wall: Arc<dyn WallClock>,
    sink: &mut dyn RunSink,
) -> Result<(RunRecord, Option<Box<dyn Environment>>), RunError> {
    config.validate()?;
    if pack.game_id() != config.game_id {
        return Err(RunError::PackMismatch {
            pack: pack.game_id().to_string(),
            run: config.game_id.clone(),
        });
    }
    let header = RunHeader {
        version: LOG_VERSION,
        config: config.clone(),
        limits: config.limits(pack),
        algorithm: pack.algorithm(),
        checkpoint_count: pack.checkpoints().len(),
        walkthrough_length_ms: pack.walkthrough_length_ms(),
        agent: agent.config().clone(),
        system_prompt: agent.system_prompt().to_string(),
        started_at_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64),
    };
    let mut state = Loop {
        config,
        pack,
        header,
        sink,
        started: Instant::now(),
        turns: Vec::new(),
        progress: ProgressState::new(),
        stuck: StuckDetector::new(),
        losses: LossTracker::default(),
        progress_turn: 0,
        usage: Usage::default(),
        pending: Vec::new(),
    };
    if let Err(e) = state.sink.line(&LogLine::Header(state.header.clone())) {
        return Ok((state.finish(None, TerminationReason::Aborted, e.to_string()), None));
    }
    let driver: Result<Box<dyn Driver>, EnvError> = match config.mode {
        ClockMode::Lite => {
            LiteDriver::start(env, config.seed, config.tick_ms).map(|d| Box::new(d) as _)
        }
        ClockMode::Realtime => RealtimeDriver::start(env, config.seed, config.tick_ms, wall)
            .map(|d| Box::new(d) as _),
    };
    let mut driver = match driver {
        Ok(d) => d,
        Err(e) => {
            let detail = format!("reset failed: {e}");
            return Ok((state.finish(None, TerminationReason::Aborted, detail), None));
        }
    };
    let (reason, detail) = state.play(driver.as_mut(), agent);
    let record = state.finish(Some(driver.as_ref()), reason, detail);
    Ok((record, Some(driver.finish())))
}

struct Loop<'a> {
    config: &'a RunConfig,
    pack: &'a CheckpointPack,
    header: RunHeader,
    sink: &'a mut dyn RunSink,
    started: Instant,
    turns: Vec<TurnRecord>,
    progress: ProgressState,
    stuck: StuckDetector,
    losses: LossTracker,
    /// Turns completed when the furthest checkpoint last advanced.
    progress_turn: u64,
    usage: Usage,
    /// Hashes of the observation not yet acted on.
    pending: Vec<PerceptualHash>,
}

impl Loop<'_> {
    fn turns_done(&self) -> u64 {
        self.turns.len() as u64
    }

    /// Hashes and tracks an observation, updating the stuck and loss rules.
    fn take_observation(
        &mut self,
        frames: &[Frame],
        loss_count: u64,
    ) -> Result<(), String> {
        let step = self.turns_done() + 1;
        let before = self.progress.furthest_index();
        let previous = self.stuck.last_hash();
        let mut hashes = Vec::with_capacity(frames.len());
        for f in frames {
            let h = hash_frame(f, self.pack.algorithm()).map_err(|e| e.to_string())?;
            self.progress
                .match_hash(self.pack, h, step)
                .map_err(|e| e.to_string())?;
            hashes.push(h);
        }
        if self.progress.furthest_index() > before {
            self.progress_turn = self.turns_done();
        }
        self.losses.observe(loss_count, previous);
        self.stuck.observe(*hashes.last().expect("at least one frame"));
        self.pending = hashes;
        Ok(())
    }

    fn snapshot(&self, driver: &dyn Driver) -> RunSnapshot {
        RunSnapshot {
            status: driver.status(),
            tracker_complete: self.progress.is_complete(self.pack),
            game_time_ms: driver.game_time_ms(),
            turns: self.turns_done(),
            turns_since_progress: self.turns_done() - self.progress_turn,
            repeat_count: self.stuck.repeat_count(),
            worst_loss_spot: self.losses.worst_spot(),
            cost: self.config.prices.cost(self.usage),
        }
    }

    fn play(&mut self, driver: &mut dyn Driver, agent: &mut Agent) -> (TerminationReason, String) {
        let limits = self.header.limits;
        let bounds = driver.bounds();
        loop {
            let frames = match driver.observe(&self.config.observation) {
                Ok(f) => f,
                Err(e) => return (TerminationReason::Aborted, format!("observation failed: {e}")),
            };
            if let Err(e) = self.take_observation(&frames, driver.loss_count()) {
                self.pending.clear();
                return (TerminationReason::Aborted, format!("cannot hash frame: {e}"));
            }
            let snap = self.snapshot(driver);
            if let Some(reason) = check_termination(&snap, &limits) {
                return (reason, describe(reason, &snap));
            }
            let index = self.turns_done() + 1;
            self.sink.observation(index, &frames);
            let turn_started = Instant::now();
            let think_from = driver.game_time_ms();
            let outcome = match agent.step(&frames, bounds) {
                Ok(o) => o,
                Err(AgentError::ModelUnavailable { attempts, last }) => {
                    return (
                        TerminationReason::ModelUnavailable,
                        format!("{attempts} attempts failed; last: {last}"),
                    );
                }
            };
            let think_game_ms = driver.game_time_ms() - think_from;
            self.usage += outcome.usage;
            let mut record = TurnRecord {
                index,
                game_time_ms: think_from,
                observation: std::mem::take(&mut self.pending),
                agent: outcome,
                think_game_ms,
                vetoed: false,
                exec_error: None,
                wall_ms: 0,
            };
            let mut fatal = None;
            for command in record.agent.turn.parsed.clone() {
                if self.config.veto_reset_combo && !command.hazards().is_empty() {
                    log::warn!("turn {index}: vetoed {command}");
                    record.vetoed = true;
                    continue;
                }
                if !command.hazards().is_empty() {
                    log::warn!("turn {index}: {command} presses START and SELECT together");
                }
                match driver.execute(&command) {
                    Ok(()) => {}
                    Err(EnvError::CommandRejected(why)) => {
                        log::info!("turn {index}: rejected {command}: {why}");
                        record.exec_error = Some(format!("rejected: {why}"));
                    }
                    Err(e) => {
                        record.exec_error = Some(e.to_string());
                        fatal = Some(format!("environment failed: {e}"));
                        break;
                    }
                }
            }
            record.wall_ms = turn_started.elapsed().as_millis() as u64;
            let line = LogLine::Turn(record);
            let write = self.sink.line(&line);
            let LogLine::Turn(record) = line else {
                unreachable!()
            };
            self.turns.push(record);
            if let Err(e) = write {
                return (TerminationReason::Aborted, format!("log write failed: {e}"));
            }
            if let Some(detail) = fatal {
                return (TerminationReason::Aborted, detail);
            }
        }
    }

    fn finish(
        &mut self,
        driver: Option<&dyn Driver>,
        reason: TerminationReason,
        detail: String,
    ) -> RunRecord {
        if reason.is_failure() {
            log::error!("run ended: {reason}: {detail}");
        } else {
            log::info!("run ended: {reason}: {detail}");
        }
        let footer = RunFooter {
            termination: reason,
            detail,
            turns: self.turns_done(),
            game_time_ms: driver.map_or(0, |d| d.game_time_ms()),
            progress: progress_score(&self.progress, self.pack),
            furthest_checkpoint: self.progress.furthest_index(),
            checkpoint_events: self.progress.match_events().to_vec(),
            final_observation: std::mem::take(&mut self.pending),
            usage: self.usage,
            cost: self.config.prices.cost(self.usage),
            wall_ms: self.started.elapsed().as_millis() as u64,
        };
        let line = LogLine::Footer(footer);
        if let Err(e) = self.sink.line(&line) {
            log::error!("could not write log footer: {e}");
        }
        let LogLine::Footer(footer) = line else {
            unreachable!()
        };
        RunRecord {
            header: self.header.clone(),
            turns: std::mem::take(&mut self.turns),
            footer,
        }
    }
}

fn describe(reason: TerminationReason, s: &RunSnapshot) -> String {
    use TerminationReason::*;
    match reason {
        Completed => "final checkpoint reached".into(),
        LockedState => "game can no longer be played".into(),
        TimeCap => format!("game time {} ms over the cap", s.game_time_ms),
        StepCap => format!("{} steps taken", s.turns),
        Stuck => format!("{} identical observations in a row", s.repeat_count),
        NoProgress => format!(
            "{} turns without a new checkpoint, ${:.4} spent",
            s.turns_since_progress, s.cost
        ),
        RepeatedLoss => format!("{} losses at the same spot", s.worst_loss_spot),
        ModelUnavailable | Aborted => String::new(),
    }
}
