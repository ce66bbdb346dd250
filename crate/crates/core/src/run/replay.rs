use serde::Serialize;

use super::{Driver, LiteDriver, RunError, RunRecord};
use crate::env::{ClockMode, EnvError, Environment};
use crate::phash::{hash_frame, PerceptualHash};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayMismatch {
    /// Turn whose observation differed; one past the last turn for the
    /// final observation.
    pub turn: u64,
    pub expected: Vec<PerceptualHash>,
    pub actual: Vec<PerceptualHash>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub observations_checked: u64,
    pub mismatches: Vec<ReplayMismatch>,
}

impl ReplayReport {
    pub fn is_faithful(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-executes a Lite log's commands against a fresh `env` and compares
/// every observation hash with the recorded one.
pub fn replay(record: &RunRecord, env: Box<dyn Environment>) -> Result<ReplayReport, RunError> {
    let config = &record.header.config;
    if config.mode != ClockMode::Lite {
        return Err(RunError::NotReplayable);
    }
    let fail = |e: EnvError| RunError::Replay(e.to_string());
    let mut driver = LiteDriver::start(env, config.seed, config.tick_ms).map_err(fail)?;
    let algorithm = record.header.algorithm;
    let mut report = ReplayReport::default();
    let mut check = |driver: &mut LiteDriver, turn: u64, expected: &[PerceptualHash]| {
        let frames = driver.observe(&config.observation).map_err(fail)?;
        let actual = frames
            .iter()
            .map(|f| hash_frame(f, algorithm))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RunError::Replay(e.to_string()))?;
        report.observations_checked += 1;
        if actual != expected {
            report.mismatches.push(ReplayMismatch {
                turn,
                expected: expected.to_vec(),
                actual,
            });
        }
        Ok::<_, RunError>(())
    };
    for t in &record.turns {
        check(&mut driver, t.index, &t.observation)?;
        for command in &t.agent.turn.parsed {
            if config.veto_reset_combo && !command.hazards().is_empty() {
                continue;
            }
            match driver.execute(command) {
                Ok(()) | Err(EnvError::CommandRejected(_)) => {}
                Err(e) => return Err(fail(e)),
            }
        }
    }
    if !record.footer.final_observation.is_empty() {
        let turn = record.turns.len() as u64 + 1;
        check(&mut driver, turn, &record.footer.final_observation)?;
    }
    Ok(report)
}
