//! The run controller: plays one game with one agent until a termination
//! rule fires, tracking checkpoint progress and writing a turn-by-turn log.

mod driver;
mod record;
mod replay;
mod runner;
mod termination;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Usage;
use crate::checkpoint::CheckpointPack;
use crate::env::{ClockMode, ObservationPolicy, DEFAULT_TICK_MS};

pub use driver::{Driver, LiteDriver, RealtimeDriver};
pub use record::{
    read_log, write_log, LogError, LogLine, LogWriter, RunFooter, RunHeader, RunRecord, TurnRecord,
    LOG_VERSION,
};
pub use replay::{replay, ReplayMismatch, ReplayReport};
pub use runner::{run, run_with, NullSink, RunSink};
pub use termination::{
    check_termination, Limits, LossTracker, RunSnapshot, StuckDetector, TerminationReason,
};

/// Game time allowed per unit of walkthrough time.
pub const TIME_CAP_FACTOR: u64 = 20;
pub const DEFAULT_STUCK_STEPS: u64 = 100;
pub const DEFAULT_NO_PROGRESS_STEPS: u64 = 2000;
pub const DEFAULT_SAME_SPOT_LOSSES: u64 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("pack is for {pack:?} but the run is for {run:?}")]
    PackMismatch { pack: String, run: String },
    #[error("replay needs a lite-mode log")]
    NotReplayable,
    #[error("environment failed during replay: {0}")]
    Replay(String),
}

/// Dollars per million tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub prompt_per_million: f64,
    pub completion_per_million: f64,
}

impl PriceTable {
    pub fn cost(&self, usage: Usage) -> f64 {
        (usage.prompt_tokens as f64 * self.prompt_per_million
            + usage.completion_tokens as f64 * self.completion_per_million)
            / 1e6
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub game_id: String,
    pub seed: u64,
    pub mode: ClockMode,
    pub tick_ms: u64,
    pub observation: ObservationPolicy,
    /// Defaults to twenty times the walkthrough length.
    pub max_game_time_ms: Option<u64>,
    /// Lite only. Defaults to twenty steps per walkthrough second.
    pub max_lite_steps: Option<u64>,
    pub stuck_step_limit: u64,
    pub no_progress_step_limit: u64,
    pub same_spot_loss_limit: u64,
    /// Spending at or above this ends the run as no progress.
    pub cost_budget: Option<f64>,
    pub prices: PriceTable,
    /// Skip commands that press START and SELECT together instead of only
    /// logging them.
    pub veto_reset_combo: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            game_id: String::new(),
            seed: 0,
            mode: ClockMode::Lite,
            tick_ms: DEFAULT_TICK_MS,
            observation: ObservationPolicy::default(),
            max_game_time_ms: None,
            max_lite_steps: None,
            stuck_step_limit: DEFAULT_STUCK_STEPS,
            no_progress_step_limit: DEFAULT_NO_PROGRESS_STEPS,
            same_spot_loss_limit: DEFAULT_SAME_SPOT_LOSSES,
            cost_budget: None,
            prices: PriceTable::default(),
            veto_reset_combo: false,
        }
    }
}

impl RunConfig {
    pub fn new(game_id: impl Into<String>, mode: ClockMode) -> Self {
        RunConfig {
            game_id: game_id.into(),
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::InvalidConfig(m.to_string()));
        if self.game_id.is_empty() {
            return bad("game_id is empty");
        }
        if self.tick_ms == 0 {
            return bad("tick_ms must be positive");
        }
        if self.stuck_step_limit == 0
            || self.no_progress_step_limit == 0
            || self.same_spot_loss_limit == 0
        {
            return bad("step and loss limits must be positive");
        }
        if self.max_game_time_ms == Some(0) || self.max_lite_steps == Some(0) {
            return bad("caps must be positive");
        }
        if self.cost_budget.is_some_and(|b| !(b > 0.0)) {
            return bad("cost budget must be positive");
        }
        self.observation
            .validate()
            .map_err(RunError::InvalidConfig)
    }

    /// Caps for this config against `pack`.
    pub fn limits(&self, pack: &CheckpointPack) -> Limits {
        let walkthrough = pack.walkthrough_length_ms();
        Limits {
            max_game_time_ms: self
                .max_game_time_ms
                .unwrap_or(walkthrough.saturating_mul(TIME_CAP_FACTOR)),
            max_lite_steps: match self.mode {
                ClockMode::Lite => Some(
                    self.max_lite_steps
                        .unwrap_or((walkthrough.saturating_mul(TIME_CAP_FACTOR)).div_ceil(1000)),
                ),
                ClockMode::Realtime => None,
            },
            stuck_step_limit: self.stuck_step_limit,
            no_progress_step_limit: self.no_progress_step_limit,
            same_spot_loss_limit: self.same_spot_loss_limit,
            cost_budget: self.cost_budget,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phash::HashAlgorithm;

    fn pack(walkthrough_ms: u64) -> CheckpointPack {
        CheckpointPack::new("g", HashAlgorithm::Difference, walkthrough_ms, 12, vec![]).unwrap()
    }

    #[test]
    fn default_caps_scale_with_walkthrough() {
        let l = RunConfig::new("g", ClockMode::Lite).limits(&pack(1_080_150));
        assert_eq!(l.max_game_time_ms, 21_603_000);
        assert_eq!(l.max_lite_steps, Some(21_603));
        let r = RunConfig::new("g", ClockMode::Realtime).limits(&pack(1_080_150));
        assert_eq!(r.max_lite_steps, None);
    }

    #[test]
    fn explicit_caps_win() {
        let mut c = RunConfig::new("g", ClockMode::Lite);
        c.max_game_time_ms = Some(5);
        c.max_lite_steps = Some(7);
        let l = c.limits(&pack(1000));
        assert_eq!((l.max_game_time_ms, l.max_lite_steps), (5, Some(7)));
    }

    #[test]
    fn validation() {
        assert!(RunConfig::new("g", ClockMode::Lite).validate().is_ok());
        assert!(RunConfig::default().validate().is_err());
        let mut c = RunConfig::new("g", ClockMode::Lite);
        c.stuck_step_limit = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::new("g", ClockMode::Lite);
        c.cost_budget = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn cost_uses_both_prices() {
        let p = PriceTable {
            prompt_per_million: 2.0,
            completion_per_million: 10.0,
        };
        let u = Usage {
            prompt_tokens: 500_000,
            completion_tokens: 100_000,
        };
        assert!((p.cost(u) - 2.0).abs() < 1e-12);
    }
}
