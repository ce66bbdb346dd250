use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::EnvStatus;
use crate::phash::PerceptualHash;

/// Why a run ended. Exactly one per run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Completed,
    TimeCap,
    StepCap,
    Stuck,
    NoProgress,
    RepeatedLoss,
    LockedState,
    ModelUnavailable,
    Aborted,
}

impl TerminationReason {
    /// Whether the run ended through the harness failing rather than the
    /// agent's play.
    pub fn is_failure(self) -> bool {
        matches!(
            self,
            TerminationReason::Aborted | TerminationReason::ModelUnavailable
        )
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string tag"))
    }
}

/// Counts how many observations in a row had the same frame hash.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StuckDetector {
    last_hash: Option<PerceptualHash>,
    repeat_count: u64,
}

impl StuckDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an observation. A new hash restarts the count, and the
    /// observation itself counts as the first of the new streak.
    pub fn observe(&mut self, hash: PerceptualHash) -> u64 {
        if self.last_hash != Some(hash) {
            self.last_hash = Some(hash);
            self.repeat_count = 0;
        }
        self.repeat_count += 1;
        self.repeat_count
    }

    /// Observations in the current streak of identical frames.
    pub fn repeat_count(&self) -> u64 {
        self.repeat_count
    }

    pub fn last_hash(&self) -> Option<PerceptualHash> {
        self.last_hash
    }
}

/// Groups in-game losses by the frame seen just before each one.
#[derive(Clone, Debug, Default)]
pub struct LossTracker {
    seen_losses: u64,
    by_spot: HashMap<PerceptualHash, u64>,
}

impl LossTracker {
    /// `loss_count` is the environment's running total; `previous` is the
    /// hash of the observation before this one.
    pub fn observe(&mut self, loss_count: u64, previous: Option<PerceptualHash>) {
        if loss_count > self.seen_losses {
            if let Some(spot) = previous {
                *self.by_spot.entry(spot).or_default() += loss_count - self.seen_losses;
            }
            self.seen_losses = loss_count;
        }
    }

    /// Most losses recorded at any single spot.
    pub fn worst_spot(&self) -> u64 {
        self.by_spot.values().copied().max().unwrap_or(0)
    }
}

/// Resolved caps for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_game_time_ms: u64,
    /// Only enforced in Lite mode.
    pub max_lite_steps: Option<u64>,
    pub stuck_step_limit: u64,
    pub no_progress_step_limit: u64,
    pub same_spot_loss_limit: u64,
    pub cost_budget: Option<f64>,
}

/// Everything the rules look at, captured before a model call.
#[derive(Clone, Copy, Debug)]
pub struct RunSnapshot {
    pub status: EnvStatus,
    pub tracker_complete: bool,
    pub game_time_ms: u64,
    /// Agent turns completed so far.
    pub turns: u64,
    pub turns_since_progress: u64,
    pub repeat_count: u64,
    pub worst_loss_spot: u64,
    pub cost: f64,
}

/// The first rule that fires, in priority order: completion, locked game,
/// time cap, step cap, stuck screen, no progress, repeated loss.
pub fn check_termination(s: &RunSnapshot, limits: &Limits) -> Option<TerminationReason> {
    use TerminationReason::*;
    if s.tracker_complete || s.status == EnvStatus::Completed {
        return Some(Completed);
    }
    if s.status == EnvStatus::Locked {
        return Some(LockedState);
    }
    if s.game_time_ms > limits.max_game_time_ms {
        return Some(TimeCap);
    }
    if limits.max_lite_steps.is_some_and(|cap| s.turns >= cap) {
        return Some(StepCap);
    }
    if s.repeat_count > limits.stuck_step_limit {
        return Some(Stuck);
    }
    if s.turns_since_progress >= limits.no_progress_step_limit
        || limits.cost_budget.is_some_and(|b| s.cost >= b)
    {
        return Some(NoProgress);
    }
    if s.worst_loss_spot >= limits.same_spot_loss_limit {
        return Some(RepeatedLoss);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phash::HashAlgorithm;

    fn limits() -> Limits {
        Limits {
            max_game_time_ms: 1000,
            max_lite_steps: Some(50),
            stuck_step_limit: 100,
            no_progress_step_limit: 2000,
            same_spot_loss_limit: 3,
            cost_budget: None,
        }
    }

    fn quiet() -> RunSnapshot {
        RunSnapshot {
            status: EnvStatus::Running,
            tracker_complete: false,
            game_time_ms: 0,
            turns: 0,
            turns_since_progress: 0,
            repeat_count: 1,
            worst_loss_spot: 0,
            cost: 0.0,
        }
    }

    #[test]
    fn nothing_fires_on_a_fresh_run() {
        assert_eq!(check_termination(&quiet(), &limits()), None);
    }

    #[test]
    fn priority_order() {
        let all = RunSnapshot {
            status: EnvStatus::Locked,
            tracker_complete: true,
            game_time_ms: 5000,
            turns: 5000,
            turns_since_progress: 5000,
            repeat_count: 500,
            worst_loss_spot: 9,
            cost: 0.0,
        };
        let l = limits();
        let mut s = all;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::Completed));
        s.tracker_complete = false;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::LockedState));
        s.status = EnvStatus::Running;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::TimeCap));
        s.game_time_ms = 0;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::StepCap));
        s.turns = 0;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::Stuck));
        s.repeat_count = 1;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::NoProgress));
        s.turns_since_progress = 0;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::RepeatedLoss));
    }

    #[test]
    fn time_cap_is_strict() {
        let mut s = quiet();
        s.game_time_ms = 1000;
        assert_eq!(check_termination(&s, &limits()), None);
        s.game_time_ms = 1001;
        assert_eq!(check_termination(&s, &limits()), Some(TerminationReason::TimeCap));
    }

    #[test]
    fn stuck_counts_the_streak() {
        let h = PerceptualHash::new(7, HashAlgorithm::Difference);
        let g = PerceptualHash::new(8, HashAlgorithm::Difference);
        let mut d = StuckDetector::new();
        assert_eq!(d.observe(h), 1);
        assert_eq!(d.observe(h), 2);
        assert_eq!(d.observe(g), 1);
        assert_eq!(d.observe(g), 2);
    }

    #[test]
    fn losses_group_by_previous_frame() {
        let a = PerceptualHash::new(1, HashAlgorithm::Difference);
        let b = PerceptualHash::new(2, HashAlgorithm::Difference);
        let mut t = LossTracker::default();
        t.observe(1, Some(a));
        t.observe(2, Some(b));
        t.observe(3, Some(a));
        assert_eq!(t.worst_spot(), 2);
        t.observe(3, Some(a));
        assert_eq!(t.worst_spot(), 2);
        t.observe(4, Some(a));
        assert_eq!(t.worst_spot(), 3);
    }

    #[test]
    fn cost_budget_ends_as_no_progress() {
        let mut l = limits();
        l.cost_budget = Some(30.0);
        let mut s = quiet();
        s.cost = 30.0;
        assert_eq!(check_termination(&s, &l), Some(TerminationReason::NoProgress));
    }
}
