use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CheckpointPack;
use crate::frame::Frame;
use crate::phash::{hash_frame, HashError, PerceptualHash};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchEvent {
    pub step: u64,
    pub checkpoint: usize,
    pub distance: u32,
}

/// Furthest checkpoint reached so far in one run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressState {
    furthest_index: Option<usize>,
    match_events: Vec<MatchEvent>,
}

impl ProgressState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn furthest_index(&self) -> Option<usize> {
        self.furthest_index
    }

    pub fn match_events(&self) -> &[MatchEvent] {
        &self.match_events
    }

    /// Compares `hash` against every checkpoint, records each match, and
    /// advances the furthest index. Returns the events recorded by this call.
    pub fn match_hash(
        &mut self,
        pack: &CheckpointPack,
        hash: PerceptualHash,
        step: u64,
    ) -> Result<&[MatchEvent], HashError> {
        let before = self.match_events.len();
        for cp in pack.checkpoints() {
            let distance = hash.distance(&cp.hash)?;
            if distance < cp.threshold {
                self.match_events.push(MatchEvent {
                    step,
                    checkpoint: cp.index,
                    distance,
                });
                self.furthest_index = Some(self.furthest_index.map_or(cp.index, |f| f.max(cp.index)));
            }
        }
        Ok(&self.match_events[before..])
    }

    /// Hashes the frame once with the pack's algorithm and matches it.
    pub fn match_frame(
        &mut self,
        pack: &CheckpointPack,
        frame: &Frame,
        step: u64,
    ) -> Result<&[MatchEvent], HashError> {
        let hash = hash_frame(frame, pack.algorithm())?;
        self.match_hash(pack, hash, step)
    }

    pub fn is_complete(&self, pack: &CheckpointPack) -> bool {
        self.furthest_index.is_some() && self.furthest_index == pack.final_index()
    }
}

/// Functional form of [`ProgressState::match_frame`].
pub fn match_frame(
    mut state: ProgressState,
    pack: &CheckpointPack,
    frame: &Frame,
    step: u64,
) -> Result<ProgressState, HashError> {
    state.match_frame(pack, frame, step)?;
    Ok(state)
}

/// Fraction of the walkthrough covered by the furthest checkpoint reached.
pub fn progress_score(state: &ProgressState, pack: &CheckpointPack) -> f64 {
    match state.furthest_index {
        None => 0.0,
        Some(i) => pack.checkpoints()[i].timestamp_ms as f64 / pack.walkthrough_length_ms() as f64,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no per-game scores to average")]
    EmptyList,
    #[error("per-game score {0} is outside [0, 1]")]
    OutOfRange(f64),
}

/// Equal-weight mean of per-game scores.
pub fn overall_score(per_game: &[f64]) -> Result<f64, ScoreError> {
    if per_game.is_empty() {
        return Err(ScoreError::EmptyList);
    }
    if let Some(&bad) = per_game.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(ScoreError::OutOfRange(bad));
    }
    Ok(per_game.iter().sum::<f64>() / per_game.len() as f64)
}
