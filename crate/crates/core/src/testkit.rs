//! Small scripted environments and transcripts for exercising the run
//! controller without a real game.

use crate::action::{ActionCommand, Key};
use crate::agent::MockReply;
use crate::env::{EnvError, EnvStatus, Environment};
use crate::frame::{Frame, SurfaceBounds};
use crate::practice::{new_game, PracticeKind};

/// Pixels per hash cell in [`pattern_frame`].
const CELL: u32 = 4;

/// A 36x32 frame whose difference hash is exactly `bits`.
pub fn pattern_frame(bits: u64, captured_at_ms: u64) -> Frame {
    // each row of nine cells walks up or down by one luma step per bit
    let mut levels = [[0u8; 9]; 8];
    for (r, row) in levels.iter_mut().enumerate() {
        row[0] = 128;
        for c in 0..8 {
            let bit = bits >> (63 - (r * 8 + c)) & 1;
            row[c + 1] = if bit == 1 { row[c] + 8 } else { row[c] - 8 };
        }
    }
    let f = Frame::from_fn(9 * CELL, 8 * CELL, |x, y| {
        let v = levels[(y / CELL) as usize][(x / CELL) as usize];
        [v, v, v]
    });
    f.with_timestamp(captured_at_ms)
}

/// SplitMix64 step; spreads consecutive counters over the hash space.
pub fn mix(n: u64) -> u64 {
    let mut z = n.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How a [`ScriptedScreen`] picks its frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScreenMode {
    /// The same frame forever.
    Static,
    /// A new frame after every applied command.
    Changing,
}

/// A desktop-sized stand-in game with scripted behaviour.
#[derive(Clone, Debug)]
pub struct ScriptedScreen {
    mode: ScreenMode,
    seed: u64,
    applied: u64,
    losses: u64,
    time_ms: u64,
    /// Pressing this key counts as an in-game loss.
    pub lose_on: Option<Key>,
    /// Lock after this many commands.
    pub lock_after: Option<u64>,
    /// Complete after this many commands.
    pub complete_after: Option<u64>,
}

impl ScriptedScreen {
    pub fn new(mode: ScreenMode) -> Self {
        ScriptedScreen {
            mode,
            seed: 0,
            applied: 0,
            losses: 0,
            time_ms: 0,
            lose_on: None,
            lock_after: None,
            complete_after: None,
        }
    }

    pub fn applied(&self) -> u64 {
        self.applied
    }

    /// The hash bits the screen shows after `applied` commands.
    pub fn bits_after(&self, applied: u64) -> u64 {
        match self.mode {
            ScreenMode::Static => mix(self.seed),
            ScreenMode::Changing => mix(self.seed ^ applied.wrapping_mul(0x1000_0001)),
        }
    }
}

impl Environment for ScriptedScreen {
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError> {
        self.seed = seed;
        self.applied = 0;
        self.losses = 0;
        self.time_ms = 0;
        Ok(self.snapshot())
    }

    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        if self.status() != EnvStatus::Running {
            return Err(EnvError::CommandRejected("game is over".into()));
        }
        self.applied += 1;
        if let (Some(key), ActionCommand::KeySequence(chords)) = (self.lose_on, command) {
            if chords.iter().any(|c| c.keys().contains(&key)) {
                self.losses += 1;
            }
        }
        Ok(())
    }

    fn advance(&mut self, dt_ms: u64) -> Result<(), EnvError> {
        self.time_ms += dt_ms;
        Ok(())
    }

    fn snapshot(&self) -> Frame {
        pattern_frame(self.bits_after(self.applied), self.time_ms)
    }

    fn surface_bounds(&self) -> SurfaceBounds {
        SurfaceBounds::DESKTOP
    }

    fn status(&self) -> EnvStatus {
        if self.complete_after.is_some_and(|n| self.applied >= n) {
            EnvStatus::Completed
        } else if self.lock_after.is_some_and(|n| self.applied >= n) {
            EnvStatus::Locked
        } else {
            EnvStatus::Running
        }
    }

    fn loss_count(&self) -> u64 {
        self.losses
    }
}

/// A desktop reply the agent parser accepts, performing `command`.
pub fn desktop_reply(thought: &str, command: &ActionCommand) -> String {
    let line = command.to_string();
    let (name, input) = line.split_once(' ').unwrap_or((&line, ""));
    serde_json::json!({
        "thought": thought,
        "action": name,
        "action_input": input,
        "memory": "",
    })
    .to_string()
}

/// Replies that play a practice game through with its oracle, one atomic
/// command per turn.
pub fn oracle_transcript(kind: PracticeKind, seed: u64) -> Vec<MockReply> {
    let mut game = new_game(kind, seed);
    let mut replies = Vec::new();
    while game.status() == EnvStatus::Running {
        for command in game.oracle_plan() {
            for (atom, duration_ms) in command.atoms() {
                let n = replies.len() + 1;
                replies.push(MockReply::Text(desktop_reply(&format!("step {n}"), &atom)));
                game.apply(&atom).expect("oracle commands are valid");
                game.advance(duration_ms).expect("practice games never fail");
                game.release().expect("practice games never fail");
            }
        }
    }
    replies
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phash::{hash_frame, HashAlgorithm};

    #[test]
    fn pattern_frame_hashes_to_its_bits() {
        for n in 0..200 {
            let bits = mix(n);
            let h = hash_frame(&pattern_frame(bits, 0), HashAlgorithm::Difference).unwrap();
            assert_eq!(h.bits(), bits);
        }
        for bits in [0, u64::MAX] {
            let h = hash_frame(&pattern_frame(bits, 0), HashAlgorithm::Difference).unwrap();
            assert_eq!(h.bits(), bits);
        }
    }

    #[test]
    fn changing_screen_changes() {
        let mut s = ScriptedScreen::new(ScreenMode::Changing);
        let a = s.reset(1).unwrap();
        s.apply(&ActionCommand::ScrollUp(1)).unwrap();
        assert!(!a.same_pixels(&s.snapshot()));
    }
}
