//! Built-in practice games: clicking, dragging and navigation.
//!
//! Each game is a deterministic [`Environment`] on the 640x400 desktop
//! surface with ten stages and a shared budget of [`ACTION_BUDGET`] atomic
//! commands. Every atomic command counts, including ones the game ignores.
//! Running out of budget before finishing locks the game.

mod clicking;
mod dragging;
mod navigation;
pub mod raster;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::ActionCommand;
use crate::checkpoint::{Checkpoint, CheckpointPack};
use crate::env::{EnvStatus, Environment};
use crate::phash::{hash_frame, HashAlgorithm};

pub use clicking::{ClickingGame, TARGET_RADIUS};
pub use dragging::{drag_levels, DragLevel, DraggingGame, DRAG_TOLERANCE};
pub use navigation::{mazes, Cell, Maze, NavigationGame, CELL_PX};

pub const ACTION_BUDGET: u32 = 250;
pub const STAGES: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PracticeKind {
    Clicking,
    Dragging,
    Navigation,
}

impl PracticeKind {
    pub const ALL: [PracticeKind; 3] = [
        PracticeKind::Clicking,
        PracticeKind::Dragging,
        PracticeKind::Navigation,
    ];

    pub fn game_id(self) -> &'static str {
        match self {
            PracticeKind::Clicking => "clicking",
            PracticeKind::Dragging => "dragging",
            PracticeKind::Navigation => "navigation",
        }
    }
}

impl fmt::Display for PracticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.game_id())
    }
}

impl FromStr for PracticeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PracticeKind::ALL
            .into_iter()
            .find(|k| k.game_id() == s)
            .ok_or_else(|| format!("unknown practice game {s:?}"))
    }
}

/// What every practice game offers beyond [`Environment`].
pub trait PracticeGame: Environment {
    fn kind(&self) -> PracticeKind;

    /// Stages finished, out of [`STAGES`].
    fn score(&self) -> u32;

    fn actions_used(&self) -> u32;

    /// Commands that finish the current stage, computed from full state.
    /// Empty once the game is over.
    fn oracle_plan(&self) -> Vec<ActionCommand>;
}

/// A fresh, already reset game.
pub fn new_game(kind: PracticeKind, seed: u64) -> Box<dyn PracticeGame> {
    match kind {
        PracticeKind::Clicking => Box::new(ClickingGame::new(seed)),
        PracticeKind::Dragging => Box::new(DraggingGame::new(seed)),
        PracticeKind::Navigation => Box::new(NavigationGame::new(seed)),
    }
}

/// Plays the oracle until the game ends and returns the number of atomic
/// commands it took.
pub fn play_oracle(game: &mut dyn PracticeGame) -> u32 {
    while game.status() == EnvStatus::Running {
        let plan = game.oracle_plan();
        if plan.is_empty() {
            break;
        }
        for command in plan {
            for (atom, duration_ms) in command.atoms() {
                game.apply(&atom).expect("oracle commands are valid");
                game.advance(duration_ms).expect("practice games never fail");
                game.release().expect("practice games never fail");
            }
        }
    }
    game.actions_used()
}

/// Game time each stage occupies in a reference pack.
pub const STAGE_SPAN_MS: u64 = 10_000;

/// Exact-match threshold used by reference packs: practice frames are
/// rendered, so a true match is always at distance zero.
pub const REFERENCE_THRESHOLD: u32 = 1;

/// Pack with one checkpoint per finished stage, captured from an oracle
/// playthrough. Checkpoint `k` is the screen right after stage `k + 1` is
/// done; the last one is the completion screen, so progress equals
/// stages finished over ten.
pub fn reference_pack(kind: PracticeKind, seed: u64) -> CheckpointPack {
    let mut game = new_game(kind, seed);
    let mut checkpoints = Vec::new();
    let mut done = 0;
    while game.status() == EnvStatus::Running {
        for command in game.oracle_plan() {
            for (atom, duration_ms) in command.atoms() {
                game.apply(&atom).expect("oracle commands are valid");
                game.advance(duration_ms).expect("practice games never fail");
                game.release().expect("practice games never fail");
                if game.score() > done {
                    done = game.score();
                    let index = checkpoints.len();
                    checkpoints.push(Checkpoint {
                        index,
                        hash: hash_frame(&game.snapshot(), HashAlgorithm::Difference)
                            .expect("practice frames are large enough"),
                        timestamp_ms: STAGE_SPAN_MS * done as u64,
                        threshold: REFERENCE_THRESHOLD,
                        label: format!("stage {done}"),
                        crop: None,
                    });
                }
            }
        }
    }
    CheckpointPack::new(
        kind.game_id(),
        HashAlgorithm::Difference,
        STAGE_SPAN_MS * STAGES as u64,
        REFERENCE_THRESHOLD,
        checkpoints,
    )
    .expect("reference checkpoints are ordered")
}
