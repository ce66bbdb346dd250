//! The environment contract every game implements, plus the clock
//! disciplines that drive it.
//!
//! An [`Environment`] is a passive state machine: it changes only through
//! [`Environment::reset`], [`Environment::apply`], [`Environment::release`]
//! and [`Environment::advance`]. Who calls `advance`, and when, is what
//! separates the two clock modes:
//!
//! * **Lite**: [`execute`] and [`observe`] advance game time while an action
//!   plays out and the game is frozen otherwise.
//! * **Realtime**: a [`RealtimeTicker`] thread advances the game every tick
//!   regardless of what the agent is doing; commands are queued to it.

mod clock;
mod exec;
mod ticker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ActionCommand;
use crate::frame::{Frame, SurfaceBounds};

pub use clock::{
    ClockMode, GameClock, ObservationPolicy, SystemClock, VirtualClock, WallClock, DEFAULT_TICK_MS,
};
pub use exec::{execute, observe};
pub use ticker::{CommandTicket, RealtimeTicker};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("command rejected: {0}")]
    CommandRejected(String),
    #[error("adapter sent no frame within {0} ms")]
    AdapterTimeout(u64),
    #[error("adapter transport failed: {0}")]
    Transport(String),
    #[error("environment fault: {0}")]
    Fault(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvStatus {
    #[default]
    Running,
    /// The game has been beaten.
    Completed,
    /// The game can no longer be played (quit, soft-locked, out of budget).
    Locked,
}

/// A game as seen by the harness.
pub trait Environment: Send {
    /// Restores the initial state for `seed` and returns the first frame.
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError>;

    /// Asserts the inputs of one atomic command (a single chord, pointer
    /// action or text entry). See [`ActionCommand::atoms`].
    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError>;

    /// Releases every held input.
    fn release(&mut self) -> Result<(), EnvError> {
        Ok(())
    }

    /// Moves the game forward by `dt_ms` of game time. `advance(0)` is a
    /// no-op.
    fn advance(&mut self, dt_ms: u64) -> Result<(), EnvError>;

    /// Current screen. Must not change any state.
    fn snapshot(&self) -> Frame;

    fn surface_bounds(&self) -> SurfaceBounds;

    fn status(&self) -> EnvStatus {
        EnvStatus::Running
    }

    /// Number of in-game losses (deaths, game overs) since reset.
    fn loss_count(&self) -> u64 {
        0
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError> {
        (**self).reset(seed)
    }

    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        (**self).apply(command)
    }

    fn release(&mut self) -> Result<(), EnvError> {
        (**self).release()
    }

    fn advance(&mut self, dt_ms: u64) -> Result<(), EnvError> {
        (**self).advance(dt_ms)
    }

    fn snapshot(&self) -> Frame {
        (**self).snapshot()
    }

    fn surface_bounds(&self) -> SurfaceBounds {
        (**self).surface_bounds()
    }

    fn status(&self) -> EnvStatus {
        (**self).status()
    }

    fn loss_count(&self) -> u64 {
        (**self).loss_count()
    }
}
