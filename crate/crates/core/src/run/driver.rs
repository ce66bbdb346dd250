use std::sync::Arc;

use crate::action::ActionCommand;
use crate::env::{
    execute, observe, ClockMode, EnvError, EnvStatus, Environment, GameClock, ObservationPolicy,
    RealtimeTicker, WallClock,
};
use crate::frame::{Frame, SurfaceBounds};

/// How the run loop reaches the game under one clock mode.
pub trait Driver {
    fn observe(&mut self, policy: &ObservationPolicy) -> Result<Vec<Frame>, EnvError>;

    fn execute(&mut self, command: &ActionCommand) -> Result<(), EnvError>;

    fn game_time_ms(&self) -> u64;

    fn status(&self) -> EnvStatus;

    fn loss_count(&self) -> u64;

    fn bounds(&self) -> SurfaceBounds;

    fn mode(&self) -> ClockMode;

    /// Stops the driver and hands the environment back.
    fn finish(self: Box<Self>) -> Box<dyn Environment>;
}

/// Game time moves only while a command or an observation plays out.
pub struct LiteDriver {
    env: Box<dyn Environment>,
    clock: GameClock,
}

impl LiteDriver {
    /// Resets `env` for `seed`.
    pub fn start(mut env: Box<dyn Environment>, seed: u64, tick_ms: u64) -> Result<Self, EnvError> {
        env.reset(seed)?;
        Ok(LiteDriver {
            env,
            clock: GameClock::new(ClockMode::Lite, tick_ms),
        })
    }
}

impl Driver for LiteDriver {
    fn observe(&mut self, policy: &ObservationPolicy) -> Result<Vec<Frame>, EnvError> {
        observe(self.env.as_mut(), &mut self.clock, policy)
    }

    fn execute(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        execute(self.env.as_mut(), &mut self.clock, command)
    }

    fn game_time_ms(&self) -> u64 {
        self.clock.game_time_ms()
    }

    fn status(&self) -> EnvStatus {
        self.env.status()
    }

    fn loss_count(&self) -> u64 {
        self.env.loss_count()
    }

    fn bounds(&self) -> SurfaceBounds {
        self.env.surface_bounds()
    }

    fn mode(&self) -> ClockMode {
        ClockMode::Lite
    }

    fn finish(self: Box<Self>) -> Box<dyn Environment> {
        self.env
    }
}

/// The game ticks on its own thread; the run loop only queues commands and
/// waits on the wall clock.
pub struct RealtimeDriver {
    ticker: RealtimeTicker,
    wall: Arc<dyn WallClock>,
}

impl RealtimeDriver {
    /// Resets `env` for `seed` and starts ticking.
    pub fn start(
        mut env: Box<dyn Environment>,
        seed: u64,
        tick_ms: u64,
        wall: Arc<dyn WallClock>,
    ) -> Result<Self, EnvError> {
        env.reset(seed)?;
        Ok(RealtimeDriver {
            ticker: RealtimeTicker::spawn(env, Arc::clone(&wall), tick_ms),
            wall,
        })
    }

    pub fn ticker(&self) -> &RealtimeTicker {
        &self.ticker
    }

    fn wait(&self, ms: u64) {
        if ms > 0 {
            self.wall.sleep_ms(ms);
        }
        self.ticker.sync();
    }
}

impl Driver for RealtimeDriver {
    fn observe(&mut self, policy: &ObservationPolicy) -> Result<Vec<Frame>, EnvError> {
        self.wait(policy.post_action_delay_ms);
        let n = policy.frames_per_observation.max(1);
        let mut frames = Vec::with_capacity(n as usize);
        frames.push(self.ticker.snapshot());
        for _ in 1..n {
            self.wait(policy.frame_spacing_ms);
            frames.push(self.ticker.snapshot());
        }
        Ok(frames)
    }

    fn execute(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        command
            .validate(self.ticker.surface_bounds())
            .map_err(|e| EnvError::CommandRejected(e.to_string()))?;
        let ticket = self.ticker.submit(command);
        self.ticker.wait_for(ticket)
    }

    fn game_time_ms(&self) -> u64 {
        self.ticker.sync();
        self.ticker.game_time_ms()
    }

    fn status(&self) -> EnvStatus {
        self.ticker.status()
    }

    fn loss_count(&self) -> u64 {
        self.ticker.loss_count()
    }

    fn bounds(&self) -> SurfaceBounds {
        self.ticker.surface_bounds()
    }

    fn mode(&self) -> ClockMode {
        ClockMode::Realtime
    }

    fn finish(self: Box<Self>) -> Box<dyn Environment> {
        self.ticker.stop()
    }
}
