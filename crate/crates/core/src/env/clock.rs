use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EnvError, Environment};

pub const DEFAULT_TICK_MS: u64 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// The game keeps running while the agent thinks.
    Realtime,
    /// The game is paused except while an action (and the observation
    /// delay after it) plays out.
    Lite,
}

impl std::str::FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realtime" => Ok(ClockMode::Realtime),
            "lite" => Ok(ClockMode::Lite),
            other => Err(format!("unknown clock mode {other:?}")),
        }
    }
}

/// Source of wall time. Two roles use it: the party that *waits* for time
/// to pass (`sleep_ms`, e.g. a controller or a model call) and the ticker
/// thread that *reacts* to time passing (`wait_until`). With
/// [`VirtualClock`] only the former moves time forward.
pub trait WallClock: Send + Sync {
    fn now_ms(&self) -> u64;

    fn sleep_ms(&self, ms: u64);

    /// Blocks until `now_ms() >= deadline_ms`. Gives up and returns `false`
    /// as soon as `abort()` is true.
    fn wait_until(&self, deadline_ms: u64, abort: &dyn Fn() -> bool) -> bool;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl WallClock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }

    fn wait_until(&self, deadline_ms: u64, abort: &dyn Fn() -> bool) -> bool {
        loop {
            if abort() {
                return false;
            }
            let now = self.now_ms();
            if now >= deadline_ms {
                return true;
            }
            std::thread::sleep(Duration::from_millis((deadline_ms - now).min(5)));
        }
    }
}

/// Manually advanced time for tests and faster-than-real-time runs.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<u64>,
    moved: Condvar,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shared() -> Arc<VirtualClock> {
        Arc::new(Self::new())
    }

    pub fn advance(&self, ms: u64) {
        *self.now.lock().unwrap() += ms;
        self.moved.notify_all();
    }
}

impl WallClock for VirtualClock {
    fn now_ms(&self) -> u64 {
        *self.now.lock().unwrap()
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms);
    }

    fn wait_until(&self, deadline_ms: u64, abort: &dyn Fn() -> bool) -> bool {
        let mut now = self.now.lock().unwrap();
        while *now < deadline_ms {
            if abort() {
                return false;
            }
            now = self
                .moved
                .wait_timeout(now, Duration::from_millis(5))
                .unwrap()
                .0;
        }
        true
    }
}

/// In-game time for one environment.
#[derive(Clone)]
pub struct GameClock {
    mode: ClockMode,
    game_time_ms: u64,
    tick_ms: u64,
    wall: Option<Arc<dyn WallClock>>,
}

impl std::fmt::Debug for GameClock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GameClock")
            .field("mode", &self.mode)
            .field("game_time_ms", &self.game_time_ms)
            .field("tick_ms", &self.tick_ms)
            .finish()
    }
}

impl GameClock {
    pub fn new(mode: ClockMode, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "tick must be positive");
        GameClock {
            mode,
            game_time_ms: 0,
            tick_ms,
            wall: None,
        }
    }

    pub fn lite() -> Self {
        Self::new(ClockMode::Lite, DEFAULT_TICK_MS)
    }

    /// A Realtime clock also waits on `wall` while game time advances.
    pub fn with_wall_clock(mut self, wall: Arc<dyn WallClock>) -> Self {
        self.wall = Some(wall);
        self
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn game_time_ms(&self) -> u64 {
        self.game_time_ms
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    pub fn reset(&mut self) {
        self.game_time_ms = 0;
    }

    /// Advances the environment and game time by `ms`. Realtime clocks step
    /// in ticks and wait the matching wall time for each.
    pub fn advance(&mut self, env: &mut dyn Environment, ms: u64) -> Result<(), EnvError> {
        if ms == 0 {
            return Ok(());
        }
        match (&self.wall, self.mode) {
            (Some(wall), ClockMode::Realtime) => {
                let mut left = ms;
                while left > 0 {
                    let step = left.min(self.tick_ms);
                    wall.sleep_ms(step);
                    env.advance(step)?;
                    self.game_time_ms += step;
                    left -= step;
                }
            }
            _ => {
                env.advance(ms)?;
                self.game_time_ms += ms;
            }
        }
        Ok(())
    }
}

/// How frames are captured after an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPolicy {
    pub frames_per_observation: u32,
    pub frame_spacing_ms: u64,
    pub post_action_delay_ms: u64,
}

impl ObservationPolicy {
    /// One frame, half a second after the action.
    pub const SINGLE_DELAYED: ObservationPolicy = ObservationPolicy {
        frames_per_observation: 1,
        frame_spacing_ms: 0,
        post_action_delay_ms: 500,
    };

    /// Five frames a tenth of a second apart.
    pub const FIVE_SPACED: ObservationPolicy = ObservationPolicy {
        frames_per_observation: 5,
        frame_spacing_ms: 100,
        post_action_delay_ms: 0,
    };

    /// The most recent frame, nothing else.
    pub const LATEST: ObservationPolicy = ObservationPolicy {
        frames_per_observation: 1,
        frame_spacing_ms: 0,
        post_action_delay_ms: 0,
    };

    pub fn validate(&self) -> Result<(), String> {
        if self.frames_per_observation == 0 {
            return Err("frames_per_observation must be at least 1".into());
        }
        Ok(())
    }

    /// Game time one observation consumes.
    pub fn span_ms(&self) -> u64 {
        self.post_action_delay_ms
            + self.frame_spacing_ms * (self.frames_per_observation.saturating_sub(1)) as u64
    }
}

impl Default for ObservationPolicy {
    fn default() -> Self {
        ObservationPolicy::SINGLE_DELAYED
    }
}
