use std::cell::OnceCell;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::raster::{completion_screen, Canvas, GREEN, WHITE};
use super::{PracticeGame, PracticeKind, ACTION_BUDGET, STAGES};
use crate::action::{ActionCommand, Modifiers, MouseButton};
use crate::env::{EnvError, EnvStatus, Environment};
use crate::frame::{Frame, SurfaceBounds};

pub const TARGET_RADIUS: i64 = 40;

/// Click the green circle ten times. Each hit respawns it elsewhere.
pub struct ClickingGame {
    rng: ChaCha8Rng,
    target: (i64, i64),
    cursor: (i64, i64),
    hits: u32,
    actions_used: u32,
    time_ms: u64,
    frame: OnceCell<Frame>,
}

impl ClickingGame {
    pub fn new(seed: u64) -> Self {
        let mut game = ClickingGame {
            rng: ChaCha8Rng::seed_from_u64(seed),
            target: (0, 0),
            cursor: (0, 0),
            hits: 0,
            actions_used: 0,
            time_ms: 0,
            frame: OnceCell::new(),
        };
        game.restart(seed);
        game
    }

    pub fn target(&self) -> (i64, i64) {
        self.target
    }

    pub fn cursor(&self) -> (i64, i64) {
        self.cursor
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }

    fn restart(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let b = SurfaceBounds::DESKTOP;
        self.cursor = (b.width as i64 / 2, b.height as i64 / 2);
        self.hits = 0;
        self.actions_used = 0;
        self.time_ms = 0;
        self.target = self.spawn(None);
        self.redraw();
    }

    /// A centre that keeps the whole circle on screen and, after the first
    /// target, does not overlap the previous one.
    fn spawn(&mut self, previous: Option<(i64, i64)>) -> (i64, i64) {
        let b = SurfaceBounds::DESKTOP;
        loop {
            let x = self
                .rng
                .random_range(TARGET_RADIUS..=b.width as i64 - TARGET_RADIUS);
            let y = self
                .rng
                .random_range(TARGET_RADIUS..=b.height as i64 - TARGET_RADIUS);
            let far_enough = previous.is_none_or(|(px, py)| {
                let (dx, dy) = (x - px, y - py);
                dx * dx + dy * dy > (2 * TARGET_RADIUS) * (2 * TARGET_RADIUS)
            });
            if far_enough {
                return (x, y);
            }
        }
    }

    fn redraw(&mut self) {
        self.frame = OnceCell::new();
    }

    fn render(&self) -> Frame {
        let b = SurfaceBounds::DESKTOP;
        if self.hits >= STAGES {
            completion_screen(b.width, b.height, 0)
        } else {
            let mut canvas = Canvas::new(b.width, b.height, WHITE);
            canvas.fill_disc(self.target.0, self.target.1, TARGET_RADIUS, GREEN);
            canvas.into_frame(0)
        }
    }

    fn click(&mut self) {
        let (dx, dy) = (self.cursor.0 - self.target.0, self.cursor.1 - self.target.1);
        if dx * dx + dy * dy <= TARGET_RADIUS * TARGET_RADIUS {
            self.hits += 1;
            if self.hits < STAGES {
                self.target = self.spawn(Some(self.target));
            }
        }
    }
}

impl Environment for ClickingGame {
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError> {
        self.restart(seed);
        Ok(self.snapshot())
    }

    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        if self.status() != EnvStatus::Running {
            return Err(EnvError::CommandRejected("game is over".into()));
        }
        self.actions_used += 1;
        match command {
            ActionCommand::MouseMove { x, y } | ActionCommand::Drag { x, y } => {
                self.cursor = (*x as i64, *y as i64);
            }
            ActionCommand::Click { .. } => {
                self.click();
                self.redraw();
            }
            _ => {}
        }
        Ok(())
    }

    fn advance(&mut self, dt_ms: u64) -> Result<(), EnvError> {
        self.time_ms += dt_ms;
        Ok(())
    }

    fn snapshot(&self) -> Frame {
        self.frame
            .get_or_init(|| self.render())
            .with_timestamp(self.time_ms)
    }

    fn surface_bounds(&self) -> SurfaceBounds {
        SurfaceBounds::DESKTOP
    }

    fn status(&self) -> EnvStatus {
        if self.hits >= STAGES {
            EnvStatus::Completed
        } else if self.actions_used >= ACTION_BUDGET {
            EnvStatus::Locked
        } else {
            EnvStatus::Running
        }
    }
}

impl PracticeGame for ClickingGame {
    fn kind(&self) -> PracticeKind {
        PracticeKind::Clicking
    }

    fn score(&self) -> u32 {
        self.hits
    }

    fn actions_used(&self) -> u32 {
        self.actions_used
    }

    fn oracle_plan(&self) -> Vec<ActionCommand> {
        if self.status() != EnvStatus::Running {
            return Vec::new();
        }
        vec![
            ActionCommand::MouseMove {
                x: self.target.0 as u32,
                y: self.target.1 as u32,
            },
            ActionCommand::Click {
                button: MouseButton::Left,
                modifiers: Modifiers::NONE,
            },
        ]
    }
}
