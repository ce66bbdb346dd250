use std::cell::OnceCell;
use std::sync::OnceLock;

use serde::Deserialize;

use super::raster::{completion_screen, dist2_to_segment, Canvas, BLACK, GREEN, RED, WHITE};
use super::{PracticeGame, PracticeKind, ACTION_BUDGET};
use crate::action::ActionCommand;
use crate::env::{EnvError, EnvStatus, Environment};
use crate::frame::{Frame, SurfaceBounds};

/// How far the marker may stray from the line during a drag.
pub const DRAG_TOLERANCE: f64 = 12.0;
/// A drag picks up the marker only if it starts this close to it.
const GRAB_RADIUS: f64 = 12.0;
const MARKER_RADIUS: i64 = 10;
const GOAL_RADIUS: i64 = 14;
const LINE_HALF_WIDTH: i64 = 3;

const LEVEL_DATA: &str = include_str!("../../data/drag_paths.toml");

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct DragLevel {
    pub label: String,
    pub points: Vec<(i64, i64)>,
}

impl DragLevel {
    pub fn start(&self) -> (i64, i64) {
        self.points[0]
    }

    pub fn end(&self) -> (i64, i64) {
        *self.points.last().expect("levels have at least two points")
    }

    /// Squared distance from `p` to the nearest point of the polyline.
    pub fn dist2(&self, p: (f64, f64)) -> f64 {
        self.points
            .windows(2)
            .map(|s| dist2_to_segment(p, s[0], s[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the segment nearest to `p`.
    fn nearest_segment(&self, p: (f64, f64)) -> usize {
        let d: Vec<f64> = self
            .points
            .windows(2)
            .map(|s| dist2_to_segment(p, s[0], s[1]))
            .collect();
        (0..d.len())
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .unwrap_or(0)
    }
}

#[derive(Deserialize)]
struct LevelFile {
    level: Vec<DragLevel>,
}

pub fn drag_levels() -> &'static [DragLevel] {
    static LEVELS: OnceLock<Vec<DragLevel>> = OnceLock::new();
    LEVELS.get_or_init(|| {
        let file: LevelFile = toml::from_str(LEVEL_DATA).expect("shipped level data is valid");
        assert!(file.level.iter().all(|l| l.points.len() >= 2));
        file.level
    })
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn as_f64(p: (i64, i64)) -> (f64, f64) {
    (p.0 as f64, p.1 as f64)
}

/// Drag the red marker along the black line to the green goal.
pub struct DraggingGame {
    level: usize,
    marker: (i64, i64),
    cursor: (i64, i64),
    actions_used: u32,
    time_ms: u64,
    frame: OnceCell<Frame>,
}

impl DraggingGame {
    /// The level order is fixed; `seed` is accepted for interface symmetry.
    pub fn new(_seed: u64) -> Self {
        let b = SurfaceBounds::DESKTOP;
        let game = DraggingGame {
            level: 0,
            marker: drag_levels()[0].start(),
            cursor: (b.width as i64 / 2, b.height as i64 / 2),
            actions_used: 0,
            time_ms: 0,
            frame: OnceCell::new(),
        };
        game
    }

    /// Zero-based index of the current level; equals the number finished.
    pub fn level_index(&self) -> usize {
        self.level
    }

    pub fn current_level(&self) -> Option<&'static DragLevel> {
        drag_levels().get(self.level)
    }

    pub fn marker(&self) -> (i64, i64) {
        self.marker
    }

    pub fn cursor(&self) -> (i64, i64) {
        self.cursor
    }

    /// Moves the cursor in a straight line with the button held, sampling
    /// every pixel along the longer axis.
    fn drag_to(&mut self, to: (i64, i64)) {
        let from = self.cursor;
        self.cursor = to;
        let Some(level) = self.current_level() else {
            return;
        };
        if dist2(as_f64(from), as_f64(self.marker)) > GRAB_RADIUS * GRAB_RADIUS {
            return;
        }
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        let n = dx.abs().max(dy.abs());
        let limit = DRAG_TOLERANCE * DRAG_TOLERANCE;
        for i in 1..=n {
            let t = i as f64 / n as f64;
            let p = (from.0 as f64 + t * dx as f64, from.1 as f64 + t * dy as f64);
            if level.dist2(p) > limit {
                self.marker = level.start();
                return;
            }
        }
        self.marker = to;
        if dist2(as_f64(to), as_f64(level.end())) <= limit {
            self.level += 1;
            if let Some(next) = self.current_level() {
                self.marker = next.start();
            }
        }
    }

    fn redraw(&mut self) {
        self.frame = OnceCell::new();
    }

    fn render(&self) -> Frame {
        let b = SurfaceBounds::DESKTOP;
        let Some(level) = self.current_level() else {
            return completion_screen(b.width, b.height, 0);
        };
        let mut canvas = Canvas::new(b.width, b.height, WHITE);
        for s in level.points.windows(2) {
            canvas.stroke(s[0], s[1], LINE_HALF_WIDTH, BLACK);
        }
        let (gx, gy) = level.end();
        canvas.fill_disc(gx, gy, GOAL_RADIUS, GREEN);
        canvas.fill_disc(self.marker.0, self.marker.1, MARKER_RADIUS, RED);
        canvas.into_frame(0)
    }
}

impl Environment for DraggingGame {
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError> {
        *self = DraggingGame::new(seed);
        Ok(self.snapshot())
    }

    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        if self.status() != EnvStatus::Running {
            return Err(EnvError::CommandRejected("game is over".into()));
        }
        self.actions_used += 1;
        match command {
            ActionCommand::MouseMove { x, y } => self.cursor = (*x as i64, *y as i64),
            ActionCommand::Drag { x, y } => {
                self.drag_to((*x as i64, *y as i64));
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
        if self.level >= drag_levels().len() {
            EnvStatus::Completed
        } else if self.actions_used >= ACTION_BUDGET {
            EnvStatus::Locked
        } else {
            EnvStatus::Running
        }
    }
}

impl PracticeGame for DraggingGame {
    fn kind(&self) -> PracticeKind {
        PracticeKind::Dragging
    }

    fn score(&self) -> u32 {
        self.level as u32
    }

    fn actions_used(&self) -> u32 {
        self.actions_used
    }

    fn oracle_plan(&self) -> Vec<ActionCommand> {
        if self.status() != EnvStatus::Running {
            return Vec::new();
        }
        let level = self.current_level().expect("running implies a current level");
        let to_point = |(x, y): (i64, i64)| (x as u32, y as u32);
        let (mx, my) = to_point(self.marker);
        let mut plan = vec![ActionCommand::MouseMove { x: mx, y: my }];
        let segment = level.nearest_segment(as_f64(self.marker));
        for &p in &level.points[segment + 1..] {
            let (x, y) = to_point(p);
            plan.push(ActionCommand::Drag { x, y });
        }
        plan
    }
}
