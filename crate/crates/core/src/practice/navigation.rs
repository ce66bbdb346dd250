use std::cell::OnceCell;
use std::collections::VecDeque;
use std::sync::OnceLock;

use super::raster::{completion_screen, Canvas, DARK_GRAY, GREEN, LIGHT_GRAY, RED};
use super::{PracticeGame, PracticeKind, ACTION_BUDGET};
use crate::action::{ActionCommand, Key, KeyChord, DefaultTimings};
use crate::env::{EnvError, EnvStatus, Environment};
use crate::frame::{Frame, SurfaceBounds};

pub const CELL_PX: i64 = 80;

const MAZE_DATA: &str = include_str!("../../data/mazes.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Open,
    Wall,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Maze {
    pub label: String,
    /// `grid[row][col]`
    pub grid: Vec<Vec<Cell>>,
    /// `(col, row)`
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

impl Maze {
    pub fn width(&self) -> usize {
        self.grid[0].len()
    }

    pub fn height(&self) -> usize {
        self.grid.len()
    }

    pub fn is_open(&self, col: i64, row: i64) -> bool {
        col >= 0
            && row >= 0
            && (row as usize) < self.height()
            && (col as usize) < self.width()
            && self.grid[row as usize][col as usize] == Cell::Open
    }

    /// Shortest move list from `from` to the goal, as `(dx, dy)` steps.
    pub fn shortest_path(&self, from: (usize, usize)) -> Option<Vec<(i64, i64)>> {
        let (w, h) = (self.width(), self.height());
        let mut came_from: Vec<Option<(usize, (i64, i64))>> = vec![None; w * h];
        let mut seen = vec![false; w * h];
        let mut queue = VecDeque::from([from]);
        seen[from.1 * w + from.0] = true;
        while let Some((c, r)) = queue.pop_front() {
            if (c, r) == self.goal {
                let mut steps = Vec::new();
                let mut at = r * w + c;
                while let Some((prev, step)) = came_from[at] {
                    steps.push(step);
                    at = prev;
                }
                steps.reverse();
                return Some(steps);
            }
            for step in DIRECTIONS {
                let (nc, nr) = (c as i64 + step.0, r as i64 + step.1);
                if !self.is_open(nc, nr) {
                    continue;
                }
                let next = nr as usize * w + nc as usize;
                if !seen[next] {
                    seen[next] = true;
                    came_from[next] = Some((r * w + c, step));
                    queue.push_back((nc as usize, nr as usize));
                }
            }
        }
        None
    }
}

const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Parses the maze file format: a `maze <n>: <label>` header followed by
/// one line per row, `#` wall, `.` floor, `P` start, `G` goal.
pub fn parse_mazes(text: &str) -> Result<Vec<Maze>, String> {
    let mut mazes = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((n, line)) = lines.next() {
        let Some(rest) = line.strip_prefix("maze ") else {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            return Err(format!("line {}: expected a maze header", n + 1));
        };
        let label = rest
            .split_once(':')
            .map(|(_, l)| l.trim().to_string())
            .ok_or_else(|| format!("line {}: header needs `: label`", n + 1))?;
        let mut grid = Vec::new();
        let (mut start, mut goal) = (None, None);
        while let Some((n, row)) = lines.next_if(|(_, l)| is_row(l)) {
            let r = grid.len();
            let mut cells = Vec::new();
            for (c, ch) in row.chars().enumerate() {
                cells.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Open,
                    'P' if start.is_none() => {
                        start = Some((c, r));
                        Cell::Open
                    }
                    'G' if goal.is_none() => {
                        goal = Some((c, r));
                        Cell::Open
                    }
                    _ => return Err(format!("line {}: unexpected {ch:?}", n + 1)),
                });
            }
            if grid.first().is_some_and(|g: &Vec<Cell>| g.len() != cells.len()) {
                return Err(format!("line {}: ragged row", n + 1));
            }
            grid.push(cells);
        }
        let (Some(start), Some(goal)) = (start, goal) else {
            return Err(format!("maze {label:?} needs one P and one G"));
        };
        mazes.push(Maze {
            label,
            grid,
            start,
            goal,
        });
    }
    Ok(mazes)
}

fn is_row(line: &str) -> bool {
    !line.is_empty() && line.chars().all(|c| matches!(c, '#' | '.' | 'P' | 'G'))
}

/// The ten shipped mazes.
pub fn mazes() -> &'static [Maze] {
    static MAZES: OnceLock<Vec<Maze>> = OnceLock::new();
    MAZES.get_or_init(|| parse_mazes(MAZE_DATA).expect("shipped maze data is valid"))
}

/// Steer the red square onto the green one, ten mazes in a row.
pub struct NavigationGame {
    maze: usize,
    player: (usize, usize),
    actions_used: u32,
    time_ms: u64,
    frame: OnceCell<Frame>,
}

impl NavigationGame {
    /// The maze order is fixed; `seed` is accepted for interface symmetry.
    pub fn new(_seed: u64) -> Self {
        let game = NavigationGame {
            maze: 0,
            player: mazes()[0].start,
            actions_used: 0,
            time_ms: 0,
            frame: OnceCell::new(),
        };
        game
    }

    /// Zero-based index of the current maze; equals the number solved.
    pub fn maze_index(&self) -> usize {
        self.maze
    }

    pub fn current_maze(&self) -> Option<&'static Maze> {
        mazes().get(self.maze)
    }

    pub fn player(&self) -> (usize, usize) {
        self.player
    }

    fn step(&mut self, key: Key) {
        let Some(maze) = self.current_maze() else {
            return;
        };
        let (dx, dy) = match key {
            Key::ARROW_LEFT => (-1, 0),
            Key::ARROW_RIGHT => (1, 0),
            Key::ARROW_UP => (0, -1),
            Key::ARROW_DOWN => (0, 1),
            _ => return,
        };
        let (nc, nr) = (self.player.0 as i64 + dx, self.player.1 as i64 + dy);
        if maze.is_open(nc, nr) {
            self.player = (nc as usize, nr as usize);
        }
        if self.player == maze.goal {
            self.maze += 1;
            if let Some(next) = self.current_maze() {
                self.player = next.start;
            }
        }
    }

    fn redraw(&mut self) {
        self.frame = OnceCell::new();
    }

    fn render(&self) -> Frame {
        let b = SurfaceBounds::DESKTOP;
        let Some(maze) = self.current_maze() else {
            return completion_screen(b.width, b.height, 0);
        };
        let mut canvas = Canvas::new(b.width, b.height, DARK_GRAY);
        for (r, row) in maze.grid.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let color = if (c, r) == maze.goal {
                    GREEN
                } else if *cell == Cell::Open {
                    LIGHT_GRAY
                } else {
                    DARK_GRAY
                };
                canvas.fill_rect(c as i64 * CELL_PX, r as i64 * CELL_PX, CELL_PX, CELL_PX, color);
            }
        }
        let inset = CELL_PX / 8;
        canvas.fill_rect(
            self.player.0 as i64 * CELL_PX + inset,
            self.player.1 as i64 * CELL_PX + inset,
            CELL_PX - 2 * inset,
            CELL_PX - 2 * inset,
            RED,
        );
        canvas.into_frame(0)
    }
}

impl Environment for NavigationGame {
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError> {
        *self = NavigationGame::new(seed);
        Ok(self.snapshot())
    }

    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        if self.status() != EnvStatus::Running {
            return Err(EnvError::CommandRejected("game is over".into()));
        }
        self.actions_used += 1;
        if let Some(key) = command.single_arrow() {
            self.step(key);
            self.redraw();
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
        if self.maze >= mazes().len() {
            EnvStatus::Completed
        } else if self.actions_used >= ACTION_BUDGET {
            EnvStatus::Locked
        } else {
            EnvStatus::Running
        }
    }
}

impl PracticeGame for NavigationGame {
    fn kind(&self) -> PracticeKind {
        PracticeKind::Navigation
    }

    fn score(&self) -> u32 {
        self.maze as u32
    }

    fn actions_used(&self) -> u32 {
        self.actions_used
    }

    fn oracle_plan(&self) -> Vec<ActionCommand> {
        if self.status() != EnvStatus::Running {
            return Vec::new();
        }
        let maze = self.current_maze().expect("running implies a current maze");
        let press = DefaultTimings::default().key_press_ms;
        maze.shortest_path(self.player)
            .expect("shipped mazes are solvable")
            .into_iter()
            .map(|step| {
                let key = match step {
                    (1, 0) => Key::ARROW_RIGHT,
                    (-1, 0) => Key::ARROW_LEFT,
                    (0, 1) => Key::ARROW_DOWN,
                    _ => Key::ARROW_UP,
                };
                ActionCommand::KeySequence(vec![
                    KeyChord::new(vec![key], press).expect("one key, positive duration")
                ])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn press(key: Key) -> ActionCommand {
        ActionCommand::KeySequence(vec![KeyChord::new(vec![key], 100).unwrap()])
    }

    #[test]
    fn ten_mazes_each_short() {
        let all = mazes();
        assert_eq!(all.len(), 10);
        for m in all {
            let path = m.shortest_path(m.start).unwrap();
            assert!(path.len() < 10, "{} takes {}", m.label, path.len());
        }
    }

    #[test]
    fn one_step_maze_completes_on_right() {
        let mut g = NavigationGame::new(0);
        g.apply(&press(Key::ARROW_RIGHT)).unwrap();
        assert_eq!(g.maze_index(), 1);
    }

    #[test]
    fn wall_bump_keeps_position_but_costs_an_action() {
        let mut g = NavigationGame::new(0);
        g.apply(&press(Key::ARROW_RIGHT)).unwrap();
        let m = g.current_maze().unwrap();
        let blocked = DIRECTIONS
            .iter()
            .find(|(dx, dy)| !m.is_open(g.player().0 as i64 + dx, g.player().1 as i64 + dy))
            .copied()
            .unwrap();
        let key = match blocked {
            (1, 0) => Key::ARROW_RIGHT,
            (-1, 0) => Key::ARROW_LEFT,
            (0, 1) => Key::ARROW_DOWN,
            _ => Key::ARROW_UP,
        };
        let before = g.player();
        g.apply(&press(key)).unwrap();
        assert_eq!(g.player(), before);
        assert_eq!(g.actions_used(), 2);
    }

    #[test]
    fn cell_colors_follow_grid() {
        let g = NavigationGame::new(0);
        let f = g.snapshot();
        let m = g.current_maze().unwrap();
        for (r, row) in m.grid.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                // sample a cell corner, clear of the inset player square
                let px = f.pixel(c as u32 * 80 + 2, r as u32 * 80 + 2);
                let want = if (c, r) == m.goal {
                    GREEN
                } else if *cell == Cell::Open {
                    LIGHT_GRAY
                } else {
                    DARK_GRAY
                };
                assert_eq!(px, want, "cell ({c},{r})");
            }
        }
        let (pc, pr) = g.player();
        assert_eq!(f.pixel(pc as u32 * 80 + 40, pr as u32 * 80 + 40), RED);
    }

    #[test]
    fn parser_rejects_missing_goal() {
        assert!(parse_mazes("maze 1: x\n###\n#P#\n###\n").is_err());
    }
}
