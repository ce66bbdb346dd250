use std::io::{self, BufRead};
use std::path::Path;

use anyhow::{Context, Result};

use arcade_core::action::ParseContext;
use arcade_core::env::{execute, observe, EnvStatus, GameClock, ObservationPolicy};
use arcade_core::parse_action_text;
use arcade_core::practice::{new_game, PracticeGame, PracticeKind, ACTION_BUDGET, STAGES};

use crate::commands::save_frames;

fn status_line(game: &dyn PracticeGame, clock: &GameClock) -> String {
    let status = match game.status() {
        EnvStatus::Running => "running",
        EnvStatus::Completed => "completed",
        EnvStatus::Locked => "out of actions",
    };
    format!(
        "stage {}/{STAGES}  actions {}/{ACTION_BUDGET}  time {} ms  {status}",
        game.score(),
        game.actions_used(),
        clock.game_time_ms()
    )
}

pub fn play(game: &str, seed: u64, oracle: bool, frames_dir: Option<&Path>) -> Result<i32> {
    let kind: PracticeKind = game.parse().map_err(anyhow::Error::msg)?;
    let mut game = new_game(kind, seed);
    let mut clock = GameClock::lite();
    let policy = ObservationPolicy::SINGLE_DELAYED;
    if let Some(dir) = frames_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        save_frames(dir, 0, &[game.snapshot()]);
    }
    let mut step = 0;
    println!("{}", status_line(game.as_ref(), &clock));

    let mut play_one = |game: &mut Box<dyn PracticeGame>, text: &str| -> Result<()> {
        let command = match parse_action_text(text, &ParseContext::desktop()) {
            Ok(c) => c,
            Err(e) => {
                println!("rejected: {e}");
                return Ok(());
            }
        };
        if let Err(e) = execute(game.as_mut(), &mut clock, &command) {
            println!("rejected: {e}");
            return Ok(());
        }
        let frames = observe(game.as_mut(), &mut clock, &policy)?;
        step += 1;
        if let Some(dir) = frames_dir {
            save_frames(dir, step, &frames);
        }
        println!("{command}  ->  {}", status_line(game.as_ref(), &clock));
        Ok(())
    };

    if oracle {
        while game.status() == EnvStatus::Running {
            for command in game.oracle_plan() {
                play_one(&mut game, &command.to_string())?;
            }
        }
    } else {
        for line in io::stdin().lock().lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            play_one(&mut game, line)?;
            if game.status() != EnvStatus::Running {
                break;
            }
        }
    }
    Ok(if game.status() == EnvStatus::Completed { 0 } else { 1 })
}
