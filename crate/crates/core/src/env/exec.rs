use super::{EnvError, Environment, GameClock, ObservationPolicy};
use crate::action::ActionCommand;
use crate::frame::Frame;

/// Plays a command out: for each atomic step, assert its inputs, let the
/// clock run for the step's duration, then release.
pub fn execute(
    env: &mut dyn Environment,
    clock: &mut GameClock,
    command: &ActionCommand,
) -> Result<(), EnvError> {
    command
        .validate(env.surface_bounds())
        .map_err(|e| EnvError::CommandRejected(e.to_string()))?;
    for (atom, duration_ms) in command.atoms() {
        env.apply(&atom)?;
        clock.advance(env, duration_ms)?;
        env.release()?;
    }
    Ok(())
}

/// Waits the policy's post-action delay, then captures
/// `frames_per_observation` frames `frame_spacing_ms` apart.
pub fn observe(
    env: &mut dyn Environment,
    clock: &mut GameClock,
    policy: &ObservationPolicy,
) -> Result<Vec<Frame>, EnvError> {
    clock.advance(env, policy.post_action_delay_ms)?;
    let n = policy.frames_per_observation.max(1);
    let mut frames = Vec::with_capacity(n as usize);
    frames.push(env.snapshot());
    for _ in 1..n {
        clock.advance(env, policy.frame_spacing_ms)?;
        frames.push(env.snapshot());
    }
    Ok(frames)
}
