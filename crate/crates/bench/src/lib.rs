//! Inputs shared by the benchmarks.

use arcade_core::practice::{new_game, PracticeKind};
use arcade_core::testkit::mix;
use arcade_core::Frame;

/// A noisy frame of the given size, fixed by `seed`.
pub fn noise_frame(width: u32, height: u32, seed: u64) -> Frame {
    let mut i = 0u64;
    Frame::from_fn(width, height, |_, _| {
        i += 1;
        let v = mix(seed ^ i).to_le_bytes();
        [v[0], v[1], v[2]]
    })
}

/// The opening screen of each practice game.
pub fn practice_frames() -> Vec<(PracticeKind, Frame)> {
    PracticeKind::ALL
        .into_iter()
        .map(|k| (k, new_game(k, 1).snapshot()))
        .collect()
}

/// Action lines covering every command shape, plus a console block.
pub const ACTION_LINES: &[&str] = &[
    "press_key ArrowLeft",
    "press_key Control+KeyC",
    "hold_key ArrowUp 1.5",
    "press_key ArrowRight,ArrowRight,KeyA@0.25",
    "write Hello there",
    "move 320,200",
    "click",
    "click right+shift",
    "drag 100,120",
    "scroll_down 3",
    "```actions\n[\"A\", (\"RIGHT\", \"B\"), \"UP\"]\n```",
];
