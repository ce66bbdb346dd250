//! Generators shared by the action tests and the acceptance suite.
#![allow(dead_code)]

use arcade_core::action::{
    ActionCommand, Button, ButtonChord, Key, KeyChord, Modifiers, MouseButton, MAX_DURATION_MS,
};
use proptest::prelude::*;

pub fn any_key() -> impl Strategy<Value = Key> {
    proptest::sample::select(Key::all().collect::<Vec<_>>())
}

fn distinct<T: Clone + std::fmt::Debug + 'static>(
    pool: Vec<T>,
    max: usize,
) -> impl Strategy<Value = Vec<T>> {
    proptest::sample::subsequence(pool, 1..=max).prop_shuffle()
}

fn duration() -> impl Strategy<Value = u64> {
    prop_oneof![
        Just(100u64),
        Just(500),
        1u64..5_000,
        1u64..=MAX_DURATION_MS,
    ]
}

pub fn command() -> impl Strategy<Value = ActionCommand> {
    let all_keys: Vec<Key> = Key::all().collect();
    let key_chord = (distinct(all_keys, 3), duration())
        .prop_map(|(ks, ms)| KeyChord::new(ks, ms).unwrap());
    let button_chord = (distinct(Button::ALL.to_vec(), 3), duration())
        .prop_map(|(bs, ms)| ButtonChord::new(bs, ms).unwrap());
    prop_oneof![
        proptest::collection::vec(button_chord, 0..4).prop_map(ActionCommand::ButtonSequence),
        proptest::collection::vec(key_chord, 1..4).prop_map(ActionCommand::KeySequence),
        (any_key(), duration()).prop_map(|(key, duration_ms)| ActionCommand::HoldKey { key, duration_ms }),
        (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(r, shift, ctrl, alt)| {
            ActionCommand::Click {
                button: if r { MouseButton::Right } else { MouseButton::Left },
                modifiers: Modifiers { shift, ctrl, alt },
            }
        }),
        (0u32..=640, 0u32..=400).prop_map(|(x, y)| ActionCommand::MouseMove { x, y }),
        (0u32..=640, 0u32..=400).prop_map(|(x, y)| ActionCommand::Drag { x, y }),
        (1u32..1000).prop_map(ActionCommand::ScrollUp),
        (1u32..1000).prop_map(ActionCommand::ScrollDown),
        "[^\r\n]{1,40}".prop_map(ActionCommand::Write),
    ]
}

pub fn fuzz_input() -> impl Strategy<Value = String> {
    let token = prop_oneof![
        Just("press_key ".to_string()),
        Just("hold_key ".to_string()),
        Just("press_button ".to_string()),
        Just("move ".to_string()),
        Just("click ".to_string()),
        Just("```actions\n[".to_string()),
        Just("```".to_string()),
        Just("(\"A\",".to_string()),
        Just("+".to_string()),
        Just(",".to_string()),
        Just("@".to_string()),
        Just("#".to_string()),
        Just("KeyA".to_string()),
        "[0-9.\\-]{1,6}",
        ".{0,4}",
    ];
    prop_oneof![
        proptest::collection::vec(any::<u8>(), 0..64)
            .prop_map(|b| String::from_utf8_lossy(&b).into_owned()),
        proptest::collection::vec(token, 0..12).prop_map(|t| t.concat()),
    ]
}
