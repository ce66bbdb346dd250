use std::io;
use std::path::Path;

const CLICKING: &str = include_str!("../../prompts/clicking.txt");
const DRAGGING: &str = include_str!("../../prompts/dragging.txt");
const NAVIGATION: &str = include_str!("../../prompts/navigation.txt");
const DESKTOP: &str = include_str!("../../prompts/desktop.txt");
const CONSOLE: &str = include_str!("../../prompts/console.txt");

/// Prompt shipped with the crate for `game_id`: the practice games, plus
/// the generic `desktop` and `console` prompts.
pub fn builtin_prompt(game_id: &str) -> Option<String> {
    let game = match game_id {
        "clicking" => CLICKING,
        "dragging" => DRAGGING,
        "navigation" => NAVIGATION,
        "desktop" => return Some(DESKTOP.to_string()),
        "console" => return Some(CONSOLE.to_string()),
        _ => return None,
    };
    Some(format!("{DESKTOP}{game}"))
}

/// Reads `<dir>/<game_id>.txt`.
pub fn load_prompt(dir: &Path, game_id: &str) -> io::Result<String> {
    std::fs::read_to_string(dir.join(format!("{game_id}.txt")))
}
