mod commands;
mod practice;

use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use arcade_core::env::ClockMode;

#[derive(Parser)]
#[command(name = "arcade", version, about = "Evaluate vision-driven agents on games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lite,
    Realtime,
}

impl From<Mode> for ClockMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Lite => ClockMode::Lite,
            Mode::Realtime => ClockMode::Realtime,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Hash walkthrough images listed in a manifest into a checkpoint pack.
    BuildPack {
        #[arg(long)]
        manifest: PathBuf,
        /// Write the pack here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the perceptual hash of each image.
    Hash {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[arg(long)]
        average: bool,
    },
    /// Score a run log, or a sequence of frames, against a pack.
    Score {
        #[arg(long)]
        pack: PathBuf,
        /// Rescore the observations recorded in this run log.
        #[arg(long, conflicts_with = "frames")]
        log: Option<PathBuf>,
        /// Frames in the order they were seen.
        frames: Vec<PathBuf>,
    },
    /// Average per-game progress values into one score.
    Overall {
        #[arg(required = true)]
        scores: Vec<f64>,
    },
    /// Play one game with one agent.
    Run(commands::RunArgs),
    /// Re-execute a lite-mode log against a fresh practice game.
    Replay { log: PathBuf },
    /// Host games for agents, humans and observers over WebSocket.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        bind: SocketAddr,
        #[arg(long)]
        allow_realtime_humans: bool,
        #[arg(long)]
        tick_ms: Option<u64>,
        #[arg(long)]
        adapter_timeout_ms: Option<u64>,
    },
    /// Play a practice game from stdin, one command per line.
    Practice {
        game: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Let the built-in solver play instead of reading stdin.
        #[arg(long)]
        oracle: bool,
        /// Save every observed frame here as PNG.
        #[arg(long)]
        frames_dir: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::BuildPack { manifest, out } => commands::build_pack(&manifest, out.as_deref()),
        Command::Hash { images, average } => commands::hash(&images, average),
        Command::Score { pack, log, frames } => commands::score(&pack, log.as_deref(), &frames),
        Command::Overall { scores } => commands::overall(&scores),
        Command::Run(args) => commands::run(args),
        Command::Replay { log } => commands::replay(&log),
        Command::Serve {
            bind,
            allow_realtime_humans,
            tick_ms,
            adapter_timeout_ms,
        } => commands::serve(bind, allow_realtime_humans, tick_ms, adapter_timeout_ms),
        Command::Practice {
            game,
            seed,
            oracle,
            frames_dir,
        } => practice::play(&game, seed, oracle, frames_dir.as_deref()),
    }
}
