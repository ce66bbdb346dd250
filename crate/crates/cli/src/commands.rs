use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;

use arcade_core::agent::{
    builtin_prompt, load_prompt, ActionInterface, Agent, AgentConfig, ChatCompletionsClient,
    MockModel, MockReply, ModelClient, ModelSettings, DEFAULT_CREDENTIAL_VAR,
};
use arcade_core::checkpoint::{load_pack, overall_score, CheckpointPack, PackManifest};
use arcade_core::env::{Environment, SystemClock};
use arcade_core::gateway::{
    AdapterListener, Gateway, GatewayConfig, Registry, DEFAULT_ADAPTER_TIMEOUT_MS,
};
use arcade_core::practice::{new_game, reference_pack, PracticeKind};
use arcade_core::run::{read_log, replay as replay_log, run_with, LogLine, LogWriter, RunConfig, RunRecord, RunSink};
use arcade_core::testkit::oracle_transcript;
use arcade_core::{Frame, ProgressState};

use crate::Mode;

pub fn build_pack(manifest: &Path, output: Option<&Path>) -> Result<i32> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let parsed = PackManifest::from_toml_str(&text)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let pack = parsed.build(base)?;
    let toml = pack.to_toml_string();
    match output {
        Some(path) => fs::write(path, toml).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{toml}"),
    }
    Ok(0)
}

pub fn hash(images: &[PathBuf], average: bool) -> Result<i32> {
    let algorithm = if average {
        arcade_core::HashAlgorithm::Average
    } else {
        arcade_core::HashAlgorithm::Difference
    };
    for path in images {
        let frame = Frame::open(path).with_context(|| format!("reading {}", path.display()))?;
        println!("{}  {}", arcade_core::hash_frame(&frame, algorithm)?, path.display());
    }
    Ok(0)
}

fn open_pack(path: &Path) -> Result<CheckpointPack> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(load_pack(file)?)
}

fn read_record(path: &Path) -> Result<RunRecord> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_log(BufReader::new(file))?)
}

pub fn score(pack: &Path, log: Option<&Path>, frames: &[PathBuf]) -> Result<i32> {
    let pack = open_pack(pack)?;
    let mut progress = ProgressState::new();
    if let Some(log) = log {
        let record = read_record(log)?;
        for turn in &record.turns {
            for hash in &turn.observation {
                progress.match_hash(&pack, *hash, turn.index)?;
            }
        }
        for hash in &record.footer.final_observation {
            progress.match_hash(&pack, *hash, record.footer.turns + 1)?;
        }
    } else {
        if frames.is_empty() {
            bail!("give --log or at least one frame");
        }
        for (step, path) in frames.iter().enumerate() {
            let frame = Frame::open(path).with_context(|| format!("reading {}", path.display()))?;
            progress.match_frame(&pack, &frame, step as u64 + 1)?;
        }
    }
    for event in progress.match_events() {
        let label = &pack.checkpoints()[event.checkpoint].label;
        println!(
            "step {} matched checkpoint {} ({label}) at distance {}",
            event.step, event.checkpoint, event.distance
        );
    }
    println!("progress {:.6}", arcade_core::progress_score(&progress, &pack));
    Ok(0)
}

pub fn overall(scores: &[f64]) -> Result<i32> {
    println!("{:.6}", overall_score(scores)?);
    Ok(0)
}

#[derive(Args)]
pub struct RunArgs {
    /// Run settings as TOML; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Checkpoint pack. Practice games default to their reference pack.
    #[arg(long)]
    pack: Option<PathBuf>,
    /// Wait here for an adapter to connect instead of using a practice game.
    #[arg(long)]
    adapter_bind: Option<SocketAddr>,
    #[arg(long, default_value_t = DEFAULT_ADAPTER_TIMEOUT_MS)]
    adapter_timeout_ms: u64,
    /// JSON array of canned model replies; the last one repeats.
    #[arg(long, conflicts_with_all = ["oracle", "endpoint"])]
    mock_transcript: Option<PathBuf>,
    /// Replies from the practice game's solver.
    #[arg(long, conflicts_with = "endpoint")]
    oracle: bool,
    /// Chat completions URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "default")]
    model: String,
    #[arg(long, default_value = DEFAULT_CREDENTIAL_VAR)]
    credential_var: String,
    #[arg(long)]
    extended_output: bool,
    /// Directory of `<game>.txt` prompts.
    #[arg(long)]
    prompt_dir: Option<PathBuf>,
    /// Stream the run log here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Save every observed frame here as PNG.
    #[arg(long)]
    frames_dir: Option<PathBuf>,
}

struct CliSink {
    log: Option<LogWriter<BufWriter<File>>>,
    frames_dir: Option<PathBuf>,
}

impl RunSink for CliSink {
    fn line(&mut self, line: &LogLine) -> std::io::Result<()> {
        if let LogLine::Turn(t) = line {
            log::info!("turn {} at {} ms: {}", t.index, t.game_time_ms, t.agent.turn.action_text());
        }
        match &mut self.log {
            Some(w) => w.write(line),
            None => Ok(()),
        }
    }

    fn observation(&mut self, turn: u64, frames: &[Frame]) {
        if let Some(dir) = &self.frames_dir {
            save_frames(dir, turn, frames);
        }
    }
}

pub(crate) fn save_frames(dir: &Path, step: u64, frames: &[Frame]) {
    for (i, frame) in frames.iter().enumerate() {
        let name = if frames.len() == 1 {
            format!("step-{step:05}.png")
        } else {
            format!("step-{step:05}-{i}.png")
        };
        let result = frame
            .to_png()
            .map_err(|e| e.to_string())
            .and_then(|png| fs::write(dir.join(name), png).map_err(|e| e.to_string()));
        if let Err(e) = result {
            log::warn!("could not save frame: {e}");
        }
    }
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => toml::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(game) = &args.game {
        config.game_id = game.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    if config.game_id.is_empty() {
        bail!("no game given; pass --game or set game_id in the config");
    }
    Ok(config)
}

fn read_transcript(path: &Path) -> Result<MockModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let replies: Vec<String> =
        serde_json::from_str(&text).context("transcript must be a JSON array of strings")?;
    let Some(last) = replies.last().cloned() else {
        bail!("transcript is empty");
    };
    Ok(MockModel::new(replies.into_iter().map(MockReply::Text)).then_forever(last))
}

pub fn run(args: RunArgs) -> Result<i32> {
    let config = run_config(&args)?;
    let practice: Option<PracticeKind> = config.game_id.parse().ok();

    let pack = match (&args.pack, practice) {
        (Some(path), _) => open_pack(path)?,
        (None, Some(kind)) => reference_pack(kind, config.seed),
        (None, None) => bail!("--pack is required for {}", config.game_id),
    };

    let env: Box<dyn Environment> = match (args.adapter_bind, practice) {
        (Some(addr), _) => {
            let listener = AdapterListener::bind(addr)?;
            eprintln!("waiting for an adapter on {}", listener.local_addr());
            let bridge = listener.accept(config.mode, args.adapter_timeout_ms)?;
            if bridge.game() != config.game_id {
                bail!("adapter offers {:?}, not {:?}", bridge.game(), config.game_id);
            }
            Box::new(bridge)
        }
        (None, Some(kind)) => new_game(kind, config.seed),
        (None, None) => bail!("{} is not a practice game; pass --adapter-bind", config.game_id),
    };

    let interface = ActionInterface::for_bounds(env.surface_bounds());
    let client: Box<dyn ModelClient> = if let Some(path) = &args.mock_transcript {
        Box::new(read_transcript(path)?)
    } else if args.oracle {
        let Some(kind) = practice else {
            bail!("--oracle only works with practice games");
        };
        Box::new(MockModel::new(oracle_transcript(kind, config.seed)))
    } else if let Some(endpoint) = &args.endpoint {
        Box::new(ChatCompletionsClient::new(endpoint.clone(), &args.credential_var)?)
    } else {
        bail!("choose a model: --endpoint, --mock-transcript or --oracle");
    };

    let prompt = match &args.prompt_dir {
        Some(dir) => load_prompt(dir, &config.game_id)
            .with_context(|| format!("no prompt for {} in {}", config.game_id, dir.display()))?,
        None => builtin_prompt(&config.game_id)
            .or_else(|| {
                builtin_prompt(match interface {
                    ActionInterface::Desktop => "desktop",
                    ActionInterface::Console => "console",
                })
            })
            .expect("generic prompts are built in"),
    };

    let mut agent_config = AgentConfig::new(interface);
    agent_config.settings =
        ModelSettings::new(args.model.clone()).with_extended_output(args.extended_output);
    let wall = Arc::new(SystemClock::new());
    let mut agent = Agent::new(agent_config, prompt, client, wall.clone());

    if let Some(dir) = &args.frames_dir {
        fs::create_dir_all(dir)?;
    }
    let log = match &args.log {
        Some(path) => Some(LogWriter::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ))),
        None => None,
    };
    let mut sink = CliSink {
        log,
        frames_dir: args.frames_dir.clone(),
    };
    let (record, _env) = run_with(&config, &pack, env, &mut agent, wall, &mut sink)?;
    if let Some(mut w) = sink.log.take().map(LogWriter::into_inner) {
        w.flush()?;
    }
    print_summary(&record);
    Ok(if record.termination().is_failure() { 1 } else { 0 })
}

fn print_summary(record: &RunRecord) {
    let f = &record.footer;
    println!("termination: {} ({})", f.termination, f.detail);
    println!("turns: {}", f.turns);
    println!("game time: {} ms", f.game_time_ms);
    match f.furthest_checkpoint {
        Some(i) => println!("furthest checkpoint: {i}"),
        None => println!("furthest checkpoint: none"),
    }
    println!("progress: {:.6}", f.progress);
    println!(
        "tokens: {} prompt, {} completion, cost {:.4}",
        f.usage.prompt_tokens, f.usage.completion_tokens, f.cost
    );
}

pub fn replay(log: &Path) -> Result<i32> {
    let record = read_record(log)?;
    let game = &record.header.config.game_id;
    let kind: PracticeKind = game
        .parse()
        .map_err(|_| anyhow::anyhow!("replay needs a practice game, log is for {game:?}"))?;
    let report = replay_log(&record, new_game(kind, record.header.config.seed))?;
    println!("observations checked: {}", report.observations_checked);
    for m in &report.mismatches {
        println!("turn {}: expected {:?}, got {:?}", m.turn, m.expected, m.actual);
    }
    if report.is_faithful() {
        println!("replay matches");
        Ok(0)
    } else {
        println!("replay diverged");
        Ok(1)
    }
}

pub fn serve(
    bind: SocketAddr,
    allow_realtime_humans: bool,
    tick_ms: Option<u64>,
    adapter_timeout_ms: Option<u64>,
) -> Result<i32> {
    let mut config = GatewayConfig {
        allow_realtime_humans,
        ..Default::default()
    };
    if let Some(t) = tick_ms {
        config.tick_ms = t;
    }
    if let Some(t) = adapter_timeout_ms {
        config.adapter_timeout_ms = t;
    }
    let registry = Registry::with_practice_games();
    let games: Vec<&str> = registry.games().collect();
    let games = games.join(", ");
    let gateway = Gateway::bind(bind, registry, config)?;
    eprintln!("serving {games} on ws://{}", gateway.local_addr());
    gateway.serve()?;
    Ok(0)
}
