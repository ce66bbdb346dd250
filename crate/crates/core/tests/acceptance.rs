//! One check per acceptance criterion. Runs without the libtest harness so
//! the PASS/FAIL lines always reach the terminal.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use arcade_core::action::{
    parse_command_line, parse_dos_action, parse_gameboy_actions, ActionCommand, Button,
    DefaultTimings, Key, KeyChord, ParseContext,
};
use arcade_core::agent::{ActionInterface, Agent, AgentConfig, MockModel};
use arcade_core::checkpoint::{
    build_pack_from_frames, overall_score, progress_score, Checkpoint, CheckpointPack,
    ManifestEntry, PackManifest, ProgressState, DEFAULT_THRESHOLD,
};
use arcade_core::env::{ClockMode, Environment, ObservationPolicy, VirtualClock, WallClock};
use arcade_core::gateway::{AdapterListener, LoopbackAdapter};
use arcade_core::parse_action_text;
use arcade_core::phash::{average_hash, difference_hash};
use arcade_core::practice::{new_game, play_oracle, reference_pack, PracticeKind, STAGES};
use arcade_core::run::{run, write_log, RunConfig, RunRecord, TerminationReason};
use arcade_core::testkit::{desktop_reply, mix, oracle_transcript, pattern_frame, ScreenMode, ScriptedScreen};
use arcade_core::{hash_frame, Frame, HashAlgorithm, PerceptualHash};

mod common;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { name: "scoring oracle", limit: Duration::from_secs(1), check: scoring },
        Criterion { name: "checkpoint matching", limit: Duration::from_secs(10), check: matching },
        Criterion { name: "hash golden values", limit: Duration::from_secs(1), check: golden },
        Criterion { name: "action parser", limit: Duration::from_secs(10), check: parser },
        Criterion { name: "lite determinism", limit: Duration::from_secs(10), check: determinism },
        Criterion { name: "termination rules", limit: Duration::from_secs(30), check: termination },
        Criterion { name: "realtime latency", limit: Duration::from_secs(5), check: latency },
        Criterion { name: "oracle playthroughs", limit: Duration::from_secs(10), check: oracles },
        Criterion { name: "loopback adapter equivalence", limit: Duration::from_secs(10), check: loopback },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > c.limit => Err(format!("{d}; took {took:.2?}, limit {:?}", c.limit)),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {}: {detail} ({took:.2?})", c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}: {detail} ({took:.2?})", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn deterministic_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Ten games; the first reaches a checkpoint 4.8% of the way through its
/// walkthrough, the rest reach nothing.
fn scoring() -> Outcome {
    let length = 3_600_000;
    let mut per_game = Vec::new();
    for game in 0..10u64 {
        let frames: Vec<Frame> = (0..4).map(|i| pattern_frame(mix(game * 10 + i), 0)).collect();
        let stamps = [length * 48 / 1000, length / 4, length / 2, length];
        let manifest = PackManifest {
            game_id: format!("game{game}"),
            walkthrough_length_ms: length,
            algorithm: HashAlgorithm::Difference,
            default_threshold: DEFAULT_THRESHOLD,
            checkpoints: stamps
                .iter()
                .enumerate()
                .map(|(i, &t)| ManifestEntry {
                    image: format!("{i}.png").into(),
                    timestamp_ms: t,
                    threshold: None,
                    label: format!("cp{i}"),
                })
                .collect(),
        };
        let pack = build_pack_from_frames(&manifest, &frames).map_err(|e| e.to_string())?;
        let mut state = ProgressState::new();
        if game == 0 {
            state.match_frame(&pack, &frames[0], 1).map_err(|e| e.to_string())?;
        }
        // every game also sees a screen from nowhere in its walkthrough
        state
            .match_frame(&pack, &pattern_frame(mix(999_000 + game), 0), 2)
            .map_err(|e| e.to_string())?;
        per_game.push(progress_score(&state, &pack));
    }
    ensure!((per_game[0] - 0.048).abs() <= 1e-12, "first game scored {}", per_game[0]);
    ensure!(per_game[1..].iter().all(|&s| s == 0.0), "others scored {:?}", &per_game[1..]);
    let overall = overall_score(&per_game).map_err(|e| e.to_string())?;
    ensure!((overall - 0.0048).abs() <= 1e-12, "overall {overall}");
    Ok(format!("overall {overall}"))
}

fn noise(seed: u64, w: u32, h: u32) -> Frame {
    let mut s = seed;
    Frame::from_fn(w, h, |_, _| {
        s = mix(s);
        let b = s.to_le_bytes();
        [b[0], b[1], b[2]]
    })
}

fn matching() -> Outcome {
    // structured checkpoints: every stage screen of every practice game
    let mut sources = Vec::new();
    for kind in PracticeKind::ALL {
        let mut game = new_game(kind, 0);
        sources.push(game.snapshot());
        while game.status() == arcade_core::EnvStatus::Running {
            for c in game.oracle_plan() {
                game.apply(&c).map_err(|e| e.to_string())?;
            }
            sources.push(game.snapshot());
        }
    }
    let manifest = PackManifest {
        game_id: "screens".into(),
        walkthrough_length_ms: sources.len() as u64,
        algorithm: HashAlgorithm::Difference,
        default_threshold: DEFAULT_THRESHOLD,
        checkpoints: (0..sources.len())
            .map(|i| ManifestEntry {
                image: format!("{i}.png").into(),
                timestamp_ms: i as u64 + 1,
                threshold: None,
                label: format!("screen {i}"),
            })
            .collect(),
    };
    let pack = build_pack_from_frames(&manifest, &sources).map_err(|e| e.to_string())?;
    ensure!(pack.checkpoints().iter().all(|c| c.threshold == 12), "threshold not 12");

    let probe = sources.len() / 2;
    let h = hash_frame(&sources[probe], HashAlgorithm::Difference).map_err(|e| e.to_string())?;
    let d = h.distance(&pack.checkpoints()[probe].hash).map_err(|e| e.to_string())?;
    ensure!(d == 0, "source frame at distance {d}");

    let (mut false_matches, mut total, mut pairs) = (0, 0u64, 0u64);
    for seed in 0..1000 {
        let frame = noise(seed, 160, 144);
        let mut state = ProgressState::new();
        false_matches += state.match_frame(&pack, &frame, seed).map_err(|e| e.to_string())?.len();
        let h = hash_frame(&frame, HashAlgorithm::Difference).map_err(|e| e.to_string())?;
        for cp in pack.checkpoints() {
            total += h.distance(&cp.hash).map_err(|e| e.to_string())? as u64;
            pairs += 1;
        }
    }
    let mean = total as f64 / pairs as f64;
    ensure!(false_matches == 0, "{false_matches} false matches");
    ensure!((24.0..=40.0).contains(&mean), "mean distance {mean:.2}");
    Ok(format!(
        "{} checkpoints, 0 false matches in 1000 noise frames, mean distance {mean:.2}",
        pack.checkpoints().len()
    ))
}

const GOLDEN: &[(&str, &[u8], u64, u64)] = &[
    ("pattern16", include_bytes!("data/pattern16.ppm"), 0x04325968e0f3f4f4, 0xcce493a9c8a7d9a5),
    ("pattern_odd", include_bytes!("data/pattern_odd.ppm"), 0x02fa3a42b23b76b5, 0xca4672ee6672c469),
    ("gradient", include_bytes!("data/gradient.ppm"), 0x0303070f0f1f3f3f, 0xffffffffffffffff),
];

fn golden() -> Outcome {
    for &(name, ppm, a, d) in GOLDEN {
        let frame = Frame::from_ppm(ppm).map_err(|e| e.to_string())?;
        let got_a = average_hash(&frame).map_err(|e| e.to_string())?.bits();
        let got_d = difference_hash(&frame).map_err(|e| e.to_string())?.bits();
        ensure!(got_a == a, "{name} ahash {got_a:016x} != {a:016x}");
        ensure!(got_d == d, "{name} dhash {got_d:016x} != {d:016x}");
    }
    Ok(format!("{} patterns bit-exact", GOLDEN.len()))
}

fn parser() -> Outcome {
    let ctx = ParseContext::desktop();
    let key = |n| Key::parse(n).unwrap();
    let one = |keys: Vec<Key>| ActionCommand::KeySequence(vec![KeyChord::new(keys, 100).unwrap()]);
    let examples: Vec<(&str, ActionCommand)> = vec![
        ("press_key ArrowLeft", one(vec![key("ArrowLeft")])),
        ("press_key Control+KeyC", one(vec![key("Control"), key("KeyC")])),
        (
            "hold_key A,1.5",
            ActionCommand::HoldKey {
                key: key("KeyA"),
                duration_ms: 1500,
            },
        ),
    ];
    for (text, want) in &examples {
        let got = parse_command_line(text, &ctx).map_err(|e| format!("{text}: {e}"))?;
        ensure!(&got == want, "{text} parsed to {got:?}");
    }
    ensure!(
        parse_dos_action("press_key", "ArrowLeft,Control")
            == Ok(ActionCommand::KeySequence(vec![
                KeyChord::new(vec![key("ArrowLeft")], 100).unwrap(),
                KeyChord::new(vec![key("Control")], 100).unwrap(),
            ])),
        "ArrowLeft,Control"
    );
    let block = "```actions\n[\"A\", (\"B\",\"UP\"), \"RIGHT\"]\n```";
    let chords: Vec<Vec<Button>> = parse_gameboy_actions(block, &DefaultTimings::default())
        .map_err(|e| e.to_string())?
        .chords
        .iter()
        .map(|c| c.buttons().to_vec())
        .collect();
    ensure!(
        chords == vec![vec![Button::A], vec![Button::B, Button::Up], vec![Button::Right]],
        "console tuple parsed to {chords:?}"
    );

    let mut runner = deterministic_runner(1000);
    let round_trips = std::cell::Cell::new(0);
    runner
        .run(&common::command(), |c| {
            round_trips.set(round_trips.get() + 1);
            let text = c.to_string();
            proptest::prop_assert_eq!(parse_command_line(&text, &ctx), Ok(c), "{}", text);
            Ok(())
        })
        .map_err(|e| format!("round trip: {e}"))?;

    let mut runner = deterministic_runner(10_000);
    let fuzzed = std::cell::Cell::new(0);
    runner
        .run(&common::fuzz_input(), |s| {
            fuzzed.set(fuzzed.get() + 1);
            let _ = parse_action_text(&s, &ctx);
            let _ = parse_command_line(&s, &ctx);
            Ok(())
        })
        .map_err(|e| format!("fuzz: {e}"))?;
    let (round_trips, fuzzed) = (round_trips.get(), fuzzed.get());
    ensure!(round_trips >= 1000 && fuzzed >= 10_000, "ran {round_trips} / {fuzzed} cases");
    Ok(format!(
        "{} examples, {round_trips} round trips, {fuzzed} fuzz inputs",
        examples.len() + 2
    ))
}

fn desktop_agent(model: MockModel, clock: Arc<dyn WallClock>) -> Agent {
    let mut config = AgentConfig::new(ActionInterface::Desktop);
    config.retry_backoff_ms = 10;
    Agent::new(config, "play", Box::new(model), clock)
}

fn practice_run(kind: PracticeKind, seed: u64, env: Box<dyn Environment>) -> Result<RunRecord, String> {
    let clock = VirtualClock::shared();
    let model = MockModel::new(oracle_transcript(kind, seed));
    let mut agent = desktop_agent(model, clock.clone());
    let mut config = RunConfig::new(kind.game_id(), ClockMode::Lite);
    config.seed = seed;
    run(&config, &reference_pack(kind, seed), env, &mut agent, clock).map_err(|e| e.to_string())
}

fn log_bytes(record: &RunRecord) -> Vec<u8> {
    let mut out = Vec::new();
    write_log(&record.without_wall_clock(), &mut out).expect("writing to memory");
    out
}

fn determinism() -> Outcome {
    let kind = PracticeKind::Navigation;
    let a = practice_run(kind, 11, new_game(kind, 11))?;
    let b = practice_run(kind, 11, new_game(kind, 11))?;
    ensure!(a.termination() == TerminationReason::Completed, "run ended {}", a.termination());
    let (la, lb) = (log_bytes(&a), log_bytes(&b));
    ensure!(la == lb, "logs differ");
    Ok(format!("{} turns, {} identical log bytes", a.turns.len(), la.len()))
}

fn press(key: Key) -> ActionCommand {
    ActionCommand::KeySequence(vec![KeyChord::new(vec![key], 100).unwrap()])
}

fn unreachable_pack(walkthrough_ms: u64) -> CheckpointPack {
    let cp = Checkpoint {
        index: 0,
        hash: PerceptualHash::new(0, HashAlgorithm::Difference),
        timestamp_ms: walkthrough_ms,
        threshold: 1,
        label: "end".into(),
        crop: None,
    };
    CheckpointPack::new("scripted", HashAlgorithm::Difference, walkthrough_ms, 12, vec![cp])
        .expect("valid pack")
}

fn scripted_run(
    config: &RunConfig,
    walkthrough_ms: u64,
    mode: ScreenMode,
    model: MockModel,
) -> Result<RunRecord, String> {
    let clock = VirtualClock::shared();
    let mut agent = desktop_agent(model, clock.clone());
    let pack = unreachable_pack(walkthrough_ms);
    run(config, &pack, Box::new(ScriptedScreen::new(mode)), &mut agent, clock).map_err(|e| e.to_string())
}

fn idle() -> MockModel {
    MockModel::always(desktop_reply("waiting", &press(Key::SPACE)).as_str())
}

fn scripted_config() -> RunConfig {
    let mut c = RunConfig::new("scripted", ClockMode::Lite);
    c.observation = ObservationPolicy::LATEST;
    c
}

fn termination() -> Outcome {
    // frozen screen: the 101st identical observation ends the run before
    // a 101st turn is taken
    let rec = scripted_run(&scripted_config(), 1_000_000, ScreenMode::Static, idle())?;
    ensure!(
        rec.termination() == TerminationReason::Stuck && rec.turns.len() == 100,
        "stuck: {} after {} turns",
        rec.termination(),
        rec.turns.len()
    );
    ensure!(rec.footer.detail.starts_with("101 identical"), "stuck detail {}", rec.footer.detail);

    let rec = scripted_run(&scripted_config(), 1_000_000, ScreenMode::Changing, idle())?;
    ensure!(
        rec.termination() == TerminationReason::NoProgress && rec.turns.len() == 2000,
        "no progress: {} after {} turns",
        rec.termination(),
        rec.turns.len()
    );

    // one hold of exactly the cap is allowed; a millisecond more is not
    for (held, want) in [(20_000, TerminationReason::Stuck), (20_001, TerminationReason::TimeCap)] {
        let mut config = scripted_config();
        config.stuck_step_limit = 1;
        let hold = ActionCommand::HoldKey {
            key: Key::SPACE,
            duration_ms: held,
        };
        let model = MockModel::new([desktop_reply("hold", &hold)])
            .then_forever(desktop_reply("idle", &press(Key::SPACE)).as_str());
        let rec = scripted_run(&config, 1000, ScreenMode::Static, model)?;
        ensure!(rec.termination() == want, "hold {held}: {}", rec.termination());
    }

    // step cap derived from a 1 080 150 ms walkthrough at 20 steps per second
    let mut config = scripted_config();
    config.stuck_step_limit = 1_000_000;
    config.no_progress_step_limit = 1_000_000;
    let pack = unreachable_pack(1_080_150);
    let cap = config.limits(&pack).max_lite_steps;
    ensure!(cap == Some(21_603), "derived cap {cap:?}");
    let rec = scripted_run(&config, 1_080_150, ScreenMode::Changing, idle())?;
    ensure!(
        rec.termination() == TerminationReason::StepCap && rec.turns.len() == 21_603,
        "step cap: {} after {} turns",
        rec.termination(),
        rec.turns.len()
    );
    Ok("stuck at 101, no progress at 2000, time cap at 20001 ms, step cap at 21603".into())
}

fn latency() -> Outcome {
    let clock = VirtualClock::shared();
    let wall: Arc<dyn WallClock> = clock.clone();
    let reply = desktop_reply("slow", &press(Key::SPACE));
    let model = MockModel::always(reply.as_str()).with_latency(Arc::clone(&wall), 3000);
    let mut agent = desktop_agent(model, Arc::clone(&wall));
    let mut config = scripted_config();
    config.mode = ClockMode::Realtime;
    config.max_game_time_ms = Some(30_000);
    let rec = run(
        &config,
        &unreachable_pack(1_000_000),
        Box::new(ScriptedScreen::new(ScreenMode::Changing)),
        &mut agent,
        wall,
    )
    .map_err(|e| e.to_string())?;
    ensure!(!rec.turns.is_empty(), "no turns");
    let ticks: Vec<u64> = rec.turns.iter().map(|t| t.think_game_ms / config.tick_ms).collect();
    ensure!(ticks.iter().all(|t| (59..=61).contains(t)), "realtime ticks {ticks:?}");

    let model = MockModel::always(reply.as_str()).with_latency(clock.clone(), 3000);
    let mut config = scripted_config();
    config.max_lite_steps = Some(5);
    let rec = scripted_run(&config, 1_000_000, ScreenMode::Changing, model)?;
    ensure!(rec.turns.iter().all(|t| t.think_game_ms == 0), "lite game moved while thinking");
    let (lo, hi) = (ticks.iter().min().unwrap(), ticks.iter().max().unwrap());
    Ok(format!("realtime {lo}..={hi} ticks over {} turns, lite 0", ticks.len()))
}

fn oracles() -> Outcome {
    let mut parts = Vec::new();
    for (kind, budget) in [
        (PracticeKind::Clicking, 20),
        (PracticeKind::Navigation, 250),
        (PracticeKind::Dragging, 250),
    ] {
        for seed in [0, 1, 2] {
            let mut game = new_game(kind, seed);
            let used = play_oracle(game.as_mut());
            ensure!(game.score() == STAGES, "{kind} seed {seed} finished {}", game.score());
            ensure!(used <= budget, "{kind} seed {seed} used {used} actions");
            if seed == 0 {
                parts.push(format!("{kind} {used}"));
            }
        }
    }
    Ok(format!("all stages done; actions {}", parts.join(", ")))
}

fn observed_hashes(record: &RunRecord) -> Vec<PerceptualHash> {
    record
        .turns
        .iter()
        .flat_map(|t| t.observation.iter().copied())
        .chain(record.footer.final_observation.iter().copied())
        .collect()
}

fn loopback() -> Outcome {
    let kind = PracticeKind::Clicking;
    let direct = practice_run(kind, 4, new_game(kind, 4))?;
    let listener = AdapterListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    let adapter = LoopbackAdapter::spawn(listener.local_addr(), "clicking", new_game(kind, 0));
    let bridge = listener.accept(ClockMode::Lite, 5000).map_err(|e| e.to_string())?;
    let bridged = practice_run(kind, 4, Box::new(bridge))?;
    adapter
        .join()
        .map_err(|_| "adapter thread panicked".to_string())?
        .map_err(|e| e.to_string())?;
    let (a, b) = (observed_hashes(&direct), observed_hashes(&bridged));
    ensure!(a == b, "hash sequences differ");
    ensure!(
        bridged.without_wall_clock() == direct.without_wall_clock(),
        "records differ beyond hashes"
    );
    ensure!(direct.progress() == 1.0, "oracle run reached {}", direct.progress());
    Ok(format!("{} frame hashes identical", a.len()))
}
