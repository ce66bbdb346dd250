use std::io::BufReader;
use std::sync::Arc;

use arcade_core::action::{ActionCommand, Key, KeyChord};
use arcade_core::agent::{ActionInterface, Agent, AgentConfig, MockModel, MockReply};
use arcade_core::checkpoint::{Checkpoint, CheckpointPack};
use arcade_core::env::{ClockMode, ObservationPolicy, VirtualClock, WallClock};
use arcade_core::phash::{HashAlgorithm, PerceptualHash};
use arcade_core::practice::{new_game, reference_pack, PracticeKind};
use arcade_core::run::{
    read_log, replay, run, run_with, write_log, LogError, LogWriter, RunConfig, RunRecord,
    TerminationReason,
};
use arcade_core::testkit::{desktop_reply, oracle_transcript, ScreenMode, ScriptedScreen};

fn press(key: Key) -> ActionCommand {
    ActionCommand::KeySequence(vec![KeyChord::new(vec![key], 100).unwrap()])
}

fn agent(model: MockModel, clock: Arc<dyn WallClock>) -> Agent {
    let mut config = AgentConfig::new(ActionInterface::Desktop);
    config.retry_backoff_ms = 10;
    Agent::new(config, "play", Box::new(model), clock)
}

fn noop_agent() -> Agent {
    let reply = desktop_reply("waiting", &press(Key::SPACE));
    agent(MockModel::always(reply.as_str()), VirtualClock::shared())
}

/// A pack nothing on a scripted screen will ever match.
fn unreachable_pack(walkthrough_ms: u64) -> CheckpointPack {
    let cp = Checkpoint {
        index: 0,
        hash: PerceptualHash::new(0, HashAlgorithm::Difference),
        timestamp_ms: walkthrough_ms,
        threshold: 1,
        label: "end".into(),
        crop: None,
    };
    CheckpointPack::new("scripted", HashAlgorithm::Difference, walkthrough_ms, 12, vec![cp]).unwrap()
}

fn scripted(mode: ClockMode) -> RunConfig {
    let mut c = RunConfig::new("scripted", mode);
    c.observation = ObservationPolicy::LATEST;
    c
}

fn run_scripted(config: &RunConfig, screen: ScriptedScreen, agent: &mut Agent) -> RunRecord {
    let pack = unreachable_pack(1_000_000);
    run(config, &pack, Box::new(screen), agent, VirtualClock::shared()).unwrap()
}

#[test]
fn stuck_fires_on_the_hundred_and_first_identical_frame() {
    let rec = run_scripted(
        &scripted(ClockMode::Lite),
        ScriptedScreen::new(ScreenMode::Static),
        &mut noop_agent(),
    );
    assert_eq!(rec.termination(), TerminationReason::Stuck);
    assert_eq!(rec.turns.len(), 100);
    assert!(rec.footer.detail.starts_with("101 identical"));
}

#[test]
fn no_progress_fires_after_two_thousand_turns() {
    let rec = run_scripted(
        &scripted(ClockMode::Lite),
        ScriptedScreen::new(ScreenMode::Changing),
        &mut noop_agent(),
    );
    assert_eq!(rec.termination(), TerminationReason::NoProgress);
    assert_eq!(rec.turns.len(), 2000);
}

#[test]
fn time_cap_is_exceeded_by_one_millisecond() {
    let pack = unreachable_pack(1000);
    let hold = |ms| ActionCommand::HoldKey {
        key: Key::SPACE,
        duration_ms: ms,
    };
    for (held, expected) in [(20_000, TerminationReason::Stuck), (20_001, TerminationReason::TimeCap)] {
        let mut config = scripted(ClockMode::Lite);
        config.stuck_step_limit = 1;
        let script = [desktop_reply("hold", &hold(held))];
        let model = MockModel::new(script.iter().map(String::as_str))
            .then_forever(desktop_reply("idle", &press(Key::SPACE)).as_str());
        let mut a = agent(model, VirtualClock::shared());
        let rec = run(
            &config,
            &pack,
            Box::new(ScriptedScreen::new(ScreenMode::Static)),
            &mut a,
            VirtualClock::shared(),
        )
        .unwrap();
        // Static screen: the second observation repeats the first, so the
        // stuck rule fires on it unless the time cap comes first.
        assert_eq!(rec.termination(), expected, "held {held}");
        assert_eq!(rec.turns.len(), 1);
    }
}

#[test]
fn locked_and_completed_states_end_the_run() {
    let mut screen = ScriptedScreen::new(ScreenMode::Changing);
    screen.lock_after = Some(3);
    let rec = run_scripted(&scripted(ClockMode::Lite), screen, &mut noop_agent());
    assert_eq!(rec.termination(), TerminationReason::LockedState);
    assert_eq!(rec.turns.len(), 3);

    let mut screen = ScriptedScreen::new(ScreenMode::Changing);
    screen.complete_after = Some(4);
    screen.lock_after = Some(4);
    let rec = run_scripted(&scripted(ClockMode::Lite), screen, &mut noop_agent());
    assert_eq!(rec.termination(), TerminationReason::Completed);
}

#[test]
fn repeated_loss_at_one_spot() {
    let mut screen = ScriptedScreen::new(ScreenMode::Static);
    screen.lose_on = Some(Key::SPACE);
    let rec = run_scripted(&scripted(ClockMode::Lite), screen, &mut noop_agent());
    assert_eq!(rec.termination(), TerminationReason::RepeatedLoss);
    assert_eq!(rec.turns.len(), 3);
}

#[test]
fn losses_at_different_spots_do_not_count_together() {
    let mut screen = ScriptedScreen::new(ScreenMode::Changing);
    screen.lose_on = Some(Key::SPACE);
    let mut config = scripted(ClockMode::Lite);
    config.no_progress_step_limit = 50;
    let rec = run_scripted(&config, screen, &mut noop_agent());
    assert_eq!(rec.termination(), TerminationReason::NoProgress);
}

#[test]
fn model_outage_ends_the_run() {
    let model = MockModel::new([MockReply::Text(desktop_reply("go", &press(Key::SPACE)))])
        .then_forever(MockReply::TransportError("connection refused".into()));
    let mut a = agent(model, VirtualClock::shared());
    let rec = run_scripted(
        &scripted(ClockMode::Lite),
        ScriptedScreen::new(ScreenMode::Changing),
        &mut a,
    );
    assert_eq!(rec.termination(), TerminationReason::ModelUnavailable);
    assert_eq!(rec.turns.len(), 1);
    assert_eq!(rec.footer.final_observation.len(), 1);
}

#[test]
fn garbage_replies_become_noop_turns() {
    let mut a = agent(MockModel::always("no json here"), VirtualClock::shared());
    let mut config = scripted(ClockMode::Lite);
    config.stuck_step_limit = 5;
    let rec = run_scripted(&config, ScriptedScreen::new(ScreenMode::Static), &mut a);
    assert_eq!(rec.termination(), TerminationReason::Stuck);
    for t in &rec.turns {
        assert!(t.agent.is_noop());
        assert_eq!(t.agent.attempts, 3);
    }
}

#[test]
fn step_cap_counts_lite_steps() {
    let mut config = scripted(ClockMode::Lite);
    config.max_lite_steps = Some(40);
    config.stuck_step_limit = 1000;
    let rec = run_scripted(&config, ScriptedScreen::new(ScreenMode::Changing), &mut noop_agent());
    assert_eq!(rec.termination(), TerminationReason::StepCap);
    assert_eq!(rec.turns.len(), 40);
}

fn navigation_run(seed: u64) -> RunRecord {
    let kind = PracticeKind::Navigation;
    let pack = reference_pack(kind, 0);
    let model = MockModel::new(oracle_transcript(kind, 0));
    let mut a = agent(model, VirtualClock::shared());
    let mut config = RunConfig::new(kind.game_id(), ClockMode::Lite);
    config.seed = seed;
    run(&config, &pack, Box::new(new_game(kind, seed)), &mut a, VirtualClock::shared()).unwrap()
}

#[test]
fn oracle_transcript_completes_navigation() {
    let rec = navigation_run(0);
    assert_eq!(rec.termination(), TerminationReason::Completed);
    assert_eq!(rec.progress(), 1.0);
    assert_eq!(rec.footer.furthest_checkpoint, Some(9));
}

#[test]
fn lite_runs_are_deterministic() {
    let bytes = |r: &RunRecord| {
        let mut out = Vec::new();
        write_log(&r.without_wall_clock(), &mut out).unwrap();
        out
    };
    assert_eq!(bytes(&navigation_run(3)), bytes(&navigation_run(3)));
}

#[test]
fn log_round_trips_and_streams_the_same_bytes() {
    let kind = PracticeKind::Clicking;
    let pack = reference_pack(kind, 5);
    let model = MockModel::new(oracle_transcript(kind, 5));
    let mut a = agent(model, VirtualClock::shared());
    let mut config = RunConfig::new(kind.game_id(), ClockMode::Lite);
    config.seed = 5;
    let mut sink = LogWriter::new(Vec::new());
    let (rec, env) = run_with(
        &config,
        &pack,
        Box::new(new_game(kind, 5)),
        &mut a,
        VirtualClock::shared(),
        &mut sink,
    )
    .unwrap();
    assert!(env.is_some());
    assert_eq!(rec.termination(), TerminationReason::Completed);
    let streamed = sink.into_inner();
    let mut written = Vec::new();
    write_log(&rec, &mut written).unwrap();
    assert_eq!(streamed, written);
    let back = read_log(BufReader::new(&written[..])).unwrap();
    assert_eq!(back, rec);
    // every tracker event made it into the log
    assert_eq!(back.footer.checkpoint_events.len(), rec.footer.checkpoint_events.len());
    assert!(!back.footer.checkpoint_events.is_empty());
}

#[test]
fn truncated_log_is_corrupt() {
    let rec = navigation_run(0);
    let mut out = Vec::new();
    write_log(&rec, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines[..lines.len() - 1].join("\n");
    assert!(matches!(
        read_log(BufReader::new(cut.as_bytes())),
        Err(LogError::CorruptLog { .. })
    ));
    let mut swapped = lines.clone();
    swapped.swap(1, 2);
    assert!(read_log(BufReader::new(swapped.join("\n").as_bytes())).is_err());
    assert!(read_log(BufReader::new("{not json".as_bytes())).is_err());
}

#[test]
fn replay_reproduces_observations() {
    let rec = navigation_run(0);
    let report = replay(&rec, Box::new(new_game(PracticeKind::Navigation, 0))).unwrap();
    assert!(report.is_faithful(), "{:?}", report.mismatches);
    assert_eq!(report.observations_checked, rec.turns.len() as u64 + 1);

    // a different game diverges at once
    let report = replay(&rec, Box::new(new_game(PracticeKind::Clicking, 0))).unwrap();
    assert_eq!(report.mismatches[0].turn, 1);
}

#[test]
fn realtime_game_keeps_running_while_the_model_thinks() {
    let clock = VirtualClock::shared();
    let wall: Arc<dyn WallClock> = clock.clone();
    let reply = desktop_reply("slow", &press(Key::SPACE));
    let model = MockModel::always(reply.as_str()).with_latency(Arc::clone(&wall), 3000);
    let mut a = agent(model, Arc::clone(&wall));
    let mut config = scripted(ClockMode::Realtime);
    config.max_game_time_ms = Some(30_000);
    let pack = unreachable_pack(1_000_000);
    let rec = run(
        &config,
        &pack,
        Box::new(ScriptedScreen::new(ScreenMode::Changing)),
        &mut a,
        wall,
    )
    .unwrap();
    assert_eq!(rec.termination(), TerminationReason::TimeCap);
    for t in &rec.turns {
        let ticks = t.think_game_ms / config.tick_ms;
        assert!((59..=61).contains(&ticks), "turn {} saw {ticks} ticks", t.index);
    }
}

#[test]
fn lite_game_is_frozen_while_the_model_thinks() {
    let clock = VirtualClock::shared();
    let wall: Arc<dyn WallClock> = clock.clone();
    let reply = desktop_reply("slow", &press(Key::SPACE));
    let model = MockModel::always(reply.as_str()).with_latency(Arc::clone(&wall), 3000);
    let mut a = agent(model, Arc::clone(&wall));
    let mut config = scripted(ClockMode::Lite);
    config.max_lite_steps = Some(5);
    let rec = run_scripted(&config, ScriptedScreen::new(ScreenMode::Changing), &mut a);
    assert_eq!(rec.turns.len(), 5);
    assert!(rec.turns.iter().all(|t| t.think_game_ms == 0));
    assert_eq!(rec.footer.game_time_ms, 5 * 100);
}

#[test]
fn pack_for_another_game_is_refused() {
    let config = RunConfig::new("other", ClockMode::Lite);
    let pack = unreachable_pack(1000);
    let err = run(
        &config,
        &pack,
        Box::new(ScriptedScreen::new(ScreenMode::Static)),
        &mut noop_agent(),
        VirtualClock::shared(),
    );
    assert!(err.is_err());
}
