use std::sync::Arc;

use arcade_core::action::{ActionCommand, Button, ButtonChord, Key, KeyChord};
use arcade_core::agent::{
    ActionInterface, Agent, AgentConfig, AgentError, ContextWindow, HistoryEntry, MockModel,
    MockReply, Role, Scratchpad, MEMORY_HEADER,
};
use arcade_core::env::{VirtualClock, WallClock};
use arcade_core::frame::{Frame, SurfaceBounds};
use arcade_core::testkit::desktop_reply;
use proptest::prelude::*;

fn frame(v: u8) -> Frame {
    Frame::filled(64, 40, [v, v, v])
}

fn desktop(model: MockModel, clock: Arc<VirtualClock>) -> Agent {
    let clock: Arc<dyn WallClock> = clock;
    Agent::new(AgentConfig::new(ActionInterface::Desktop), "sys", Box::new(model), clock)
}

fn right() -> ActionCommand {
    ActionCommand::KeySequence(vec![KeyChord::new(vec![Key::ARROW_RIGHT], 100).unwrap()])
}

#[test]
fn two_bad_replies_then_a_good_one_take_three_attempts() {
    let good = desktop_reply("go right", &right());
    let model = MockModel::new(["garbage", "{\"thought\": \"x\"}", good.as_str()]);
    let clock = VirtualClock::shared();
    let mut a = desktop(model, Arc::clone(&clock));
    let out = a.step(&[frame(1)], SurfaceBounds::DESKTOP).unwrap();
    assert_eq!(out.attempts, 3);
    assert_eq!(out.errors.len(), 2);
    assert_eq!(out.turn.parsed, vec![right()]);
    // parse failures retry at once, without backoff
    assert_eq!(clock.now_ms(), 0);
}

#[test]
fn three_bad_replies_make_a_noop() {
    let mut a = desktop(MockModel::always("nope"), VirtualClock::shared());
    let out = a.step(&[frame(1)], SurfaceBounds::DESKTOP).unwrap();
    assert!(out.is_noop());
    assert_eq!(out.attempts, 3);
    assert!(a.window().is_empty());
}

#[test]
fn transport_failures_back_off_then_give_up() {
    let clock = VirtualClock::shared();
    let model = MockModel::always(MockReply::TransportError("down".into()));
    let mut a = desktop(model, Arc::clone(&clock));
    let err = a.step(&[frame(1)], SurfaceBounds::DESKTOP).unwrap_err();
    let AgentError::ModelUnavailable { attempts, .. } = err;
    assert_eq!(attempts, 3);
    assert_eq!(clock.now_ms(), 2 * a.config().retry_backoff_ms);
}

#[test]
fn transport_failure_then_success_recovers() {
    let good = desktop_reply("ok", &right());
    let model = MockModel::new([MockReply::TransportError("blip".into()), MockReply::Text(good)]);
    let mut a = desktop(model, VirtualClock::shared());
    let out = a.step(&[frame(1)], SurfaceBounds::DESKTOP).unwrap();
    assert_eq!(out.attempts, 2);
    assert!(!out.is_noop());
}

#[test]
fn context_window_holds_the_last_twenty_turns() {
    let model = MockModel::always(desktop_reply("step", &right()).as_str()).recording();
    let log = model.call_log();
    let mut a = desktop(model, VirtualClock::shared());
    for i in 0..25u8 {
        a.step(&[frame(i)], SurfaceBounds::DESKTOP).unwrap();
    }
    assert_eq!(a.window().len(), 20);
    let oldest = a.window().entries().next().unwrap();
    assert!(oldest.frame.same_pixels(&frame(5)));
    let calls = log.lock().unwrap();
    let last = calls.last().unwrap();
    // system, 20 past (user, assistant) pairs, then the current frame
    assert_eq!(last.len(), 1 + 2 * 20 + 1);
    assert_eq!(last[0].role, Role::System);
    let images: usize = last.iter().map(|m| m.image_count()).sum();
    assert_eq!(images, 21);
}

#[test]
fn memory_is_sent_with_the_current_frame() {
    let reply = serde_json::json!({
        "thought": "t", "action": "press_key", "action_input": "ArrowRight",
        "memory": "door is locked",
    })
    .to_string();
    let model = MockModel::always(reply.as_str()).recording();
    let log = model.call_log();
    let mut a = desktop(model, VirtualClock::shared());
    a.step(&[frame(1)], SurfaceBounds::DESKTOP).unwrap();
    a.step(&[frame(2)], SurfaceBounds::DESKTOP).unwrap();
    assert_eq!(a.memory().text(), "door is locked");
    let calls = log.lock().unwrap();
    let text = calls[1].last().unwrap().joined_text();
    assert!(text.contains(MEMORY_HEADER) && text.contains("door is locked"));
}

#[test]
fn requests_are_deterministic() {
    let build = || {
        let model = MockModel::always(desktop_reply("s", &right()).as_str());
        let mut a = desktop(model, VirtualClock::shared());
        for i in 0..4 {
            a.step(&[frame(i)], SurfaceBounds::DESKTOP).unwrap();
        }
        a.messages_for(&[frame(9)])
    };
    assert_eq!(build(), build());
}

#[test]
fn console_agent_reads_button_blocks() {
    let model = MockModel::always("Jump over the gap.\n```actions\n[\"A\", (\"RIGHT\", \"B\")]\n```");
    let clock: Arc<dyn WallClock> = VirtualClock::shared();
    let mut a = Agent::new(AgentConfig::new(ActionInterface::Console), "sys", Box::new(model), clock);
    let out = a.step(&[frame(1)], SurfaceBounds::CONSOLE).unwrap();
    let expected = ActionCommand::ButtonSequence(vec![
        ButtonChord::new(vec![Button::A], 500).unwrap(),
        ButtonChord::new(vec![Button::Right, Button::B], 500).unwrap(),
    ]);
    assert_eq!(out.turn.parsed, vec![expected]);
}

proptest! {
    #[test]
    fn last_nonempty_memory_update_wins(updates in proptest::collection::vec("[ a-z]{0,6}", 0..20)) {
        let mut pad = Scratchpad::new();
        for u in &updates {
            pad.apply_update(u);
        }
        let expected = updates.iter().rev().find(|u| !u.trim().is_empty()).cloned().unwrap_or_default();
        prop_assert_eq!(pad.text(), expected.as_str());
    }

    #[test]
    fn window_is_fifo(cap in 1usize..30, n in 0usize..80) {
        let mut w = ContextWindow::new(cap);
        for i in 0..n {
            let evicted = w.push(HistoryEntry {
                frame: frame(0),
                thought: i.to_string(),
                action: String::new(),
            });
            prop_assert_eq!(evicted.map(|e| e.thought), (i >= cap).then(|| (i - cap).to_string()));
        }
        let kept: Vec<String> = w.entries().map(|e| e.thought.clone()).collect();
        let want: Vec<String> = (n.saturating_sub(cap)..n).map(|i| i.to_string()).collect();
        prop_assert_eq!(kept, want);
    }
}

mod http {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread::JoinHandle;

    use arcade_core::agent::{
        ChatCompletionsClient, Message, ModelClient, ModelError, ModelSettings, Part, Role,
    };
    use arcade_core::frame::Frame;
    use serde_json::Value;

    /// Serves one request with `status` and `body`; yields the request's
    /// headers and JSON body.
    fn stub(status: u16, body: &'static str) -> (String, JoinHandle<(String, Value)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut headers = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                headers.push_str(&line.to_ascii_lowercase());
            }
            let len: usize = headers
                .lines()
                .find_map(|l| l.strip_prefix("content-length:"))
                .map(|v| v.trim().parse().unwrap())
                .unwrap();
            let mut request = vec![0; len];
            reader.read_exact(&mut request).unwrap();
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            reader.get_mut().write_all(reply.as_bytes()).unwrap();
            (headers, serde_json::from_slice(&request).unwrap())
        });
        (url, handle)
    }

    fn messages() -> Vec<Message> {
        vec![
            Message::text(Role::System, "sys"),
            Message {
                role: Role::User,
                parts: vec![Part::Image(Frame::filled(8, 8, [1, 2, 3])), Part::Text("go".into())],
            },
        ]
    }

    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"press_key Space"}}],
        "usage":{"prompt_tokens":321,"completion_tokens":7}}"#;

    #[test]
    fn posts_images_as_data_urls_and_reads_usage() {
        std::env::set_var("ARCADE_HTTP_TEST_KEY", "sekret");
        let (url, server) = stub(200, OK);
        let mut client = ChatCompletionsClient::new(url, "ARCADE_HTTP_TEST_KEY").unwrap();
        let reply = client.complete(&messages(), &ModelSettings::new("m1")).unwrap();
        assert_eq!(reply.text, "press_key Space");
        assert_eq!((reply.usage.prompt_tokens, reply.usage.completion_tokens), (321, 7));

        let (headers, body) = server.join().unwrap();
        assert!(headers.contains("authorization: bearer sekret"));
        assert_eq!(body["model"], "m1");
        assert_eq!(body["messages"][0]["content"], "sys");
        let url = body["messages"][1]["content"][0]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));

        // the logged exchange never carries image bytes
        let logged = reply.exchange.unwrap().to_string();
        assert!(!logged.contains("base64,"));
        assert!(!logged.contains("sekret"));
    }

    #[test]
    fn server_errors_are_retryable_and_client_errors_are_not() {
        let (url, server) = stub(503, "{}");
        let mut client = ChatCompletionsClient::new(url, "ARCADE_HTTP_UNSET_VAR").unwrap();
        let err = client.complete(&messages(), &ModelSettings::new("m")).unwrap_err();
        assert!(matches!(err, ModelError::Transport(_)), "{err:?}");
        let (headers, _) = server.join().unwrap();
        assert!(!headers.contains("authorization"));

        let (url, server) = stub(400, r#"{"error":"bad"}"#);
        let mut client = ChatCompletionsClient::new(url, "ARCADE_HTTP_UNSET_VAR").unwrap();
        let err = client.complete(&messages(), &ModelSettings::new("m")).unwrap_err();
        assert!(matches!(err, ModelError::Status { status: 400, .. }), "{err:?}");
        server.join().unwrap();
    }

    #[test]
    fn nothing_listening_is_a_transport_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let mut client =
            ChatCompletionsClient::new(format!("http://127.0.0.1:{port}/"), "ARCADE_HTTP_UNSET_VAR").unwrap();
        let err = client.complete(&messages(), &ModelSettings::new("m")).unwrap_err();
        assert!(matches!(err, ModelError::Transport(_)));
    }

    #[test]
    fn https_endpoints_are_supported() {
        // building a client for an https URL must not need a system TLS stack
        let client = ChatCompletionsClient::new("https://example.invalid/v1/chat/completions", "X");
        assert!(client.is_ok());
    }
}
