use std::collections::{BTreeMap, HashMap, VecDeque};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, Weak};
use std::thread::JoinHandle;
use std::time::Duration;

use super::adapter::{check_version, AdapterBridge, DEFAULT_ADAPTER_TIMEOUT_MS};
use super::protocol::{
    Ack, ActionMessage, Channel, ErrorCode, FrameMessage, Hello, Message, Role, Score,
};
use super::GatewayError;
use crate::action::{parse_action_text, DefaultTimings, ParseContext};
use crate::checkpoint::{progress_score, CheckpointPack, ProgressState};
use crate::env::{
    execute, observe, ClockMode, EnvError, EnvStatus, Environment, GameClock, ObservationPolicy,
    RealtimeTicker, SystemClock, DEFAULT_TICK_MS,
};
use crate::frame::{Frame, SurfaceBounds};
use crate::practice::{new_game, reference_pack, PracticeKind};

/// A fresh game for a seed, with the pack used to score it when one exists.
pub type GameFactory = Arc<
    dyn Fn(u64) -> Result<(Box<dyn Environment>, Option<CheckpointPack>), String> + Send + Sync,
>;

/// Games the gateway can start sessions for.
#[derive(Clone, Default)]
pub struct Registry {
    games: BTreeMap<String, GameFactory>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, game: impl Into<String>, factory: GameFactory) {
        self.games.insert(game.into(), factory);
    }

    /// The three practice games, each scored against its reference pack.
    pub fn with_practice_games() -> Self {
        let mut r = Registry::new();
        for kind in PracticeKind::ALL {
            r.register(
                kind.game_id(),
                Arc::new(move |seed| {
                    let game: Box<dyn Environment> = Box::new(new_game(kind, seed));
                    Ok((game, Some(reference_pack(kind, seed))))
                }),
            );
        }
        r
    }

    pub fn games(&self) -> impl Iterator<Item = &str> {
        self.games.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatewayConfig {
    /// Human sessions run in Lite mode unless this is set and the human
    /// asks for Realtime.
    pub allow_realtime_humans: bool,
    pub observation: ObservationPolicy,
    pub tick_ms: u64,
    /// How often Realtime sessions push a changed screen.
    pub stream_interval_ms: u64,
    pub adapter_timeout_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            allow_realtime_humans: false,
            observation: ObservationPolicy::default(),
            tick_ms: DEFAULT_TICK_MS,
            stream_interval_ms: 100,
            adapter_timeout_ms: DEFAULT_ADAPTER_TIMEOUT_MS,
        }
    }
}

const POLL: Duration = Duration::from_millis(20);
const HELLO_WAIT: Duration = Duration::from_secs(10);

struct Shared {
    registry: Registry,
    config: GatewayConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    adapters: Mutex<HashMap<String, VecDeque<AdapterBridge>>>,
    next_id: AtomicU64,
    stop: AtomicBool,
}

impl Shared {
    fn next_id(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::Relaxed) + 1
    }
}

/// Serves games to controllers, observers and adapters over WebSockets.
pub struct Gateway {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Gateway {
    pub fn bind(
        addr: impl ToSocketAddrs,
        registry: Registry,
        config: GatewayConfig,
    ) -> Result<Self, GatewayError> {
        if registry.is_empty() {
            return Err(GatewayError::NoGames);
        }
        let listener = TcpListener::bind(addr).map_err(GatewayError::Bind)?;
        listener.set_nonblocking(true).map_err(GatewayError::Bind)?;
        Ok(Gateway {
            listener,
            shared: Arc::new(Shared {
                registry,
                config,
                sessions: Mutex::default(),
                adapters: Mutex::default(),
                next_id: AtomicU64::new(0),
                stop: AtomicBool::new(false),
            }),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Accepts connections until stopped, one thread per connection.
    pub fn serve(self) -> Result<(), GatewayError> {
        log::info!("gateway listening on {}", self.local_addr());
        while !self.shared.stop.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let shared = Arc::clone(&self.shared);
                    std::thread::spawn(move || {
                        if let Err(e) = connection(stream, &shared) {
                            log::info!("connection from {peer} ended: {e}");
                        }
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> GatewayHandle {
        let addr = self.local_addr();
        let shared = Arc::clone(&self.shared);
        let thread = std::thread::spawn(move || self.serve());
        GatewayHandle {
            addr,
            shared,
            thread: Some(thread),
        }
    }
}

pub struct GatewayHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<Result<(), GatewayError>>>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.shared.sessions.lock().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Games whose adapters are connected and waiting for a controller.
    pub fn waiting_adapters(&self) -> Vec<String> {
        let adapters = self.shared.adapters.lock().unwrap();
        adapters
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(g, _)| g.clone())
            .collect()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

struct Subscriber {
    id: u64,
    tx: Sender<Message>,
}

struct SessionState {
    /// Lite sessions own the game directly.
    lite: Option<(Box<dyn Environment>, GameClock)>,
    pack: Option<CheckpointPack>,
    progress: ProgressState,
    step: u64,
    current: Option<FrameMessage>,
    last_pixels: Option<Frame>,
    subscribers: Vec<Subscriber>,
    controller: Option<u64>,
    closed: bool,
}

struct Session {
    id: String,
    mode: ClockMode,
    /// Deliver only the newest frame of each observation.
    latest_only: bool,
    bounds: SurfaceBounds,
    policy: ObservationPolicy,
    ticker: Option<RealtimeTicker>,
    state: Mutex<SessionState>,
}

impl Session {
    fn status(&self, st: &SessionState) -> (EnvStatus, u64, u64) {
        match (&self.ticker, &st.lite) {
            (Some(t), _) => (t.status(), t.loss_count(), t.game_time_ms()),
            (None, Some((env, clock))) => (env.status(), env.loss_count(), clock.game_time_ms()),
            (None, None) => (EnvStatus::Locked, 0, 0),
        }
    }

    /// Why the session no longer takes actions, if it does not.
    fn finished(&self, st: &SessionState) -> Option<String> {
        if st.closed {
            return Some("session closed".into());
        }
        if st.pack.as_ref().is_some_and(|p| st.progress.is_complete(p)) {
            return Some("completed".into());
        }
        match self.status(st).0 {
            EnvStatus::Running => None,
            EnvStatus::Completed => Some("completed".into()),
            EnvStatus::Locked => Some("game locked".into()),
        }
    }

    /// Numbers, scores and sends `frames` to every subscriber.
    fn publish(&self, st: &mut SessionState, frames: &[Frame]) {
        let (status, losses, game_time_ms) = self.status(st);
        for frame in frames {
            st.step += 1;
            let mut progress = None;
            if let Some(pack) = &st.pack {
                if let Err(e) = st.progress.match_frame(pack, frame, st.step) {
                    log::warn!("session {}: cannot score frame: {e}", self.id);
                }
                progress = Some(progress_score(&st.progress, pack));
            }
            let mut m = match FrameMessage::encode(frame, st.step, game_time_ms) {
                Ok(m) => m,
                Err(e) => {
                    log::error!("session {}: cannot encode frame: {e}", self.id);
                    continue;
                }
            };
            m.progress = progress;
            m.status = status;
            m.loss_count = losses;
            st.current = Some(m.clone());
            st.last_pixels = Some(frame.clone());
            broadcast(st, &Message::Frame(m));
        }
        if let Some(pack) = &st.pack {
            let score = Score {
                progress: progress_score(&st.progress, pack),
                furthest: st
                    .progress
                    .furthest_index()
                    .map(|i| pack.checkpoints()[i].label.clone()),
            };
            broadcast(st, &Message::Score(score));
        }
    }

    fn ack(&self, st: &SessionState, id: Option<u64>) -> Message {
        let (status, loss_count, game_time_ms) = self.status(st);
        Message::Ack(Ack {
            id,
            step: st.current.as_ref().map(|f| f.step),
            game_time_ms,
            status,
            loss_count,
        })
    }
}

fn broadcast(st: &mut SessionState, message: &Message) {
    st.subscribers.retain(|s| s.tx.send(message.clone()).is_ok());
}

fn send_to(st: &SessionState, client: u64, message: Message) {
    if let Some(s) = st.subscribers.iter().find(|s| s.id == client) {
        let _ = s.tx.send(message);
    }
}

fn connection(stream: TcpStream, shared: &Arc<Shared>) -> Result<(), GatewayError> {
    stream.set_nonblocking(false)?;
    let mut channel = Channel::accept(stream)?;
    let hello = match channel.recv(HELLO_WAIT) {
        Ok(Some(Message::Hello(h))) => h,
        Ok(Some(other)) => {
            return violation(&mut channel, format!("expected hello, got {}", other.kind()));
        }
        Ok(None) => return violation(&mut channel, "no hello".to_string()),
        Err(e) => return Err(e),
    };
    if let Err(e) = check_version(&hello) {
        return violation(&mut channel, e.to_string());
    }
    let client = shared.next_id();
    let role = hello.role;
    let (tx, rx) = mpsc::channel();
    let session = match role {
        Some(Role::Adapter) => {
            let game = hello.game.clone().unwrap_or_default();
            let bridge = AdapterBridge::from_hello(
                channel,
                hello,
                ClockMode::Lite,
                shared.config.adapter_timeout_ms,
            )?;
            log::info!("adapter for {game:?} is waiting for a controller");
            shared
                .adapters
                .lock()
                .unwrap()
                .entry(game)
                .or_default()
                .push_back(bridge);
            return Ok(());
        }
        Some(Role::Observer) => join_as_observer(shared, &hello, client, tx),
        Some(r) => open_controller(shared, &hello, r, client, tx),
        None => Err(Message::error(ErrorCode::ProtocolViolation, "hello needs a role", None)),
    };
    let session = match session {
        Ok(s) => s,
        Err(message) => {
            channel.send(&message)?;
            channel.close();
            return Ok(());
        }
    };
    let result = pump(&mut channel, shared, &session, client, role, rx);
    leave(shared, &session, client);
    channel.close();
    result
}

fn violation(channel: &mut Channel, why: String) -> Result<(), GatewayError> {
    channel.send(&Message::error(ErrorCode::ProtocolViolation, why.clone(), None))?;
    channel.close();
    Err(GatewayError::Protocol(why))
}

fn reply_hello(session: &Session, role: Role, game: &str) -> Message {
    let mut h = Hello::new(role).game(game);
    h.session = Some(session.id.clone());
    h.mode = Some(session.mode);
    h.bounds = Some(session.bounds);
    Message::Hello(h)
}

fn open_controller(
    shared: &Arc<Shared>,
    hello: &Hello,
    role: Role,
    client: u64,
    tx: Sender<Message>,
) -> Result<Arc<Session>, Message> {
    if let Some(id) = &hello.session {
        let session = shared.sessions.lock().unwrap().get(id).cloned().ok_or_else(|| {
            Message::error(ErrorCode::UnknownSession, format!("no session {id:?}"), None)
        })?;
        let mut st = session.state.lock().unwrap();
        if st.controller.is_some() {
            return Err(Message::error(
                ErrorCode::ControllerTaken,
                format!("session {id} already has a controller"),
                None,
            ));
        }
        st.controller = Some(client);
        let game = hello.game.clone().unwrap_or_default();
        let _ = tx.send(reply_hello(&session, role, &game));
        if let Some(f) = &st.current {
            let _ = tx.send(Message::Frame(f.clone()));
        }
        st.subscribers.push(Subscriber { id: client, tx });
        drop(st);
        return Ok(session);
    }
    let game = hello
        .game
        .clone()
        .ok_or_else(|| Message::error(ErrorCode::UnknownGame, "hello names no game", None))?;
    let mode = match (role, hello.mode) {
        (Role::Human, Some(ClockMode::Realtime)) if !shared.config.allow_realtime_humans => {
            ClockMode::Lite
        }
        (_, Some(m)) => m,
        (_, None) => ClockMode::Lite,
    };
    let seed = hello.seed.unwrap_or(0);
    let (mut env, pack) = match shared.registry.games.get(&game) {
        Some(factory) => factory(seed)
            .map_err(|e| Message::error(ErrorCode::UnknownGame, e, None))?,
        None => {
            let bridge = shared
                .adapters
                .lock()
                .unwrap()
                .get_mut(&game)
                .and_then(VecDeque::pop_front);
            match bridge {
                Some(b) => (Box::new(b) as Box<dyn Environment>, None),
                None => {
                    return Err(Message::error(
                        ErrorCode::UnknownGame,
                        format!("no game {game:?}"),
                        None,
                    ))
                }
            }
        }
    };
    let first = env
        .reset(seed)
        .map_err(|e| Message::error(ErrorCode::ExecutionRejected, format!("reset failed: {e}"), None))?;
    let bounds = env.surface_bounds();
    let (lite, ticker) = match mode {
        ClockMode::Lite => (Some((env, GameClock::new(ClockMode::Lite, shared.config.tick_ms))), None),
        ClockMode::Realtime => {
            let t = RealtimeTicker::spawn(env, Arc::new(SystemClock::new()), shared.config.tick_ms);
            (None, Some(t))
        }
    };
    let session = Arc::new(Session {
        id: format!("s{}", shared.next_id()),
        mode,
        latest_only: role == Role::Human,
        bounds,
        policy: shared.config.observation,
        ticker,
        state: Mutex::new(SessionState {
            lite,
            pack,
            progress: ProgressState::new(),
            step: 0,
            current: None,
            last_pixels: None,
            subscribers: vec![Subscriber { id: client, tx }],
            controller: Some(client),
            closed: false,
        }),
    });
    {
        let mut st = session.state.lock().unwrap();
        send_to(&st, client, reply_hello(&session, role, &game));
        session.publish(&mut st, &[first]);
    }
    if mode == ClockMode::Realtime {
        spawn_stream(Arc::downgrade(&session), shared.config.stream_interval_ms);
    }
    log::info!("session {} opened: {game} in {mode:?} mode", session.id);
    shared
        .sessions
        .lock()
        .unwrap()
        .insert(session.id.clone(), Arc::clone(&session));
    Ok(session)
}

fn join_as_observer(
    shared: &Arc<Shared>,
    hello: &Hello,
    client: u64,
    tx: Sender<Message>,
) -> Result<Arc<Session>, Message> {
    let id = hello.session.clone().ok_or_else(|| {
        Message::error(ErrorCode::UnknownSession, "observers must name a session", None)
    })?;
    let session = shared.sessions.lock().unwrap().get(&id).cloned().ok_or_else(|| {
        Message::error(ErrorCode::UnknownSession, format!("no session {id:?}"), None)
    })?;
    let mut st = session.state.lock().unwrap();
    let game = hello.game.clone().unwrap_or_default();
    let _ = tx.send(reply_hello(&session, Role::Observer, &game));
    if let Some(f) = &st.current {
        let _ = tx.send(Message::Frame(f.clone()));
    }
    st.subscribers.push(Subscriber { id: client, tx });
    drop(st);
    Ok(session)
}

/// Pushes changed Realtime screens until the session goes away.
fn spawn_stream(session: Weak<Session>, interval_ms: u64) {
    std::thread::spawn(move || loop {
        std::thread::sleep(Duration::from_millis(interval_ms));
        let Some(session) = session.upgrade() else {
            return;
        };
        let Some(ticker) = &session.ticker else {
            return;
        };
        let frame = ticker.snapshot();
        let mut st = session.state.lock().unwrap();
        if st.closed {
            return;
        }
        if st.last_pixels.as_ref().is_none_or(|f| !f.same_pixels(&frame)) {
            session.publish(&mut st, &[frame]);
        }
    });
}

/// Moves messages both ways until either side hangs up.
fn pump(
    channel: &mut Channel,
    shared: &Arc<Shared>,
    session: &Arc<Session>,
    client: u64,
    role: Option<Role>,
    rx: Receiver<Message>,
) -> Result<(), GatewayError> {
    let controller = role.is_some_and(Role::is_controller);
    loop {
        while let Ok(m) = rx.try_recv() {
            channel.send(&m)?;
            if matches!(m, Message::Bye { .. }) {
                return Ok(());
            }
        }
        if shared.stop.load(Ordering::SeqCst) {
            let _ = channel.send(&Message::bye("gateway shutting down"));
            return Ok(());
        }
        let message = match channel.recv(POLL) {
            Ok(Some(m)) => m,
            Ok(None) => continue,
            Err(GatewayError::Closed) => return Ok(()),
            Err(GatewayError::Protocol(why)) => {
                let _ = channel.send(&Message::error(ErrorCode::ProtocolViolation, why.clone(), None));
                return Err(GatewayError::Protocol(why));
            }
            Err(e) => return Err(e),
        };
        match message {
            Message::Action(a) if controller => handle_action(session, client, a),
            Message::Pause | Message::Resume if controller => {
                if let Some(t) = &session.ticker {
                    t.set_paused(matches!(message, Message::Pause));
                }
                let st = session.state.lock().unwrap();
                send_to(&st, client, session.ack(&st, None));
            }
            Message::Bye { .. } if controller => {
                close_session(shared, session, "controller left");
                return Ok(());
            }
            Message::Bye { .. } => return Ok(()),
            Message::Action(a) => {
                let st = session.state.lock().unwrap();
                let m = Message::error(ErrorCode::NotController, "observers cannot act", a.id);
                send_to(&st, client, m);
            }
            other => {
                let why = format!("unexpected {} message", other.kind());
                let _ = channel.send(&Message::error(ErrorCode::ProtocolViolation, why.clone(), None));
                return Err(GatewayError::Protocol(why));
            }
        }
    }
}

fn handle_action(session: &Arc<Session>, client: u64, action: ActionMessage) {
    let id = action.id;
    let ctx = ParseContext::new(session.bounds, DefaultTimings::default());
    let mut st = session.state.lock().unwrap();
    if let Some(why) = session.finished(&st) {
        send_to(&st, client, Message::error(ErrorCode::Terminated, why, id));
        return;
    }
    let command = match parse_action_text(&action.text, &ctx) {
        Ok(c) => c,
        Err(e) => {
            send_to(&st, client, Message::error(ErrorCode::ParseError, e.to_string(), id));
            return;
        }
    };
    let error = |e: EnvError| {
        let code = match e {
            EnvError::CommandRejected(_) => ErrorCode::ExecutionRejected,
            EnvError::AdapterTimeout(_) => ErrorCode::AdapterTimeout,
            _ => ErrorCode::ExecutionRejected,
        };
        Message::error(code, e.to_string(), id)
    };
    if let Some(ticker) = &session.ticker {
        drop(st);
        let ticket = ticker.submit(&command);
        let result = ticker.wait_for(ticket);
        let frame = ticker.snapshot();
        let mut st = session.state.lock().unwrap();
        match result {
            Ok(()) => {
                session.publish(&mut st, &[frame]);
                let ack = session.ack(&st, id);
                send_to(&st, client, ack);
            }
            Err(e) => send_to(&st, client, error(e)),
        }
        return;
    }
    let policy = session.policy;
    let (env, clock) = st.lite.as_mut().expect("lite sessions own their game");
    let outcome = execute(env.as_mut(), clock, &command)
        .and_then(|()| observe(env.as_mut(), clock, &policy));
    match outcome {
        Ok(frames) => {
            let frames = if session.latest_only {
                &frames[frames.len() - 1..]
            } else {
                &frames[..]
            };
            session.publish(&mut st, frames);
            let ack = session.ack(&st, id);
            send_to(&st, client, ack);
        }
        Err(e) => send_to(&st, client, error(e)),
    }
}

fn close_session(shared: &Arc<Shared>, session: &Arc<Session>, reason: &str) {
    shared.sessions.lock().unwrap().remove(&session.id);
    let mut st = session.state.lock().unwrap();
    st.closed = true;
    broadcast(&mut st, &Message::bye(reason));
    log::info!("session {} closed: {reason}", session.id);
}

fn leave(shared: &Arc<Shared>, session: &Arc<Session>, client: u64) {
    let mut st = session.state.lock().unwrap();
    st.subscribers.retain(|s| s.id != client);
    if st.controller == Some(client) {
        st.controller = None;
    }
    let empty = st.subscribers.is_empty();
    drop(st);
    if empty {
        shared.sessions.lock().unwrap().remove(&session.id);
        session.state.lock().unwrap().closed = true;
    }
}
