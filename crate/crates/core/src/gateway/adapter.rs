use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::protocol::{
    Ack, ActionMessage, Channel, ErrorCode, FrameMessage, Hello, Message, Role, PROTOCOL_VERSION,
};
use super::GatewayError;
use crate::action::ActionCommand;
use crate::env::{ClockMode, EnvError, EnvStatus, Environment};
use crate::frame::{Frame, SurfaceBounds};

/// How long the bridge waits for an adapter reply.
pub const DEFAULT_ADAPTER_TIMEOUT_MS: u64 = 5000;

/// Requests a loopback adapter answers.
pub const LOOPBACK_CAPABILITIES: [&str; 5] = ["reset", "action", "release", "advance", "pause"];

/// A remote game, reached through an adapter connection, presented as a
/// local [`Environment`]. Each request gets exactly one reply: a frame when
/// the screen changed, an ack otherwise, or an error.
pub struct AdapterBridge {
    channel: Channel,
    game: String,
    bounds: SurfaceBounds,
    capabilities: Vec<String>,
    latest: Option<Frame>,
    game_time_ms: u64,
    status: EnvStatus,
    loss_count: u64,
    timeout: Duration,
}

impl std::fmt::Debug for AdapterBridge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdapterBridge")
            .field("game", &self.game)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl AdapterBridge {
    /// Reads the adapter's hello, answers it and, for Lite runs, asks the
    /// adapter to hold its game still between requests.
    pub fn handshake(
        mut channel: Channel,
        mode: ClockMode,
        timeout_ms: u64,
    ) -> Result<Self, GatewayError> {
        let timeout = Duration::from_millis(timeout_ms);
        let hello = match channel.recv(timeout)? {
            Some(Message::Hello(h)) => h,
            Some(other) => {
                return Err(GatewayError::Protocol(format!(
                    "expected hello, got {}",
                    other.kind()
                )))
            }
            None => return Err(GatewayError::Timeout(timeout_ms)),
        };
        Self::from_hello(channel, hello, mode, timeout_ms)
    }

    /// Finishes setup for an adapter whose hello was already read.
    pub fn from_hello(
        mut channel: Channel,
        hello: Hello,
        mode: ClockMode,
        timeout_ms: u64,
    ) -> Result<Self, GatewayError> {
        if hello.role != Some(Role::Adapter) {
            return Err(GatewayError::Protocol("peer is not an adapter".into()));
        }
        check_version(&hello)?;
        let bounds = hello
            .bounds
            .ok_or_else(|| GatewayError::Protocol("adapter hello needs bounds".into()))?;
        let game = hello
            .game
            .clone()
            .ok_or_else(|| GatewayError::Protocol("adapter hello needs a game".into()))?;
        let mut reply = Hello::new(Role::Adapter).game(game.clone());
        reply.mode = Some(mode);
        reply.bounds = Some(bounds);
        channel.send(&Message::Hello(reply))?;
        let mut bridge = AdapterBridge {
            channel,
            game,
            bounds,
            capabilities: hello.capabilities,
            latest: None,
            game_time_ms: 0,
            status: EnvStatus::Running,
            loss_count: 0,
            timeout: Duration::from_millis(timeout_ms),
        };
        if mode == ClockMode::Lite {
            bridge.request(&Message::Pause).map_err(env_to_gateway)?;
        }
        Ok(bridge)
    }

    pub fn game(&self) -> &str {
        &self.game
    }

    pub fn capabilities(&self) -> &[String] {
        &self.capabilities
    }

    /// Sends `message` and waits for its one reply.
    fn request(&mut self, message: &Message) -> Result<(), EnvError> {
        let transport = |e: GatewayError| EnvError::Transport(e.to_string());
        self.channel.send(message).map_err(transport)?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(EnvError::AdapterTimeout(self.timeout.as_millis() as u64));
            }
            match self.channel.recv(left).map_err(transport)? {
                None => continue,
                Some(Message::Frame(f)) => {
                    let frame = f
                        .decode()
                        .map_err(|e| EnvError::Transport(format!("bad frame: {e}")))?;
                    self.latest = Some(frame);
                    self.game_time_ms = f.game_time_ms;
                    self.status = f.status;
                    self.loss_count = f.loss_count;
                    return Ok(());
                }
                Some(Message::Ack(a)) => {
                    self.game_time_ms = a.game_time_ms;
                    self.status = a.status;
                    self.loss_count = a.loss_count;
                    return Ok(());
                }
                Some(Message::Error(e)) => {
                    return Err(match e.code {
                        ErrorCode::ExecutionRejected | ErrorCode::ParseError => {
                            EnvError::CommandRejected(e.message)
                        }
                        _ => EnvError::Fault(e.message),
                    });
                }
                Some(Message::Bye { reason }) => {
                    return Err(EnvError::Transport(format!("adapter left: {reason}")));
                }
                Some(other) => {
                    log::warn!("adapter sent unexpected {}", other.kind());
                }
            }
        }
    }
}

fn env_to_gateway(e: EnvError) -> GatewayError {
    match e {
        EnvError::AdapterTimeout(ms) => GatewayError::Timeout(ms),
        other => GatewayError::Protocol(other.to_string()),
    }
}

pub(super) fn check_version(hello: &Hello) -> Result<(), GatewayError> {
    if hello.protocol != PROTOCOL_VERSION {
        return Err(GatewayError::Protocol(format!(
            "protocol {} not supported; this gateway speaks {PROTOCOL_VERSION}",
            hello.protocol
        )));
    }
    Ok(())
}

impl Environment for AdapterBridge {
    fn reset(&mut self, seed: u64) -> Result<Frame, EnvError> {
        self.latest = None;
        self.request(&Message::Reset { seed })?;
        match &self.latest {
            Some(_) => Ok(self.snapshot()),
            None => Err(EnvError::Fault("adapter answered reset without a frame".into())),
        }
    }

    fn apply(&mut self, command: &ActionCommand) -> Result<(), EnvError> {
        self.request(&Message::Action(ActionMessage {
            text: command.to_string(),
            id: None,
        }))
    }

    fn release(&mut self) -> Result<(), EnvError> {
        self.request(&Message::Release)
    }

    fn advance(&mut self, dt_ms: u64) -> Result<(), EnvError> {
        if dt_ms == 0 {
            return Ok(());
        }
        self.request(&Message::Advance { dt_ms })
    }

    fn snapshot(&self) -> Frame {
        match &self.latest {
            Some(f) => f.with_timestamp(self.game_time_ms),
            // only before the first reset
            None => Frame::filled(self.bounds.width.max(1), self.bounds.height.max(1), [0; 3]),
        }
    }

    fn surface_bounds(&self) -> SurfaceBounds {
        self.bounds
    }

    fn status(&self) -> EnvStatus {
        self.status
    }

    fn loss_count(&self) -> u64 {
        self.loss_count
    }
}

impl Drop for AdapterBridge {
    fn drop(&mut self) {
        let _ = self.channel.send(&Message::bye("bridge closed"));
        self.channel.close();
    }
}

/// Waits for adapters to dial in.
pub struct AdapterListener {
    listener: TcpListener,
}

impl AdapterListener {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self, GatewayError> {
        let listener = TcpListener::bind(addr).map_err(GatewayError::Bind)?;
        Ok(AdapterListener { listener })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Accepts one adapter connection and completes its handshake.
    pub fn accept(&self, mode: ClockMode, timeout_ms: u64) -> Result<AdapterBridge, GatewayError> {
        let (stream, peer) = self.listener.accept()?;
        log::info!("adapter connected from {peer}");
        AdapterBridge::handshake(Channel::accept(stream)?, mode, timeout_ms)
    }
}

/// Serves a local environment over the adapter protocol, the way an
/// emulator adapter would.
pub struct LoopbackAdapter;

impl LoopbackAdapter {
    /// Connects to `addr` and answers requests on a new thread until the
    /// bridge says goodbye or disconnects.
    pub fn spawn(
        addr: SocketAddr,
        game: impl Into<String>,
        env: Box<dyn Environment>,
    ) -> JoinHandle<Result<(), GatewayError>> {
        let game = game.into();
        std::thread::spawn(move || {
            let mut channel = Channel::connect(addr)?;
            Self::serve(&mut channel, &game, env)
        })
    }

    /// Runs the adapter side on an open channel.
    pub fn serve(
        channel: &mut Channel,
        game: &str,
        mut env: Box<dyn Environment>,
    ) -> Result<(), GatewayError> {
        let mut hello = Hello::new(Role::Adapter).game(game);
        hello.bounds = Some(env.surface_bounds());
        hello.capabilities = LOOPBACK_CAPABILITIES.iter().map(|s| s.to_string()).collect();
        channel.send(&Message::Hello(hello))?;
        let mut game_time_ms = 0;
        let mut last_sent: Option<Frame> = None;
        loop {
            let message = match channel.recv(Duration::from_secs(60)) {
                Ok(Some(m)) => m,
                Ok(None) => continue,
                Err(GatewayError::Closed) => return Ok(()),
                Err(e) => return Err(e),
            };
            let outcome = match &message {
                Message::Hello(_) | Message::Pause | Message::Resume => Ok(false),
                Message::Reset { seed } => {
                    game_time_ms = 0;
                    last_sent = None;
                    env.reset(*seed).map(|_| true)
                }
                Message::Action(a) => match a.text.parse::<ActionCommand>() {
                    Ok(c) => env.apply(&c).map(|_| false),
                    Err(e) => Err(EnvError::CommandRejected(e.to_string())),
                },
                Message::Release => env.release().map(|_| false),
                Message::Advance { dt_ms } => env.advance(*dt_ms).map(|_| {
                    game_time_ms += dt_ms;
                    false
                }),
                Message::Bye { .. } => {
                    channel.close();
                    return Ok(());
                }
                other => {
                    let m = Message::error(
                        ErrorCode::ProtocolViolation,
                        format!("adapters do not handle {}", other.kind()),
                        None,
                    );
                    channel.send(&m)?;
                    continue;
                }
            };
            if matches!(message, Message::Hello(_)) {
                continue;
            }
            let reply = match outcome {
                Err(EnvError::CommandRejected(why)) => {
                    Message::error(ErrorCode::ExecutionRejected, why, None)
                }
                Err(e) => Message::error(ErrorCode::ProtocolViolation, e.to_string(), None),
                Ok(force_frame) => {
                    let frame = env.snapshot();
                    let changed = last_sent.as_ref().is_none_or(|f| !f.same_pixels(&frame));
                    if force_frame || changed {
                        let mut m = FrameMessage::encode(&frame, 0, game_time_ms)
                            .map_err(|e| GatewayError::Protocol(e.to_string()))?;
                        m.status = env.status();
                        m.loss_count = env.loss_count();
                        last_sent = Some(frame);
                        Message::Frame(m)
                    } else {
                        Message::Ack(Ack {
                            game_time_ms,
                            status: env.status(),
                            loss_count: env.loss_count(),
                            ..Default::default()
                        })
                    }
                }
            };
            channel.send(&reply)?;
        }
    }
}
