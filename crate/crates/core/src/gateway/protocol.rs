use std::io::ErrorKind;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use tungstenite::WebSocket;

use super::GatewayError;
use crate::env::{ClockMode, EnvStatus};
use crate::frame::{Frame, FrameError, SurfaceBounds};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Agent,
    Human,
    Observer,
    Adapter,
}

impl Role {
    pub fn is_controller(self) -> bool {
        matches!(self, Role::Agent | Role::Human)
    }
}

/// Opens a connection. The server answers with its own hello carrying the
/// session id, clock mode and surface bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hello {
    pub protocol: u32,
    pub role: Option<Role>,
    pub game: Option<String>,
    pub seed: Option<u64>,
    pub mode: Option<ClockMode>,
    /// Observers name the session to watch.
    pub session: Option<String>,
    pub bounds: Option<SurfaceBounds>,
    /// Adapters list the requests they support.
    pub capabilities: Vec<String>,
}

impl Hello {
    pub fn new(role: Role) -> Self {
        Hello {
            protocol: PROTOCOL_VERSION,
            role: Some(role),
            ..Default::default()
        }
    }

    pub fn game(mut self, game: impl Into<String>) -> Self {
        self.game = Some(game.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    /// Strictly increasing within a session.
    pub step: u64,
    pub game_time_ms: u64,
    pub width: u32,
    pub height: u32,
    /// Base64 PNG.
    pub png: String,
    #[serde(default)]
    pub progress: Option<f64>,
    #[serde(default)]
    pub status: EnvStatus,
    #[serde(default)]
    pub loss_count: u64,
}

impl FrameMessage {
    pub fn encode(frame: &Frame, step: u64, game_time_ms: u64) -> Result<Self, FrameError> {
        Ok(FrameMessage {
            step,
            game_time_ms,
            width: frame.width(),
            height: frame.height(),
            png: base64::engine::general_purpose::STANDARD.encode(frame.to_png()?),
            progress: None,
            status: EnvStatus::Running,
            loss_count: 0,
        })
    }

    pub fn decode(&self) -> Result<Frame, FrameError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.png)
            .map_err(|e| FrameError::Decode(e.to_string()))?;
        let frame = Frame::from_png(&bytes, self.game_time_ms)?;
        if (frame.width(), frame.height()) != (self.width, self.height) {
            return Err(FrameError::Decode("size disagrees with header".into()));
        }
        Ok(frame)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMessage {
    /// Raw command text, parsed by the same grammar agents use.
    pub text: String,
    #[serde(default)]
    pub id: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ack {
    pub id: Option<u64>,
    /// Step of the latest frame once the action has played out.
    pub step: Option<u64>,
    pub game_time_ms: u64,
    pub status: EnvStatus,
    pub loss_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub progress: f64,
    pub furthest: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ParseError,
    ExecutionRejected,
    ProtocolViolation,
    ControllerTaken,
    NotController,
    UnknownGame,
    UnknownSession,
    Terminated,
    AdapterTimeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub id: Option<u64>,
}

/// Everything that travels over a gateway connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello(Hello),
    Frame(FrameMessage),
    Action(ActionMessage),
    Ack(Ack),
    Pause,
    Resume,
    Score(Score),
    Error(ErrorMessage),
    Bye {
        #[serde(default)]
        reason: String,
    },
    /// Bridge to adapter: restart the game.
    Reset { seed: u64 },
    /// Bridge to adapter: run the game for `dt_ms`.
    Advance { dt_ms: u64 },
    /// Bridge to adapter: let go of every input.
    Release,
}

impl Message {
    pub fn error(code: ErrorCode, message: impl Into<String>, id: Option<u64>) -> Self {
        Message::Error(ErrorMessage {
            code,
            message: message.into(),
            id,
        })
    }

    pub fn bye(reason: impl Into<String>) -> Self {
        Message::Bye {
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello(_) => "hello",
            Message::Frame(_) => "frame",
            Message::Action(_) => "action",
            Message::Ack(_) => "ack",
            Message::Pause => "pause",
            Message::Resume => "resume",
            Message::Score(_) => "score",
            Message::Error(_) => "error",
            Message::Bye { .. } => "bye",
            Message::Reset { .. } => "reset",
            Message::Advance { .. } => "advance",
            Message::Release => "release",
        }
    }
}

/// A WebSocket carrying one JSON [`Message`] per text frame.
pub struct Channel {
    ws: WebSocket<TcpStream>,
}

impl Channel {
    /// Completes the server side of the handshake.
    pub fn accept(stream: TcpStream) -> Result<Self, GatewayError> {
        stream.set_nodelay(true)?;
        let ws = tungstenite::accept(stream)
            .map_err(|e| GatewayError::Protocol(format!("handshake failed: {e}")))?;
        Ok(Channel { ws })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, GatewayError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let url = format!("ws://{}/", stream.peer_addr()?);
        let (ws, _) = tungstenite::client(url.as_str(), stream)
            .map_err(|e| GatewayError::Protocol(format!("handshake failed: {e}")))?;
        Ok(Channel { ws })
    }

    pub fn send(&mut self, message: &Message) -> Result<(), GatewayError> {
        let text = serde_json::to_string(message).expect("messages always serialize");
        self.ws.send(tungstenite::Message::text(text))?;
        Ok(())
    }

    /// Waits up to `timeout` for the next message. `Ok(None)` means nothing
    /// arrived in time.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Message>, GatewayError> {
        self.ws
            .get_ref()
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        loop {
            match self.ws.read() {
                Ok(tungstenite::Message::Text(text)) => {
                    return serde_json::from_str(text.as_str())
                        .map(Some)
                        .map_err(|e| GatewayError::Protocol(format!("bad message: {e}")));
                }
                Ok(tungstenite::Message::Binary(_)) => {
                    return Err(GatewayError::Protocol("binary messages are not used".into()));
                }
                Ok(tungstenite::Message::Close(_)) => return Err(GatewayError::Closed),
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) =>
                {
                    return Ok(None);
                }
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Err(GatewayError::Closed);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Starts a close handshake; errors are ignored since the peer may
    /// already be gone.
    pub fn close(&mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}
