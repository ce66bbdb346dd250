//! Network access to games: controllers (agents or humans) play sessions,
//! observers watch them, and adapters plug external emulators in.
//!
//! Every connection is a WebSocket carrying one JSON [`Message`] per text
//! frame, tagged by `type`. A connection opens with `hello`, which names
//! the role. Frames travel as base64 PNG so pixels arrive bit-exact.

mod adapter;
mod client;
mod protocol;
mod server;

use thiserror::Error;

pub use adapter::{
    AdapterBridge, AdapterListener, LoopbackAdapter, DEFAULT_ADAPTER_TIMEOUT_MS,
    LOOPBACK_CAPABILITIES,
};
pub use client::GatewayClient;
pub use protocol::{
    Ack, ActionMessage, Channel, ErrorCode, ErrorMessage, FrameMessage, Hello, Message, Role,
    Score, PROTOCOL_VERSION,
};
pub use server::{GameFactory, Gateway, GatewayConfig, GatewayHandle, Registry};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot bind: {0}")]
    Bind(std::io::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("websocket: {0}")]
    WebSocket(#[from] tungstenite::Error),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("no reply within {0} ms")]
    Timeout(u64),
    #[error("connection closed")]
    Closed,
    #[error("gateway refused: {0:?}: {1}")]
    Rejected(ErrorCode, String),
    #[error("no games registered")]
    NoGames,
}
