use std::net::ToSocketAddrs;
use std::time::{Duration, Instant};

use super::protocol::{ActionMessage, Channel, Hello, Message};
use super::GatewayError;

/// A controller or observer connection.
pub struct GatewayClient {
    channel: Channel,
    welcome: Hello,
    next_id: u64,
}

impl GatewayClient {
    /// Connects and exchanges hellos.
    pub fn connect(addr: impl ToSocketAddrs, hello: Hello) -> Result<Self, GatewayError> {
        let mut channel = Channel::connect(addr)?;
        channel.send(&Message::Hello(hello))?;
        match channel.recv(Duration::from_secs(10))? {
            Some(Message::Hello(welcome)) => Ok(GatewayClient {
                channel,
                welcome,
                next_id: 0,
            }),
            Some(Message::Error(e)) => Err(GatewayError::Rejected(e.code, e.message)),
            Some(other) => Err(GatewayError::Protocol(format!(
                "expected hello, got {}",
                other.kind()
            ))),
            None => Err(GatewayError::Timeout(10_000)),
        }
    }

    /// The server's hello.
    pub fn welcome(&self) -> &Hello {
        &self.welcome
    }

    pub fn session(&self) -> Option<&str> {
        self.welcome.session.as_deref()
    }

    pub fn send(&mut self, message: &Message) -> Result<(), GatewayError> {
        self.channel.send(message)
    }

    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Message>, GatewayError> {
        self.channel.recv(timeout)
    }

    /// Sends an action and collects everything up to and including its ack
    /// or error.
    pub fn act(&mut self, text: &str) -> Result<Vec<Message>, GatewayError> {
        self.next_id += 1;
        let id = Some(self.next_id);
        self.send(&Message::Action(ActionMessage {
            text: text.to_string(),
            id,
        }))?;
        let deadline = Instant::now() + Duration::from_secs(30);
        let mut got = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(GatewayError::Timeout(30_000));
            }
            let Some(m) = self.recv(left)? else {
                continue;
            };
            let done = match &m {
                Message::Ack(a) => a.id == id,
                Message::Error(e) => e.id == id,
                Message::Bye { .. } => true,
                _ => false,
            };
            got.push(m);
            if done {
                return Ok(got);
            }
        }
    }

    /// Says goodbye and closes.
    pub fn close(mut self) {
        let _ = self.channel.send(&Message::bye("client done"));
        self.channel.close();
    }
}
