//! Length-prefixed wire protocol exposing environments to remote clients.

mod frame;
mod protocol;
mod server;
mod session;
#[cfg(test)]
mod tests;

pub use frame::{encode_frame, read_frame, write_frame, FrameDecoder, FrameError, MAX_FRAME_LEN};
pub use protocol::{Message, MessageType, PixelEncoding};
pub use server::{serve, Server, ServerConfig, DEFAULT_IDLE_TIMEOUT};
pub use session::{Reply, Session};

pub const PROTOCOL_VERSION: &str = "1";
