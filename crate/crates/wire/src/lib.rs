//! Binary framing for the rover link, a JSON mirror for consoles, and
//! session logs.
//!
//! A frame is `"RV"`, version, type, seq, stamp, payload length, payload and
//! a CRC-32 of the payload. Integers are little-endian.

pub mod codec;
pub mod crc;
pub mod fixtures;
pub mod json;
pub mod log;
pub mod message;
pub mod stream;

use thiserror::Error;

pub use codec::{decode_frame, decode_payload, encode_message, encode_payload, Header, MAX_PAYLOAD};
pub use crc::crc32;
pub use json::{from_json, to_json};
pub use log::{parse_log, read_log, replay, LogContents, LogWriter, LOG_MAGIC};
pub use message::{
    subscribe_mask, DepthImage, Hello, LandmarkRecord, MetricsRecord, MsgType, Payload, RgbImage, Role,
    TwistRecord, WireMessage,
};
pub use stream::{decode_stream, decode_stream_with_stats, DecodeStats, StreamDecoder};

pub const PROTOCOL_VERSION: u8 = codec::VERSION;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("payload of {0} bytes exceeds the 16 MiB cap")]
    PayloadTooLarge(usize),
    #[error("too many {0} for the count field")]
    TooMany(&'static str),
    #[error("image data length does not match its dimensions")]
    ImageSize,
    #[error("payload shorter than its declared contents")]
    Truncated,
    #[error("{0} unexpected bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid {0} code {1}")]
    BadEnum(&'static str, u8),
    #[error("bad frame header")]
    BadHeader,
    #[error("payload checksum mismatch")]
    Crc,
    #[error("not a session log")]
    BadLogMagic,
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
