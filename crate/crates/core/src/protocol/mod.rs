//! Wire protocol: typed messages, number and unit grammars, the line codec
//! and stream framing.

#[cfg(any(test, feature = "arbitrary"))]
pub mod arbitrary;
pub mod codec;
mod error_code;
pub mod frame;
pub mod message;
pub mod number;
pub mod quantity;
mod status;

pub use codec::{parse_reply, parse_request, render_reply, render_request};
pub use error_code::ErrorCode;
pub use message::*;
pub use number::{parse_integer, parse_real, render_real};
pub use quantity::{parse_quantity, Quantity, Unit, UnitFamily};
pub use status::{exec_status_of, ExecStatus};

/// Version string returned by every SRVPROTOVER handler.
pub const PROTOCOL_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("malformed number {0:?}")]
    MalformedNumber(String),
    #[error("malformed quantity {0:?}")]
    MalformedQuantity(String),
    #[error("unknown status code {0}")]
    UnknownStatusCode(u64),
    #[error("invalid base64 field {0:?}")]
    InvalidBase64(String),
}

impl ProtocolError {
    /// Registry code a server answers with when a request fails to parse.
    pub fn error_code(&self) -> ErrorCode {
        match self {
            ProtocolError::UnknownCommand(_) => ErrorCode::UNKNOWN_COMMAND,
            _ => ErrorCode::MALFORMED_REQUEST,
        }
    }
}
