//! Wire codecs for the five interfaces.
//!
//! Every codec is a pair of pure functions over owned message values. The
//! encoded length of a message, wrapped in its transport headers by
//! [`crate::frame::wire_bytes`], equals the frame model's size for the same
//! message and value count.

mod buf;
pub mod opcua;
pub mod ouc;
pub mod s7;
pub mod sample;
pub mod stock;
pub mod uadp;

use serde::{Deserialize, Serialize};

use crate::interface::InterfaceId;

pub use opcua::OpcUaMessage;
pub use ouc::{ByteOrder, OucPayload};
pub use s7::S7Message;
pub use uadp::UadpNetworkMessage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    /// Truncated input, bad magic numbers or inconsistent length fields.
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("unsupported {what}: {detail}")]
    Unsupported { what: &'static str, detail: String },
}

impl CodecError {
    pub(crate) fn malformed(what: &'static str, detail: impl Into<String>) -> Self {
        CodecError::Malformed {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn unsupported(what: &'static str, detail: impl Into<String>) -> Self {
        CodecError::Unsupported {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// OPC UA built-in type ids of the supported 4-byte scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum ScalarType {
    Int32 = 6,
    UInt32 = 7,
    Float = 10,
}

impl ScalarType {
    pub fn from_tag(tag: u8) -> Option<ScalarType> {
        match tag {
            6 => Some(ScalarType::Int32),
            7 => Some(ScalarType::UInt32),
            10 => Some(ScalarType::Float),
            _ => None,
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }
}

/// A 4-byte data value together with its type tag. The value is kept as
/// raw bits so that every bit pattern, including NaNs, survives a round
/// trip and compares equal to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scalar {
    pub ty: ScalarType,
    pub bits: u32,
}

impl Scalar {
    pub fn uint32(v: u32) -> Self {
        Scalar {
            ty: ScalarType::UInt32,
            bits: v,
        }
    }

    pub fn int32(v: i32) -> Self {
        Scalar {
            ty: ScalarType::Int32,
            bits: v as u32,
        }
    }

    pub fn float(v: f32) -> Self {
        Scalar {
            ty: ScalarType::Float,
            bits: v.to_bits(),
        }
    }
}

/// Decoded form of any on-the-wire message.
#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    /// OUC datagram or TCP segment payload.
    Ouc(OucPayload),
    S7(S7Message),
    OpcUa(OpcUaMessage),
    Uadp(UadpNetworkMessage),
}

impl WireMessage {
    pub fn interface_family(&self) -> &'static str {
        match self {
            WireMessage::Ouc(_) => "ouc",
            WireMessage::S7(_) => "s7",
            WireMessage::OpcUa(_) => "opcua",
            WireMessage::Uadp(_) => "uadp",
        }
    }
}

pub fn encode(msg: &WireMessage) -> Result<Vec<u8>> {
    match msg {
        WireMessage::Ouc(p) => Ok(p.encode()),
        WireMessage::S7(m) => m.encode(),
        WireMessage::OpcUa(m) => m.encode(),
        WireMessage::Uadp(m) => m.encode(),
    }
}

/// Decodes one complete message of the given interface. OUC payloads are
/// read in network byte order; use [`OucPayload::decode`] for peers that
/// send little-endian data.
pub fn decode(bytes: &[u8], expected: InterfaceId) -> Result<WireMessage> {
    match expected {
        InterfaceId::OucUdp | InterfaceId::OucTcp => {
            OucPayload::decode(bytes, ByteOrder::BigEndian).map(WireMessage::Ouc)
        }
        InterfaceId::S7 => S7Message::decode(bytes).map(WireMessage::S7),
        InterfaceId::OpcUaRead | InterfaceId::OpcUaWrite => {
            OpcUaMessage::decode(bytes).map(WireMessage::OpcUa)
        }
        InterfaceId::Uadp => UadpNetworkMessage::decode(bytes).map(WireMessage::Uadp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispatch_by_interface() {
        let msg = WireMessage::Uadp(stock::uadp_message(1, 7, 0, &[Scalar::uint32(5)]));
        let bytes = encode(&msg).unwrap();
        assert_eq!(decode(&bytes, InterfaceId::Uadp).unwrap(), msg);
        assert!(decode(&bytes, InterfaceId::S7).is_err());
    }

    #[test]
    fn empty_ouc_payload() {
        let msg = WireMessage::Ouc(OucPayload::new(vec![], ByteOrder::BigEndian));
        assert!(encode(&msg).unwrap().is_empty());
    }

    #[test]
    fn scalar_tags() {
        for t in [ScalarType::Int32, ScalarType::UInt32, ScalarType::Float] {
            assert_eq!(ScalarType::from_tag(t.tag()), Some(t));
        }
        assert_eq!(ScalarType::from_tag(1), None);
        assert_eq!(Scalar::int32(-1).bits, u32::MAX);
    }
}
