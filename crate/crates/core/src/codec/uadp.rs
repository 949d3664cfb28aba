//! UADP network messages (OPC UA PubSub over UDP).
//!
//! The encoder emits one fixed header profile: publisher id (Byte), group
//! header with writer group id and sequence number, payload header, and
//! key-frame data set messages whose fields are Variant encoded, so every
//! field costs its 4 data bytes plus one type byte.

use super::buf::Reader;
use super::{CodecError, Result, Scalar, ScalarType};

pub const UADP_VERSION: u8 = 1;
pub const PUBSUB_UDP_PORT: u16 = 4840;

const FLAG_PUBLISHER_ID: u8 = 0x10;
const FLAG_GROUP_HEADER: u8 = 0x20;
const FLAG_PAYLOAD_HEADER: u8 = 0x40;
const FLAG_EXTENDED_1: u8 = 0x80;
const NETWORK_FLAGS: u8 =
    UADP_VERSION | FLAG_PUBLISHER_ID | FLAG_GROUP_HEADER | FLAG_PAYLOAD_HEADER | FLAG_EXTENDED_1;
/// Publisher id type Byte, no other extended features.
const EXTENDED_FLAGS_1: u8 = 0x00;
/// Writer group id and sequence number present.
const GROUP_FLAGS: u8 = 0x01 | 0x08;
/// Valid, Variant field encoding, no optional header fields.
const DATASET_FLAGS_1: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSetMessage {
    pub writer_id: u16,
    pub fields: Vec<Scalar>,
}

impl DataSetMessage {
    fn encoded_len(&self) -> usize {
        3 + 5 * self.fields.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UadpNetworkMessage {
    pub publisher_id: u8,
    pub writer_group_id: u16,
    pub sequence_number: u16,
    pub messages: Vec<DataSetMessage>,
}

impl UadpNetworkMessage {
    pub fn field_count(&self) -> usize {
        self.messages.iter().map(|m| m.fields.len()).sum()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let count = self.messages.len();
        if count == 0 || count > u8::MAX as usize {
            return Err(CodecError::LimitExceeded(format!(
                "network message must carry 1..=255 data set messages, got {count}"
            )));
        }
        let mut w = Vec::with_capacity(64);
        w.extend_from_slice(&[
            NETWORK_FLAGS,
            EXTENDED_FLAGS_1,
            self.publisher_id,
            GROUP_FLAGS,
        ]);
        w.extend_from_slice(&self.writer_group_id.to_le_bytes());
        w.extend_from_slice(&self.sequence_number.to_le_bytes());
        w.push(count as u8);
        for m in &self.messages {
            w.extend_from_slice(&m.writer_id.to_le_bytes());
        }
        if count > 1 {
            for m in &self.messages {
                let size = u16::try_from(m.encoded_len())
                    .map_err(|_| CodecError::LimitExceeded("data set message size".into()))?;
                w.extend_from_slice(&size.to_le_bytes());
            }
        }
        for m in &self.messages {
            let fields = u16::try_from(m.fields.len())
                .map_err(|_| CodecError::LimitExceeded("field count".into()))?;
            w.push(DATASET_FLAGS_1);
            w.extend_from_slice(&fields.to_le_bytes());
            for f in &m.fields {
                w.push(f.ty.tag());
                w.extend_from_slice(&f.bits.to_le_bytes());
            }
        }
        Ok(w)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        const WHAT: &str = "UADP network message";
        let mut r = Reader::new(bytes, WHAT);
        let flags = r.u8()?;
        if flags & 0x0F != UADP_VERSION {
            return Err(CodecError::malformed(
                WHAT,
                format!("UADP version {}", flags & 0x0F),
            ));
        }
        if flags != NETWORK_FLAGS {
            return Err(CodecError::unsupported(
                WHAT,
                format!("flags 0x{flags:02X}"),
            ));
        }
        let ext = r.u8()?;
        if ext != EXTENDED_FLAGS_1 {
            return Err(CodecError::unsupported(
                WHAT,
                format!("extended flags 0x{ext:02X}"),
            ));
        }
        let publisher_id = r.u8()?;
        let group_flags = r.u8()?;
        if group_flags != GROUP_FLAGS {
            return Err(CodecError::unsupported(
                WHAT,
                format!("group flags 0x{group_flags:02X}"),
            ));
        }
        let writer_group_id = r.u16_le()?;
        let sequence_number = r.u16_le()?;
        let count = r.u8()? as usize;
        if count == 0 {
            return Err(CodecError::malformed(WHAT, "no data set messages"));
        }
        let mut writer_ids = Vec::with_capacity(count);
        for _ in 0..count {
            writer_ids.push(r.u16_le()?);
        }
        let mut sizes = Vec::new();
        if count > 1 {
            for _ in 0..count {
                sizes.push(r.u16_le()? as usize);
            }
        }
        let mut messages = Vec::with_capacity(count);
        for (i, writer_id) in writer_ids.into_iter().enumerate() {
            let start = r.position();
            let ds_flags = r.u8()?;
            if ds_flags != DATASET_FLAGS_1 {
                return Err(CodecError::unsupported(
                    "UADP data set message",
                    format!("flags 0x{ds_flags:02X}"),
                ));
            }
            let n = r.u16_le()? as usize;
            let mut fields = Vec::with_capacity(n.min(r.remaining() / 5));
            for _ in 0..n {
                let tag = r.u8()?;
                let ty = ScalarType::from_tag(tag).ok_or_else(|| {
                    CodecError::unsupported("UADP field", format!("type 0x{tag:02X}"))
                })?;
                fields.push(Scalar {
                    ty,
                    bits: r.u32_le()?,
                });
            }
            if let Some(&size) = sizes.get(i) {
                if r.position() - start != size {
                    return Err(CodecError::malformed(
                        WHAT,
                        format!(
                            "data set message {i} is {} bytes, header says {size}",
                            r.position() - start
                        ),
                    ));
                }
            }
            messages.push(DataSetMessage { writer_id, fields });
        }
        r.finish()?;
        Ok(UadpNetworkMessage {
            publisher_id,
            writer_group_id,
            sequence_number,
            messages,
        })
    }
}
