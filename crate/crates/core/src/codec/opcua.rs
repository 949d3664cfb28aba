//! OPC UA binary encoding of the Read and Write services, carried in
//! single-chunk `MSG` messages of an unsecured secure channel.
//!
//! Only the built-in types needed by these four service bodies are
//! implemented. Channel setup (Hello, OpenSecureChannel) and sessions are
//! out of scope: a steady-state exchange starts directly with `MSG` chunks.

use super::buf::Reader;
use super::{CodecError, Result, Scalar, ScalarType};

pub const OPC_UA_TCP_PORT: u16 = 4840;
pub const CHUNK_HEADER_LEN: usize = 8;
/// Message header, secure channel id, token id, sequence number, request id.
pub const MSG_HEADER_LEN: usize = 24;

pub const READ_REQUEST_ID: u32 = 631;
pub const READ_RESPONSE_ID: u32 = 634;
pub const WRITE_REQUEST_ID: u32 = 673;
pub const WRITE_RESPONSE_ID: u32 = 676;

pub const ATTRIBUTE_VALUE: u32 = 13;
pub const STATUS_GOOD: u32 = 0;
pub const STATUS_BAD_NODE_ID_UNKNOWN: u32 = 0x8034_0000;
pub const STATUS_BAD_TYPE_MISMATCH: u32 = 0x8074_0000;
pub const STATUS_BAD_NOT_WRITABLE: u32 = 0x803B_0000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeId {
    Numeric { ns: u16, id: u32 },
    String { ns: u16, id: String },
    Guid { ns: u16, id: [u8; 16] },
    Opaque { ns: u16, id: Vec<u8> },
}

impl NodeId {
    pub fn numeric(ns: u16, id: u32) -> Self {
        NodeId::Numeric { ns, id }
    }

    pub fn string(ns: u16, id: impl Into<String>) -> Self {
        NodeId::String { ns, id: id.into() }
    }

    /// Encoded size; numeric ids use the most compact form.
    pub fn encoded_len(&self) -> usize {
        match self {
            NodeId::Numeric { ns: 0, id } if *id <= 0xFF => 2,
            NodeId::Numeric { ns, id } if *ns <= 0xFF && *id <= 0xFFFF => 4,
            NodeId::Numeric { .. } => 7,
            NodeId::String { id, .. } => 7 + id.len(),
            NodeId::Guid { .. } => 19,
            NodeId::Opaque { id, .. } => 7 + id.len(),
        }
    }

    fn encode(&self, w: &mut Vec<u8>) -> Result<()> {
        match self {
            NodeId::Numeric { ns: 0, id } if *id <= 0xFF => {
                w.extend_from_slice(&[0x00, *id as u8]);
            }
            NodeId::Numeric { ns, id } if *ns <= 0xFF && *id <= 0xFFFF => {
                w.extend_from_slice(&[0x01, *ns as u8]);
                w.extend_from_slice(&(*id as u16).to_le_bytes());
            }
            NodeId::Numeric { ns, id } => {
                w.push(0x02);
                w.extend_from_slice(&ns.to_le_bytes());
                w.extend_from_slice(&id.to_le_bytes());
            }
            NodeId::String { ns, id } => {
                w.push(0x03);
                w.extend_from_slice(&ns.to_le_bytes());
                put_string(w, Some(id))?;
            }
            NodeId::Guid { ns, id } => {
                w.push(0x04);
                w.extend_from_slice(&ns.to_le_bytes());
                w.extend_from_slice(id);
            }
            NodeId::Opaque { ns, id } => {
                w.push(0x05);
                w.extend_from_slice(&ns.to_le_bytes());
                put_len(w, id.len())?;
                w.extend_from_slice(id);
            }
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let enc = r.u8()?;
        Ok(match enc {
            0x00 => NodeId::Numeric {
                ns: 0,
                id: u32::from(r.u8()?),
            },
            0x01 => {
                let ns = u16::from(r.u8()?);
                let id = u32::from(r.u16_le()?);
                NodeId::Numeric { ns, id }
            }
            0x02 => {
                let ns = r.u16_le()?;
                NodeId::Numeric {
                    ns,
                    id: r.u32_le()?,
                }
            }
            0x03 => {
                let ns = r.u16_le()?;
                let id = get_string(r)?
                    .ok_or_else(|| CodecError::malformed("NodeId", "null string identifier"))?;
                NodeId::String { ns, id }
            }
            0x04 => {
                let ns = r.u16_le()?;
                NodeId::Guid { ns, id: r.bytes()? }
            }
            0x05 => {
                let ns = r.u16_le()?;
                let id = get_byte_string(r)?
                    .ok_or_else(|| CodecError::malformed("NodeId", "null opaque identifier"))?;
                NodeId::Opaque { ns, id }
            }
            other => {
                return Err(CodecError::unsupported(
                    "NodeId encoding",
                    format!("0x{other:02X}"),
                ))
            }
        })
    }
}

/// Secure channel and sequence fields of a `MSG` chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelHeader {
    pub secure_channel_id: u32,
    pub token_id: u32,
    pub sequence_number: u32,
    pub request_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestHeader {
    pub authentication_token: NodeId,
    /// 100 ns ticks since 1601-01-01.
    pub timestamp: i64,
    pub request_handle: u32,
    pub return_diagnostics: u32,
    pub audit_entry_id: Option<String>,
    pub timeout_hint: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseHeader {
    pub timestamp: i64,
    pub request_handle: u32,
    pub service_result: u32,
}

/// Value attribute with optional status and timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DataValue {
    pub value: Option<Scalar>,
    pub status: Option<u32>,
    pub source_timestamp: Option<i64>,
    pub server_timestamp: Option<i64>,
}

impl DataValue {
    pub fn of(value: Scalar) -> Self {
        DataValue {
            value: Some(value),
            ..Default::default()
        }
    }

    fn encode(&self, w: &mut Vec<u8>) {
        let mask = u8::from(self.value.is_some())
            | u8::from(self.status.is_some()) << 1
            | u8::from(self.source_timestamp.is_some()) << 2
            | u8::from(self.server_timestamp.is_some()) << 3;
        w.push(mask);
        if let Some(v) = self.value {
            w.push(v.ty.tag());
            w.extend_from_slice(&v.bits.to_le_bytes());
        }
        if let Some(s) = self.status {
            w.extend_from_slice(&s.to_le_bytes());
        }
        if let Some(t) = self.source_timestamp {
            w.extend_from_slice(&t.to_le_bytes());
        }
        if let Some(t) = self.server_timestamp {
            w.extend_from_slice(&t.to_le_bytes());
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let mask = r.u8()?;
        if mask & !0x0F != 0 {
            return Err(CodecError::unsupported(
                "DataValue",
                format!("encoding mask 0x{mask:02X}"),
            ));
        }
        let value = if mask & 0x01 != 0 {
            Some(get_variant(r)?)
        } else {
            None
        };
        let status = if mask & 0x02 != 0 {
            Some(r.u32_le()?)
        } else {
            None
        };
        let source_timestamp = if mask & 0x04 != 0 {
            Some(r.i64_le()?)
        } else {
            None
        };
        let server_timestamp = if mask & 0x08 != 0 {
            Some(r.i64_le()?)
        } else {
            None
        };
        Ok(DataValue {
            value,
            status,
            source_timestamp,
            server_timestamp,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadValueId {
    pub node_id: NodeId,
    pub attribute_id: u32,
    pub index_range: Option<String>,
    pub data_encoding_ns: u16,
    pub data_encoding_name: Option<String>,
}

impl ReadValueId {
    pub fn value_of(node_id: NodeId) -> Self {
        ReadValueId {
            node_id,
            attribute_id: ATTRIBUTE_VALUE,
            index_range: None,
            data_encoding_ns: 0,
            data_encoding_name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteValue {
    pub node_id: NodeId,
    pub attribute_id: u32,
    pub index_range: Option<String>,
    pub value: DataValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadRequest {
    pub header: RequestHeader,
    pub max_age: f64,
    /// 0 source, 1 server, 2 both, 3 neither.
    pub timestamps_to_return: u32,
    pub nodes: Vec<ReadValueId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadResponse {
    pub header: ResponseHeader,
    pub results: Vec<DataValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteRequest {
    pub header: RequestHeader,
    pub nodes: Vec<WriteValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteResponse {
    pub header: ResponseHeader,
    pub results: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceBody {
    ReadRequest(ReadRequest),
    ReadResponse(ReadResponse),
    WriteRequest(WriteRequest),
    WriteResponse(WriteResponse),
}

impl ServiceBody {
    pub fn type_id(&self) -> u32 {
        match self {
            ServiceBody::ReadRequest(_) => READ_REQUEST_ID,
            ServiceBody::ReadResponse(_) => READ_RESPONSE_ID,
            ServiceBody::WriteRequest(_) => WRITE_REQUEST_ID,
            ServiceBody::WriteResponse(_) => WRITE_RESPONSE_ID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpcUaMessage {
    pub channel: ChannelHeader,
    pub body: ServiceBody,
}

impl OpcUaMessage {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut w = Vec::with_capacity(256);
        w.extend_from_slice(b"MSGF");
        w.extend_from_slice(&[0; 4]);
        w.extend_from_slice(&self.channel.secure_channel_id.to_le_bytes());
        w.extend_from_slice(&self.channel.token_id.to_le_bytes());
        w.extend_from_slice(&self.channel.sequence_number.to_le_bytes());
        w.extend_from_slice(&self.channel.request_id.to_le_bytes());
        NodeId::numeric(0, self.body.type_id()).encode(&mut w)?;
        match &self.body {
            ServiceBody::ReadRequest(req) => {
                put_request_header(&mut w, &req.header)?;
                w.extend_from_slice(&req.max_age.to_le_bytes());
                w.extend_from_slice(&req.timestamps_to_return.to_le_bytes());
                put_len(&mut w, req.nodes.len())?;
                for n in &req.nodes {
                    n.node_id.encode(&mut w)?;
                    w.extend_from_slice(&n.attribute_id.to_le_bytes());
                    put_string(&mut w, n.index_range.as_deref())?;
                    w.extend_from_slice(&n.data_encoding_ns.to_le_bytes());
                    put_string(&mut w, n.data_encoding_name.as_deref())?;
                }
            }
            ServiceBody::ReadResponse(resp) => {
                put_response_header(&mut w, &resp.header);
                put_len(&mut w, resp.results.len())?;
                for dv in &resp.results {
                    dv.encode(&mut w);
                }
                put_null_array(&mut w);
            }
            ServiceBody::WriteRequest(req) => {
                put_request_header(&mut w, &req.header)?;
                put_len(&mut w, req.nodes.len())?;
                for n in &req.nodes {
                    n.node_id.encode(&mut w)?;
                    w.extend_from_slice(&n.attribute_id.to_le_bytes());
                    put_string(&mut w, n.index_range.as_deref())?;
                    n.value.encode(&mut w);
                }
            }
            ServiceBody::WriteResponse(resp) => {
                put_response_header(&mut w, &resp.header);
                put_len(&mut w, resp.results.len())?;
                for s in &resp.results {
                    w.extend_from_slice(&s.to_le_bytes());
                }
                put_null_array(&mut w);
            }
        }
        let size =
            u32::try_from(w.len()).map_err(|_| CodecError::LimitExceeded("message size".into()))?;
        w[4..8].copy_from_slice(&size.to_le_bytes());
        Ok(w)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        const WHAT: &str = "OPC UA message";
        let mut r = Reader::new(bytes, WHAT);
        let header: [u8; 4] = r.bytes()?;
        if &header[..3] != b"MSG" {
            return Err(CodecError::malformed(
                WHAT,
                format!("message type {:?}", &header[..3]),
            ));
        }
        if header[3] != b'F' {
            return Err(CodecError::unsupported(WHAT, "intermediate or abort chunk"));
        }
        let size = r.u32_le()? as usize;
        if size != bytes.len() {
            return Err(CodecError::malformed(
                WHAT,
                format!("size field {size} but {} bytes given", bytes.len()),
            ));
        }
        let channel = ChannelHeader {
            secure_channel_id: r.u32_le()?,
            token_id: r.u32_le()?,
            sequence_number: r.u32_le()?,
            request_id: r.u32_le()?,
        };
        let type_id = match NodeId::decode(&mut r)? {
            NodeId::Numeric { ns: 0, id } => id,
            other => {
                return Err(CodecError::unsupported(
                    "service type id",
                    format!("{other:?}"),
                ))
            }
        };
        let body = match type_id {
            READ_REQUEST_ID => {
                let header = get_request_header(&mut r)?;
                let max_age = r.f64_le()?;
                let timestamps_to_return = r.u32_le()?;
                let count = get_count(&mut r)?;
                let mut nodes = Vec::with_capacity(count.min(r.remaining()));
                for _ in 0..count {
                    nodes.push(ReadValueId {
                        node_id: NodeId::decode(&mut r)?,
                        attribute_id: r.u32_le()?,
                        index_range: get_string(&mut r)?,
                        data_encoding_ns: r.u16_le()?,
                        data_encoding_name: get_string(&mut r)?,
                    });
                }
                ServiceBody::ReadRequest(ReadRequest {
                    header,
                    max_age,
                    timestamps_to_return,
                    nodes,
                })
            }
            READ_RESPONSE_ID => {
                let header = get_response_header(&mut r)?;
                let count = get_count(&mut r)?;
                let mut results = Vec::with_capacity(count.min(r.remaining()));
                for _ in 0..count {
                    results.push(DataValue::decode(&mut r)?);
                }
                expect_empty_diagnostics(&mut r)?;
                ServiceBody::ReadResponse(ReadResponse { header, results })
            }
            WRITE_REQUEST_ID => {
                let header = get_request_header(&mut r)?;
                let count = get_count(&mut r)?;
                let mut nodes = Vec::with_capacity(count.min(r.remaining()));
                for _ in 0..count {
                    nodes.push(WriteValue {
                        node_id: NodeId::decode(&mut r)?,
                        attribute_id: r.u32_le()?,
                        index_range: get_string(&mut r)?,
                        value: DataValue::decode(&mut r)?,
                    });
                }
                ServiceBody::WriteRequest(WriteRequest { header, nodes })
            }
            WRITE_RESPONSE_ID => {
                let header = get_response_header(&mut r)?;
                let count = get_count(&mut r)?;
                let mut results = Vec::with_capacity(count.min(r.remaining()));
                for _ in 0..count {
                    results.push(r.u32_le()?);
                }
                expect_empty_diagnostics(&mut r)?;
                ServiceBody::WriteResponse(WriteResponse { header, results })
            }
            other => {
                return Err(CodecError::unsupported(
                    "OPC UA service",
                    format!("type id {other}"),
                ))
            }
        };
        r.finish()?;
        Ok(OpcUaMessage { channel, body })
    }
}

/// Total length announced by the first eight bytes of a chunk.
pub fn chunk_len(header: [u8; CHUNK_HEADER_LEN]) -> Result<usize> {
    if &header[..3] != b"MSG" {
        return Err(CodecError::malformed(
            "OPC UA chunk header",
            format!("message type {:?}", &header[..3]),
        ));
    }
    let len = u32::from_le_bytes([header[4], header[5], header[6], header[7]]) as usize;
    if len < MSG_HEADER_LEN {
        return Err(CodecError::malformed(
            "OPC UA chunk header",
            format!("size {len}"),
        ));
    }
    Ok(len)
}

fn put_len(w: &mut Vec<u8>, len: usize) -> Result<()> {
    let len = i32::try_from(len).map_err(|_| CodecError::LimitExceeded("array length".into()))?;
    w.extend_from_slice(&len.to_le_bytes());
    Ok(())
}

fn put_null_array(w: &mut Vec<u8>) {
    w.extend_from_slice(&(-1i32).to_le_bytes());
}

fn put_string(w: &mut Vec<u8>, s: Option<&str>) -> Result<()> {
    match s {
        None => put_null_array(w),
        Some(s) => {
            put_len(w, s.len())?;
            w.extend_from_slice(s.as_bytes());
        }
    }
    Ok(())
}

fn get_byte_string(r: &mut Reader<'_>) -> Result<Option<Vec<u8>>> {
    let len = r.i32_le()?;
    if len < 0 {
        return Ok(None);
    }
    Ok(Some(r.take(len as usize)?.to_vec()))
}

fn get_string(r: &mut Reader<'_>) -> Result<Option<String>> {
    match get_byte_string(r)? {
        None => Ok(None),
        Some(b) => String::from_utf8(b)
            .map(Some)
            .map_err(|_| CodecError::malformed("String", "invalid UTF-8")),
    }
}

/// Array length; a null array counts as empty.
fn get_count(r: &mut Reader<'_>) -> Result<usize> {
    let len = r.i32_le()?;
    Ok(len.max(0) as usize)
}

fn expect_empty_diagnostics(r: &mut Reader<'_>) -> Result<()> {
    if get_count(r)? != 0 {
        return Err(CodecError::unsupported(
            "DiagnosticInfo",
            "non-empty diagnostics",
        ));
    }
    Ok(())
}

fn get_variant(r: &mut Reader<'_>) -> Result<Scalar> {
    let tag = r.u8()?;
    let ty = ScalarType::from_tag(tag)
        .ok_or_else(|| CodecError::unsupported("Variant", format!("type mask 0x{tag:02X}")))?;
    Ok(Scalar {
        ty,
        bits: r.u32_le()?,
    })
}

fn put_null_extension_object(w: &mut Vec<u8>) {
    w.extend_from_slice(&[0x00, 0x00, 0x00]);
}

fn expect_null_extension_object(r: &mut Reader<'_>) -> Result<()> {
    let b: [u8; 3] = r.bytes()?;
    if b != [0, 0, 0] {
        return Err(CodecError::unsupported(
            "additional header",
            "non-null extension object",
        ));
    }
    Ok(())
}

fn put_request_header(w: &mut Vec<u8>, h: &RequestHeader) -> Result<()> {
    h.authentication_token.encode(w)?;
    w.extend_from_slice(&h.timestamp.to_le_bytes());
    w.extend_from_slice(&h.request_handle.to_le_bytes());
    w.extend_from_slice(&h.return_diagnostics.to_le_bytes());
    put_string(w, h.audit_entry_id.as_deref())?;
    w.extend_from_slice(&h.timeout_hint.to_le_bytes());
    put_null_extension_object(w);
    Ok(())
}

fn get_request_header(r: &mut Reader<'_>) -> Result<RequestHeader> {
    let h = RequestHeader {
        authentication_token: NodeId::decode(r)?,
        timestamp: r.i64_le()?,
        request_handle: r.u32_le()?,
        return_diagnostics: r.u32_le()?,
        audit_entry_id: get_string(r)?,
        timeout_hint: r.u32_le()?,
    };
    expect_null_extension_object(r)?;
    Ok(h)
}

fn put_response_header(w: &mut Vec<u8>, h: &ResponseHeader) {
    w.extend_from_slice(&h.timestamp.to_le_bytes());
    w.extend_from_slice(&h.request_handle.to_le_bytes());
    w.extend_from_slice(&h.service_result.to_le_bytes());
    w.push(0x00); // empty DiagnosticInfo
    put_null_array(w); // string table
    put_null_extension_object(w);
}

fn get_response_header(r: &mut Reader<'_>) -> Result<ResponseHeader> {
    let timestamp = r.i64_le()?;
    let request_handle = r.u32_le()?;
    let service_result = r.u32_le()?;
    if r.u8()? != 0 {
        return Err(CodecError::unsupported(
            "DiagnosticInfo",
            "non-empty service diagnostics",
        ));
    }
    if get_count(r)? != 0 {
        return Err(CodecError::unsupported(
            "ResponseHeader",
            "non-empty string table",
        ));
    }
    expect_null_extension_object(r)?;
    Ok(ResponseHeader {
        timestamp,
        request_handle,
        service_result,
    })
}
