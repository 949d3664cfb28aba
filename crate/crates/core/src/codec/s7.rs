//! S7 communication over ISO-on-TCP: TPKT (RFC 1006) framing, COTP
//! connection setup and data transfer, and the S7 PDUs needed to read
//! data blocks (setup communication and read variable).

use super::buf::Reader;
use super::{CodecError, Result};

pub const ISO_TCP_PORT: u16 = 102;
pub const TPKT_VERSION: u8 = 3;
pub const TPKT_HEADER_LEN: usize = 4;
const COTP_DT_LEN: usize = 3;
const PROTOCOL_ID: u8 = 0x32;

const ROSCTR_JOB: u8 = 0x01;
const ROSCTR_ACK_DATA: u8 = 0x03;
const FN_READ_VAR: u8 = 0x04;
const FN_SETUP_COMM: u8 = 0xF0;

const COTP_CR: u8 = 0xE0;
const COTP_CC: u8 = 0xD0;
const COTP_DT: u8 = 0xF0;

const JOB_HEADER_LEN: usize = 10;
const ACK_HEADER_LEN: usize = 12;
const REQUEST_ITEM_LEN: usize = 12;

/// S7 header, parameter header and one data item header of a read
/// response: PDU bytes that are not data.
pub const ACK_ITEM_OVERHEAD: usize = ACK_HEADER_LEN + 2 + 4;
/// Smallest PDU that still carries one 4-byte value in a read response.
pub const MIN_PDU: u16 = (ACK_ITEM_OVERHEAD + 4) as u16;
/// Largest byte offset expressible in an S7ANY address (21 bits).
pub const MAX_BYTE_ADDRESS: u32 = (1 << 21) - 1;

/// Item return code for a successful access.
pub const RC_SUCCESS: u8 = 0xFF;
pub const RC_HARDWARE_FAULT: u8 = 0x01;
pub const RC_ACCESS_DENIED: u8 = 0x03;
pub const RC_ADDRESS_OUT_OF_RANGE: u8 = 0x05;
pub const RC_DATA_TYPE_NOT_SUPPORTED: u8 = 0x06;
pub const RC_OBJECT_DOES_NOT_EXIST: u8 = 0x0A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Area {
    Inputs = 0x81,
    Outputs = 0x82,
    Flags = 0x83,
    DataBlock = 0x84,
}

impl Area {
    fn from_code(code: u8) -> Result<Area> {
        Ok(match code {
            0x81 => Area::Inputs,
            0x82 => Area::Outputs,
            0x83 => Area::Flags,
            0x84 => Area::DataBlock,
            other => {
                return Err(CodecError::unsupported(
                    "S7 memory area",
                    format!("0x{other:02X}"),
                ))
            }
        })
    }
}

/// COTP connection request or confirm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CotpConnect {
    pub dst_ref: u16,
    pub src_ref: u16,
    pub src_tsap: u16,
    pub dst_tsap: u16,
    /// TPDU size code: 2^code bytes.
    pub tpdu_size: u8,
}

impl CotpConnect {
    /// Client request addressing rack 0, slot `slot` as a PG connection.
    pub fn request(slot: u8) -> Self {
        CotpConnect {
            dst_ref: 0,
            src_ref: 0x0001,
            src_tsap: 0x0100,
            dst_tsap: 0x0100 | u16::from(slot),
            tpdu_size: 0x0A,
        }
    }

    pub fn confirm(&self, src_ref: u16) -> Self {
        CotpConnect {
            dst_ref: self.src_ref,
            src_ref,
            src_tsap: self.src_tsap,
            dst_tsap: self.dst_tsap,
            tpdu_size: self.tpdu_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetupCommunication {
    pub pdu_ref: u16,
    pub max_amq_calling: u16,
    pub max_amq_called: u16,
    pub pdu_length: u16,
}

/// Error class and code of an Ack_Data header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HeaderError {
    pub class: u8,
    pub code: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetupAck {
    pub error: HeaderError,
    pub params: SetupCommunication,
}

/// One contiguous byte range to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReadItem {
    pub area: Area,
    pub db_number: u16,
    /// Byte offset within the area.
    pub start: u32,
    /// Number of bytes.
    pub length: u16,
}

impl ReadItem {
    pub fn db(db_number: u16, start: u32, length: u16) -> Self {
        ReadItem {
            area: Area::DataBlock,
            db_number,
            start,
            length,
        }
    }
}

/// Read-variable request ("Job").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadJob {
    pub pdu_ref: u16,
    pub items: Vec<ReadItem>,
}

/// Transport size of returned data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DataTransport {
    /// Length field counts bits.
    Byte = 0x04,
    /// Length field counts bits.
    Integer = 0x05,
    /// Length field counts bytes.
    Real = 0x07,
    /// Length field counts bytes.
    OctetString = 0x09,
}

impl DataTransport {
    fn from_code(code: u8) -> Result<DataTransport> {
        Ok(match code {
            0x04 => DataTransport::Byte,
            0x05 => DataTransport::Integer,
            0x07 => DataTransport::Real,
            0x09 => DataTransport::OctetString,
            other => {
                return Err(CodecError::unsupported(
                    "S7 transport size",
                    format!("0x{other:02X}"),
                ))
            }
        })
    }

    fn length_in_bits(self) -> bool {
        matches!(self, DataTransport::Byte | DataTransport::Integer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadResult {
    Data {
        transport: DataTransport,
        data: Vec<u8>,
    },
    /// Item-level error return code.
    Failed(u8),
}

impl ReadResult {
    pub fn bytes(data: Vec<u8>) -> Self {
        ReadResult::Data {
            transport: DataTransport::Byte,
            data,
        }
    }

    pub fn data(&self) -> Option<&[u8]> {
        match self {
            ReadResult::Data { data, .. } => Some(data),
            ReadResult::Failed(_) => None,
        }
    }
}

/// Read-variable response ("Ack_Data").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadAck {
    pub pdu_ref: u16,
    pub error: HeaderError,
    pub items: Vec<ReadResult>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum S7Message {
    ConnectRequest(CotpConnect),
    ConnectConfirm(CotpConnect),
    SetupRequest(SetupCommunication),
    SetupResponse(SetupAck),
    ReadJob(ReadJob),
    ReadAck(ReadAck),
}

impl S7Message {
    /// Length of the S7 PDU (header, parameters and data), the quantity
    /// bounded by the negotiated PDU size. Zero for COTP-only messages.
    pub fn pdu_len(&self) -> usize {
        match self {
            S7Message::ConnectRequest(_) | S7Message::ConnectConfirm(_) => 0,
            S7Message::SetupRequest(_) => JOB_HEADER_LEN + 8,
            S7Message::SetupResponse(_) => ACK_HEADER_LEN + 8,
            S7Message::ReadJob(j) => JOB_HEADER_LEN + 2 + REQUEST_ITEM_LEN * j.items.len(),
            S7Message::ReadAck(a) => ACK_HEADER_LEN + 2 + ack_data_len(&a.items),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = vec![TPKT_VERSION, 0, 0, 0];
        match self {
            S7Message::ConnectRequest(c) => encode_cotp_connect(&mut out, COTP_CR, c),
            S7Message::ConnectConfirm(c) => encode_cotp_connect(&mut out, COTP_CC, c),
            S7Message::SetupRequest(s) => {
                out.extend_from_slice(&[2, COTP_DT, 0x80]);
                s7_header(&mut out, ROSCTR_JOB, s.pdu_ref, 8, 0, None);
                setup_params(&mut out, s);
            }
            S7Message::SetupResponse(s) => {
                out.extend_from_slice(&[2, COTP_DT, 0x80]);
                s7_header(
                    &mut out,
                    ROSCTR_ACK_DATA,
                    s.params.pdu_ref,
                    8,
                    0,
                    Some(s.error),
                );
                setup_params(&mut out, &s.params);
            }
            S7Message::ReadJob(j) => {
                if j.items.is_empty() || j.items.len() > u8::MAX as usize {
                    return Err(CodecError::LimitExceeded(format!(
                        "read job must carry 1..=255 items, got {}",
                        j.items.len()
                    )));
                }
                let param_len = 2 + REQUEST_ITEM_LEN * j.items.len();
                let param_len = u16::try_from(param_len)
                    .map_err(|_| CodecError::LimitExceeded("parameter length".into()))?;
                out.extend_from_slice(&[2, COTP_DT, 0x80]);
                s7_header(&mut out, ROSCTR_JOB, j.pdu_ref, param_len, 0, None);
                out.extend_from_slice(&[FN_READ_VAR, j.items.len() as u8]);
                for item in &j.items {
                    encode_request_item(&mut out, item)?;
                }
            }
            S7Message::ReadAck(a) => {
                if a.items.len() > u8::MAX as usize {
                    return Err(CodecError::LimitExceeded("more than 255 items".into()));
                }
                let data_len = u16::try_from(ack_data_len(&a.items))
                    .map_err(|_| CodecError::LimitExceeded("data length".into()))?;
                out.extend_from_slice(&[2, COTP_DT, 0x80]);
                s7_header(
                    &mut out,
                    ROSCTR_ACK_DATA,
                    a.pdu_ref,
                    2,
                    data_len,
                    Some(a.error),
                );
                out.extend_from_slice(&[FN_READ_VAR, a.items.len() as u8]);
                let last = a.items.len().saturating_sub(1);
                for (i, item) in a.items.iter().enumerate() {
                    encode_result_item(&mut out, item, i == last)?;
                }
            }
        }
        let total = u16::try_from(out.len())
            .map_err(|_| CodecError::LimitExceeded("TPKT length".into()))?;
        out[2..4].copy_from_slice(&total.to_be_bytes());
        Ok(out)
    }

    /// Encodes and checks the S7 PDU against a negotiated PDU size.
    pub fn encode_within(&self, pdu_limit: u16) -> Result<Vec<u8>> {
        if self.pdu_len() > pdu_limit as usize {
            return Err(CodecError::LimitExceeded(format!(
                "S7 PDU of {} bytes exceeds the negotiated {pdu_limit}",
                self.pdu_len()
            )));
        }
        self.encode()
    }

    /// Decodes exactly one TPKT frame.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        const WHAT: &str = "S7 frame";
        let mut r = Reader::new(bytes, WHAT);
        let version = r.u8()?;
        if version != TPKT_VERSION {
            return Err(CodecError::malformed(
                WHAT,
                format!("TPKT version {version}, expected {TPKT_VERSION}"),
            ));
        }
        r.u8()?;
        let len = r.u16_be()? as usize;
        if len != bytes.len() {
            return Err(CodecError::malformed(
                WHAT,
                format!("TPKT length {len} but {} bytes given", bytes.len()),
            ));
        }
        let li = r.u8()? as usize;
        let pdu_type = r.u8()?;
        match pdu_type {
            COTP_CR | COTP_CC => {
                let c = decode_cotp_connect(&mut r, li)?;
                r.finish()?;
                Ok(if pdu_type == COTP_CR {
                    S7Message::ConnectRequest(c)
                } else {
                    S7Message::ConnectConfirm(c)
                })
            }
            COTP_DT => {
                if li != 2 {
                    return Err(CodecError::malformed(WHAT, format!("COTP DT length {li}")));
                }
                let eot = r.u8()?;
                if eot & 0x80 == 0 {
                    return Err(CodecError::unsupported(WHAT, "fragmented COTP data"));
                }
                let msg = decode_s7_pdu(&mut r)?;
                r.finish()?;
                Ok(msg)
            }
            other => Err(CodecError::unsupported(
                "COTP PDU type",
                format!("0x{other:02X}"),
            )),
        }
    }
}

/// Total frame length announced by a TPKT header.
pub fn tpkt_frame_len(header: [u8; TPKT_HEADER_LEN]) -> Result<usize> {
    if header[0] != TPKT_VERSION {
        return Err(CodecError::malformed(
            "TPKT header",
            format!("version {}", header[0]),
        ));
    }
    let len = u16::from_be_bytes([header[2], header[3]]) as usize;
    if len < TPKT_HEADER_LEN + COTP_DT_LEN {
        return Err(CodecError::malformed(
            "TPKT header",
            format!("length {len}"),
        ));
    }
    Ok(len)
}

fn ack_data_len(items: &[ReadResult]) -> usize {
    let last = items.len().saturating_sub(1);
    items
        .iter()
        .enumerate()
        .map(|(i, it)| match it {
            ReadResult::Data { data, .. } => {
                4 + data.len() + usize::from(i != last && data.len() % 2 == 1)
            }
            ReadResult::Failed(_) => 4,
        })
        .sum()
}

fn s7_header(
    out: &mut Vec<u8>,
    rosctr: u8,
    pdu_ref: u16,
    param_len: u16,
    data_len: u16,
    error: Option<HeaderError>,
) {
    out.extend_from_slice(&[PROTOCOL_ID, rosctr, 0, 0]);
    out.extend_from_slice(&pdu_ref.to_be_bytes());
    out.extend_from_slice(&param_len.to_be_bytes());
    out.extend_from_slice(&data_len.to_be_bytes());
    if let Some(e) = error {
        out.extend_from_slice(&[e.class, e.code]);
    }
}

fn setup_params(out: &mut Vec<u8>, s: &SetupCommunication) {
    out.extend_from_slice(&[FN_SETUP_COMM, 0]);
    out.extend_from_slice(&s.max_amq_calling.to_be_bytes());
    out.extend_from_slice(&s.max_amq_called.to_be_bytes());
    out.extend_from_slice(&s.pdu_length.to_be_bytes());
}

fn encode_cotp_connect(out: &mut Vec<u8>, pdu_type: u8, c: &CotpConnect) {
    out.extend_from_slice(&[17, pdu_type]);
    out.extend_from_slice(&c.dst_ref.to_be_bytes());
    out.extend_from_slice(&c.src_ref.to_be_bytes());
    out.push(0); // class 0
    out.extend_from_slice(&[0xC0, 1, c.tpdu_size]);
    out.extend_from_slice(&[0xC1, 2]);
    out.extend_from_slice(&c.src_tsap.to_be_bytes());
    out.extend_from_slice(&[0xC2, 2]);
    out.extend_from_slice(&c.dst_tsap.to_be_bytes());
}

fn decode_cotp_connect(r: &mut Reader<'_>, li: usize) -> Result<CotpConnect> {
    const WHAT: &str = "COTP connect";
    // li counts the bytes after itself; the PDU type byte is already read
    if r.remaining() != li.saturating_sub(1) || li < 6 {
        return Err(CodecError::malformed(
            WHAT,
            format!("length indicator {li}"),
        ));
    }
    let dst_ref = r.u16_be()?;
    let src_ref = r.u16_be()?;
    let class = r.u8()?;
    if class & 0xF0 != 0 {
        return Err(CodecError::unsupported(
            WHAT,
            format!("class {}", class >> 4),
        ));
    }
    let (mut tpdu, mut src_tsap, mut dst_tsap) = (None, None, None);
    while r.remaining() > 0 {
        let code = r.u8()?;
        let len = r.u8()? as usize;
        let value = r.take(len)?;
        match (code, len) {
            (0xC0, 1) => tpdu = Some(value[0]),
            (0xC1, 2) => src_tsap = Some(u16::from_be_bytes([value[0], value[1]])),
            (0xC2, 2) => dst_tsap = Some(u16::from_be_bytes([value[0], value[1]])),
            _ => {
                return Err(CodecError::unsupported(
                    WHAT,
                    format!("parameter 0x{code:02X} of length {len}"),
                ))
            }
        }
    }
    match (tpdu, src_tsap, dst_tsap) {
        (Some(tpdu_size), Some(src_tsap), Some(dst_tsap)) => Ok(CotpConnect {
            dst_ref,
            src_ref,
            src_tsap,
            dst_tsap,
            tpdu_size,
        }),
        _ => Err(CodecError::malformed(WHAT, "missing TSAP or TPDU size")),
    }
}

fn encode_request_item(out: &mut Vec<u8>, item: &ReadItem) -> Result<()> {
    if item.start > MAX_BYTE_ADDRESS {
        return Err(CodecError::LimitExceeded(format!(
            "byte address {} beyond 21-bit range",
            item.start
        )));
    }
    let bit_addr = item.start << 3;
    out.extend_from_slice(&[0x12, 0x0A, 0x10, 0x02]);
    out.extend_from_slice(&item.length.to_be_bytes());
    out.extend_from_slice(&item.db_number.to_be_bytes());
    out.push(item.area as u8);
    out.extend_from_slice(&bit_addr.to_be_bytes()[1..]);
    Ok(())
}

fn encode_result_item(out: &mut Vec<u8>, item: &ReadResult, last: bool) -> Result<()> {
    match item {
        ReadResult::Data { transport, data } => {
            let len = if transport.length_in_bits() {
                data.len() * 8
            } else {
                data.len()
            };
            let len = u16::try_from(len)
                .map_err(|_| CodecError::LimitExceeded("item data length".into()))?;
            out.extend_from_slice(&[RC_SUCCESS, *transport as u8]);
            out.extend_from_slice(&len.to_be_bytes());
            out.extend_from_slice(data);
            if !last && data.len() % 2 == 1 {
                out.push(0);
            }
        }
        ReadResult::Failed(code) => {
            if *code == RC_SUCCESS {
                return Err(CodecError::malformed(
                    "S7 read result",
                    "failed item with success return code",
                ));
            }
            out.extend_from_slice(&[*code, 0, 0, 0]);
        }
    }
    Ok(())
}

fn decode_s7_pdu(r: &mut Reader<'_>) -> Result<S7Message> {
    const WHAT: &str = "S7 PDU";
    if r.u8()? != PROTOCOL_ID {
        return Err(CodecError::malformed(WHAT, "protocol id is not 0x32"));
    }
    let rosctr = r.u8()?;
    r.u16_be()?; // redundancy identification
    let pdu_ref = r.u16_be()?;
    let param_len = r.u16_be()? as usize;
    let data_len = r.u16_be()? as usize;
    let error = match rosctr {
        ROSCTR_JOB => None,
        ROSCTR_ACK_DATA => Some(HeaderError {
            class: r.u8()?,
            code: r.u8()?,
        }),
        other => {
            return Err(CodecError::unsupported(
                "S7 ROSCTR",
                format!("0x{other:02X}"),
            ))
        }
    };
    if r.remaining() != param_len + data_len {
        return Err(CodecError::malformed(
            WHAT,
            format!(
                "header announces {} bytes, {} present",
                param_len + data_len,
                r.remaining()
            ),
        ));
    }
    let params = r.take(param_len)?;
    let data = r.take(data_len)?;
    let mut p = Reader::new(params, "S7 parameters");
    let function = p.u8()?;
    match (function, error) {
        (FN_SETUP_COMM, _) => {
            p.u8()?;
            let s = SetupCommunication {
                pdu_ref,
                max_amq_calling: p.u16_be()?,
                max_amq_called: p.u16_be()?,
                pdu_length: p.u16_be()?,
            };
            p.finish()?;
            if !data.is_empty() {
                return Err(CodecError::malformed(WHAT, "setup communication with data"));
            }
            Ok(match error {
                None => S7Message::SetupRequest(s),
                Some(error) => S7Message::SetupResponse(SetupAck { error, params: s }),
            })
        }
        (FN_READ_VAR, None) => {
            let count = p.u8()? as usize;
            let mut items = Vec::with_capacity(count);
            for _ in 0..count {
                items.push(decode_request_item(&mut p)?);
            }
            p.finish()?;
            if !data.is_empty() {
                return Err(CodecError::malformed(WHAT, "read request with data"));
            }
            Ok(S7Message::ReadJob(ReadJob { pdu_ref, items }))
        }
        (FN_READ_VAR, Some(error)) => {
            let count = p.u8()? as usize;
            p.finish()?;
            let mut d = Reader::new(data, "S7 read data");
            let mut items = Vec::with_capacity(count);
            for i in 0..count {
                items.push(decode_result_item(&mut d, i + 1 == count)?);
            }
            d.finish()?;
            Ok(S7Message::ReadAck(ReadAck {
                pdu_ref,
                error,
                items,
            }))
        }
        (other, _) => Err(CodecError::unsupported(
            "S7 function",
            format!("0x{other:02X}"),
        )),
    }
}

fn decode_request_item(p: &mut Reader<'_>) -> Result<ReadItem> {
    const WHAT: &str = "S7 request item";
    let head = p.bytes::<3>()?;
    if head != [0x12, 0x0A, 0x10] {
        return Err(CodecError::unsupported(
            WHAT,
            format!("item header {head:02X?}"),
        ));
    }
    let transport = p.u8()?;
    if transport != 0x02 {
        return Err(CodecError::unsupported(
            WHAT,
            format!("transport size 0x{transport:02X}"),
        ));
    }
    let length = p.u16_be()?;
    let db_number = p.u16_be()?;
    let area = Area::from_code(p.u8()?)?;
    let addr = p.bytes::<3>()?;
    let bit_addr = u32::from_be_bytes([0, addr[0], addr[1], addr[2]]);
    if !bit_addr.is_multiple_of(8) {
        return Err(CodecError::unsupported(WHAT, "bit offset within a byte"));
    }
    Ok(ReadItem {
        area,
        db_number,
        start: bit_addr >> 3,
        length,
    })
}

fn decode_result_item(d: &mut Reader<'_>, last: bool) -> Result<ReadResult> {
    const WHAT: &str = "S7 result item";
    let rc = d.u8()?;
    let transport = d.u8()?;
    let len = d.u16_be()? as usize;
    if rc != RC_SUCCESS {
        if transport != 0 || len != 0 {
            return Err(CodecError::malformed(WHAT, "failed item carries data"));
        }
        return Ok(ReadResult::Failed(rc));
    }
    let transport = DataTransport::from_code(transport)?;
    let bytes = if transport.length_in_bits() {
        if !len.is_multiple_of(8) {
            return Err(CodecError::unsupported(
                WHAT,
                "length not a whole number of bytes",
            ));
        }
        len / 8
    } else {
        len
    };
    let data = d.take(bytes)?.to_vec();
    if !last && bytes % 2 == 1 {
        d.u8()?;
    }
    Ok(ReadResult::Data { transport, data })
}

/// Splits `n` into the fewest chunks of at most `capacity`, as even as
/// possible, larger chunks first.
pub fn balanced_split(n: usize, capacity: usize) -> Vec<usize> {
    assert!(capacity > 0, "chunk capacity must be positive");
    if n == 0 {
        return Vec::new();
    }
    let parts = n.div_ceil(capacity);
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Read jobs fetching `n` consecutive 4-byte values of data block `db`
/// starting at byte `start`, split so that every response fits into
/// `pdu_limit`. Each job carries one item.
pub fn split_for_pdu(
    n: usize,
    pdu_limit: u16,
    db: u16,
    start: u32,
    first_pdu_ref: u16,
) -> Vec<ReadJob> {
    let capacity = (pdu_limit.max(MIN_PDU) as usize - ACK_ITEM_OVERHEAD) / 4;
    let mut offset = start;
    balanced_split(n, capacity)
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let item = ReadItem::db(db, offset, (count * 4) as u16);
            offset += (count * 4) as u32;
            ReadJob {
                pdu_ref: first_pdu_ref.wrapping_add(i as u16),
                items: vec![item],
            }
        })
        .collect()
}
