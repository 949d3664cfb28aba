//! Canonical messages exchanged by the emulator and the edge client.
//!
//! The encoded lengths of these builders, for every value count, are the
//! message sizes of [`crate::frame`].

use std::time::{SystemTime, UNIX_EPOCH};

use super::opcua::{
    ChannelHeader, DataValue, NodeId, OpcUaMessage, ReadRequest, ReadResponse, ReadValueId,
    RequestHeader, ResponseHeader, ServiceBody, WriteRequest, WriteResponse, WriteValue,
    ATTRIBUTE_VALUE, STATUS_GOOD,
};
use super::s7::{HeaderError, ReadAck, ReadItem, ReadJob, ReadResult};
use super::uadp::{DataSetMessage, UadpNetworkMessage};
use super::{OucPayload, Result, S7Message, Scalar};
use crate::frame::MessageName;

/// Data block holding the values served over S7.
pub const S7_DB: u16 = 1;
/// Namespace of the string node ids polled by the Read client.
pub const READ_NAMESPACE: u16 = 3;
/// Namespace and first numeric id of the nodes written by the Write client.
pub const WRITE_NAMESPACE: u16 = 1;
pub const WRITE_FIRST_ID: u32 = 1000;
pub const DATASET_WRITER_ID: u16 = 1;

const READ_NODE_PREFIX: &str = "\"OffloadingData\".\"InputValues\"[";

/// Session token of the polling client: a numeric id too large for the
/// compact encodings.
pub const READ_SESSION_TOKEN: u32 = 0x0001_2F3A;
/// Session token of the writing client.
pub const WRITE_SESSION_TOKEN: [u8; 16] = [
    0x5A, 0x13, 0xC1, 0x02, 0x7D, 0x44, 0x4E, 0x8B, 0x91, 0x0F, 0x22, 0x6B, 0x3C, 0xE0, 0x15, 0x77,
];

const TICKS_PER_SECOND: i64 = 10_000_000;
/// Seconds from 1601-01-01 to 1970-01-01.
const EPOCH_OFFSET_SECONDS: i64 = 11_644_473_600;

/// Current time as an OPC UA DateTime (100 ns ticks since 1601).
pub fn datetime_now() -> i64 {
    let since = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default();
    (EPOCH_OFFSET_SECONDS + since.as_secs() as i64) * TICKS_PER_SECOND
        + i64::from(since.subsec_nanos() / 100)
}

pub fn s7_job(n: usize, pdu_ref: u16) -> ReadJob {
    ReadJob {
        pdu_ref,
        items: vec![ReadItem::db(S7_DB, 0, (n * 4) as u16)],
    }
}

pub fn s7_ack(pdu_ref: u16, data: Vec<u8>) -> ReadAck {
    ReadAck {
        pdu_ref,
        error: HeaderError::default(),
        items: vec![ReadResult::bytes(data)],
    }
}

pub fn read_node_id(index: usize) -> NodeId {
    NodeId::string(READ_NAMESPACE, format!("{READ_NODE_PREFIX}{index}]"))
}

/// Inverse of [`read_node_id`].
pub fn parse_read_node_index(id: &NodeId) -> Option<usize> {
    match id {
        NodeId::String {
            ns: READ_NAMESPACE,
            id,
        } => {
            let digits = id.strip_prefix(READ_NODE_PREFIX)?.strip_suffix(']')?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            // reject leading zeros so the mapping stays one to one
            if digits.len() > 1 && digits.starts_with('0') {
                return None;
            }
            digits.parse().ok()
        }
        _ => None,
    }
}

pub fn write_node_id(index: usize) -> NodeId {
    NodeId::numeric(WRITE_NAMESPACE, WRITE_FIRST_ID + index as u32)
}

/// Inverse of [`write_node_id`].
pub fn parse_write_node_index(id: &NodeId) -> Option<usize> {
    match id {
        NodeId::Numeric {
            ns: WRITE_NAMESPACE,
            id,
        } if *id >= WRITE_FIRST_ID => Some((*id - WRITE_FIRST_ID) as usize),
        _ => None,
    }
}

fn request_header(token: NodeId, handle: u32, timestamp: i64) -> RequestHeader {
    RequestHeader {
        authentication_token: token,
        timestamp,
        request_handle: handle,
        return_diagnostics: 0,
        audit_entry_id: None,
        timeout_hint: 10_000,
    }
}

fn response_header(handle: u32, timestamp: i64) -> ResponseHeader {
    ResponseHeader {
        timestamp,
        request_handle: handle,
        service_result: STATUS_GOOD,
    }
}

pub fn read_request(channel: ChannelHeader, handle: u32, n: usize, timestamp: i64) -> OpcUaMessage {
    OpcUaMessage {
        channel,
        body: ServiceBody::ReadRequest(ReadRequest {
            header: request_header(NodeId::numeric(0, READ_SESSION_TOKEN), handle, timestamp),
            max_age: 0.0,
            // source timestamps only
            timestamps_to_return: 0,
            nodes: (0..n)
                .map(|i| ReadValueId::value_of(read_node_id(i)))
                .collect(),
        }),
    }
}

pub fn read_response(
    channel: ChannelHeader,
    handle: u32,
    values: &[Scalar],
    timestamp: i64,
) -> OpcUaMessage {
    OpcUaMessage {
        channel,
        body: ServiceBody::ReadResponse(ReadResponse {
            header: response_header(handle, timestamp),
            results: values
                .iter()
                .map(|&v| DataValue {
                    value: Some(v),
                    source_timestamp: Some(timestamp),
                    ..Default::default()
                })
                .collect(),
        }),
    }
}

pub fn write_request(
    channel: ChannelHeader,
    handle: u32,
    values: &[Scalar],
    timestamp: i64,
) -> OpcUaMessage {
    OpcUaMessage {
        channel,
        body: ServiceBody::WriteRequest(WriteRequest {
            header: request_header(
                NodeId::Guid {
                    ns: 0,
                    id: WRITE_SESSION_TOKEN,
                },
                handle,
                timestamp,
            ),
            nodes: values
                .iter()
                .enumerate()
                .map(|(i, &v)| WriteValue {
                    node_id: write_node_id(i),
                    attribute_id: ATTRIBUTE_VALUE,
                    index_range: None,
                    value: DataValue::of(v),
                })
                .collect(),
        }),
    }
}

pub fn write_response(
    channel: ChannelHeader,
    handle: u32,
    results: Vec<u32>,
    timestamp: i64,
) -> OpcUaMessage {
    OpcUaMessage {
        channel,
        body: ServiceBody::WriteResponse(WriteResponse {
            header: response_header(handle, timestamp),
            results,
        }),
    }
}

/// Network message with a single data set writer.
pub fn uadp_message(
    publisher_id: u8,
    writer_group_id: u16,
    sequence_number: u16,
    fields: &[Scalar],
) -> UadpNetworkMessage {
    UadpNetworkMessage {
        publisher_id,
        writer_group_id,
        sequence_number,
        messages: vec![DataSetMessage {
            writer_id: DATASET_WRITER_ID,
            fields: fields.to_vec(),
        }],
    }
}

/// The canonical message of the given name for `n` values, encoded.
pub fn encoded(name: MessageName, n: usize) -> Result<Vec<u8>> {
    let values: Vec<Scalar> = (0..n as u32).map(Scalar::uint32).collect();
    let ch = ChannelHeader::default();
    let ts = datetime_now();
    match name {
        MessageName::UdpData | MessageName::TcpData => {
            Ok(OucPayload::new(vec![0; n], Default::default()).encode())
        }
        MessageName::Job => S7Message::ReadJob(s7_job(n, 1)).encode(),
        MessageName::AckData => S7Message::ReadAck(s7_ack(1, vec![0; 4 * n])).encode(),
        MessageName::WriteRequest => write_request(ch, 1, &values, ts).encode(),
        MessageName::WriteResponse => write_response(ch, 1, vec![STATUS_GOOD; n], ts).encode(),
        MessageName::ReadRequest => read_request(ch, 1, n, ts).encode(),
        MessageName::ReadResponse => read_response(ch, 1, &values, ts).encode(),
        MessageName::DataSetMessage => uadp_message(1, 1, 0, &values).encode(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::wire_bytes;

    fn wire(name: MessageName, app_len: usize) -> usize {
        let l = name.layout();
        wire_bytes(app_len, l.transport, l.direction)
    }

    fn check_sizes(n: usize) {
        for name in MessageName::ALL {
            let l = name.layout();
            let bytes = encoded(name, n).unwrap();
            assert_eq!(bytes.len(), l.app_len(n), "{name:?} n={n}");
            assert_eq!(wire(name, bytes.len()), crate::frame::message_size(l, n));
        }
    }

    #[test]
    fn builders_match_layouts() {
        for n in 1..=100 {
            check_sizes(n);
        }
    }

    #[test]
    fn table_sizes_at_hundred() {
        let ch = ChannelHeader::default();
        let values: Vec<Scalar> = (0..100).map(Scalar::uint32).collect();
        let req = write_request(ch, 1, &values, 0).encode().unwrap();
        assert_eq!(wire(MessageName::WriteRequest, req.len()), 2154);
        let req = read_request(ch, 1, 100, 0).encode().unwrap();
        assert_eq!(req.len(), 5568);
        assert_eq!(wire(MessageName::ReadRequest, req.len()), 5778);
    }

    #[test]
    fn node_ids_invert() {
        for i in [0, 1, 9, 10, 99, 12345] {
            assert_eq!(parse_read_node_index(&read_node_id(i)), Some(i));
            assert_eq!(parse_write_node_index(&write_node_id(i)), Some(i));
        }
        assert_eq!(read_node_id(7).encoded_len(), 7 + 33);
        assert_eq!(
            parse_read_node_index(&NodeId::string(READ_NAMESPACE, "x")),
            None
        );
        let padded = format!("{READ_NODE_PREFIX}07]");
        assert_eq!(
            parse_read_node_index(&NodeId::string(READ_NAMESPACE, padded)),
            None
        );
        assert_eq!(parse_write_node_index(&NodeId::numeric(1, 5)), None);
    }

    #[test]
    fn datetime_is_after_2020() {
        // 2020-01-01 in ticks
        assert!(datetime_now() > 132_223_104_000_000_000);
    }
}
