//! Random valid messages for round-trip testing. Every generated value
//! is accepted by its encoder and decodes back to itself.

use rand::seq::SliceRandom;
use rand::Rng;

use super::opcua::{
    ChannelHeader, DataValue, NodeId, OpcUaMessage, ReadRequest, ReadResponse, ReadValueId,
    RequestHeader, ResponseHeader, ServiceBody, WriteRequest, WriteResponse, WriteValue,
};
use super::s7::{
    Area, CotpConnect, DataTransport, HeaderError, ReadAck, ReadItem, ReadJob, ReadResult,
    SetupAck, SetupCommunication, MAX_BYTE_ADDRESS, RC_SUCCESS,
};
use super::uadp::{DataSetMessage, UadpNetworkMessage};
use super::{ByteOrder, OucPayload, S7Message, Scalar, ScalarType};

/// The four wire formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodecFamily {
    Ouc,
    S7,
    OpcUa,
    Uadp,
}

impl CodecFamily {
    pub const ALL: [CodecFamily; 4] = [
        CodecFamily::Ouc,
        CodecFamily::S7,
        CodecFamily::OpcUa,
        CodecFamily::Uadp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CodecFamily::Ouc => "ouc",
            CodecFamily::S7 => "s7",
            CodecFamily::OpcUa => "opcua",
            CodecFamily::Uadp => "uadp",
        }
    }
}

fn vec_of<R: Rng, T>(rng: &mut R, max: usize, mut f: impl FnMut(&mut R) -> T) -> Vec<T> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| f(rng)).collect()
}

fn maybe<R: Rng, T>(rng: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    rng.gen_bool(0.5).then(|| f(rng))
}

fn text<R: Rng>(rng: &mut R, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    // multi-byte characters included on purpose
    const ALPHABET: &[char] = &['a', 'Z', '0', '.', '"', '[', ']', 'ä', '€', ' '];
    (0..n)
        .map(|_| *ALPHABET.choose(rng).expect("non-empty"))
        .collect()
}

pub fn scalar<R: Rng>(rng: &mut R) -> Scalar {
    let ty = *[ScalarType::Int32, ScalarType::UInt32, ScalarType::Float]
        .choose(rng)
        .expect("non-empty");
    Scalar {
        ty,
        bits: rng.gen(),
    }
}

pub fn ouc<R: Rng>(rng: &mut R) -> OucPayload {
    let order = if rng.gen() {
        ByteOrder::BigEndian
    } else {
        ByteOrder::LittleEndian
    };
    OucPayload::new(vec_of(rng, 365, |r| r.gen()), order)
}

fn cotp<R: Rng>(rng: &mut R) -> CotpConnect {
    CotpConnect {
        dst_ref: rng.gen(),
        src_ref: rng.gen(),
        src_tsap: rng.gen(),
        dst_tsap: rng.gen(),
        tpdu_size: rng.gen(),
    }
}

fn setup<R: Rng>(rng: &mut R) -> SetupCommunication {
    SetupCommunication {
        pdu_ref: rng.gen(),
        max_amq_calling: rng.gen(),
        max_amq_called: rng.gen(),
        pdu_length: rng.gen(),
    }
}

fn read_item<R: Rng>(rng: &mut R) -> ReadItem {
    let area = *[Area::Inputs, Area::Outputs, Area::Flags, Area::DataBlock]
        .choose(rng)
        .expect("non-empty");
    ReadItem {
        area,
        db_number: rng.gen(),
        start: rng.gen_range(0..=MAX_BYTE_ADDRESS),
        length: rng.gen(),
    }
}

fn read_result<R: Rng>(rng: &mut R) -> ReadResult {
    if rng.gen_bool(0.2) {
        let code = loop {
            let c: u8 = rng.gen();
            if c != RC_SUCCESS {
                break c;
            }
        };
        return ReadResult::Failed(code);
    }
    let transport = *[
        DataTransport::Byte,
        DataTransport::Integer,
        DataTransport::Real,
        DataTransport::OctetString,
    ]
    .choose(rng)
    .expect("non-empty");
    let len = rng.gen_range(0..=220);
    ReadResult::Data {
        transport,
        data: (0..len).map(|_| rng.gen()).collect(),
    }
}

pub fn s7<R: Rng>(rng: &mut R) -> S7Message {
    match rng.gen_range(0..6) {
        0 => S7Message::ConnectRequest(cotp(rng)),
        1 => S7Message::ConnectConfirm(cotp(rng)),
        2 => S7Message::SetupRequest(setup(rng)),
        3 => S7Message::SetupResponse(SetupAck {
            error: HeaderError {
                class: rng.gen(),
                code: rng.gen(),
            },
            params: setup(rng),
        }),
        4 => {
            let n = rng.gen_range(1..=20);
            S7Message::ReadJob(ReadJob {
                pdu_ref: rng.gen(),
                items: (0..n).map(|_| read_item(rng)).collect(),
            })
        }
        _ => S7Message::ReadAck(ReadAck {
            pdu_ref: rng.gen(),
            error: HeaderError {
                class: rng.gen(),
                code: rng.gen(),
            },
            items: vec_of(rng, 12, read_result),
        }),
    }
}

fn node_id<R: Rng>(rng: &mut R) -> NodeId {
    match rng.gen_range(0..4) {
        0 => {
            // all three numeric encodings
            let ns = *[0, rng.gen_range(0..=0xFF), rng.gen()]
                .choose(rng)
                .expect("non-empty");
            let id = *[
                rng.gen_range(0..=0xFF),
                rng.gen_range(0..=0xFFFF),
                rng.gen(),
            ]
            .choose(rng)
            .expect("non-empty");
            NodeId::Numeric { ns, id }
        }
        1 => NodeId::String {
            ns: rng.gen(),
            id: text(rng, 40),
        },
        2 => NodeId::Guid {
            ns: rng.gen(),
            id: rng.gen(),
        },
        _ => NodeId::Opaque {
            ns: rng.gen(),
            id: vec_of(rng, 24, |r| r.gen()),
        },
    }
}

fn data_value<R: Rng>(rng: &mut R) -> DataValue {
    DataValue {
        value: maybe(rng, scalar),
        status: maybe(rng, |r| r.gen()),
        source_timestamp: maybe(rng, |r| r.gen()),
        server_timestamp: maybe(rng, |r| r.gen()),
    }
}

fn request_header<R: Rng>(rng: &mut R) -> RequestHeader {
    RequestHeader {
        authentication_token: node_id(rng),
        timestamp: rng.gen(),
        request_handle: rng.gen(),
        return_diagnostics: rng.gen(),
        audit_entry_id: maybe(rng, |r| text(r, 16)),
        timeout_hint: rng.gen(),
    }
}

fn response_header<R: Rng>(rng: &mut R) -> ResponseHeader {
    ResponseHeader {
        timestamp: rng.gen(),
        request_handle: rng.gen(),
        service_result: rng.gen(),
    }
}

pub fn opcua<R: Rng>(rng: &mut R) -> OpcUaMessage {
    let channel = ChannelHeader {
        secure_channel_id: rng.gen(),
        token_id: rng.gen(),
        sequence_number: rng.gen(),
        request_id: rng.gen(),
    };
    let body = match rng.gen_range(0..4) {
        0 => ServiceBody::ReadRequest(ReadRequest {
            header: request_header(rng),
            max_age: rng.gen_range(-1e9..1e9),
            timestamps_to_return: rng.gen_range(0..4),
            nodes: vec_of(rng, 30, |r| ReadValueId {
                node_id: node_id(r),
                attribute_id: r.gen(),
                index_range: maybe(r, |r| text(r, 8)),
                data_encoding_ns: r.gen(),
                data_encoding_name: maybe(r, |r| text(r, 8)),
            }),
        }),
        1 => ServiceBody::ReadResponse(ReadResponse {
            header: response_header(rng),
            results: vec_of(rng, 30, data_value),
        }),
        2 => ServiceBody::WriteRequest(WriteRequest {
            header: request_header(rng),
            nodes: vec_of(rng, 30, |r| WriteValue {
                node_id: node_id(r),
                attribute_id: r.gen(),
                index_range: maybe(r, |r| text(r, 8)),
                value: data_value(r),
            }),
        }),
        _ => ServiceBody::WriteResponse(WriteResponse {
            header: response_header(rng),
            results: vec_of(rng, 30, |r| r.gen()),
        }),
    };
    OpcUaMessage { channel, body }
}

pub fn uadp<R: Rng>(rng: &mut R) -> UadpNetworkMessage {
    let count = rng.gen_range(1..=4);
    UadpNetworkMessage {
        publisher_id: rng.gen(),
        writer_group_id: rng.gen(),
        sequence_number: rng.gen(),
        messages: (0..count)
            .map(|_| DataSetMessage {
                writer_id: rng.gen(),
                fields: vec_of(rng, 40, scalar),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ouc_round_trip(seed in any::<u64>()) {
            let m = ouc(&mut StdRng::seed_from_u64(seed));
            prop_assert_eq!(OucPayload::decode(&m.encode(), m.byte_order).unwrap(), m);
        }

        #[test]
        fn s7_round_trip(seed in any::<u64>()) {
            let m = s7(&mut StdRng::seed_from_u64(seed));
            prop_assert_eq!(S7Message::decode(&m.encode().unwrap()).unwrap(), m);
        }

        #[test]
        fn opcua_round_trip(seed in any::<u64>()) {
            let m = opcua(&mut StdRng::seed_from_u64(seed));
            prop_assert_eq!(OpcUaMessage::decode(&m.encode().unwrap()).unwrap(), m);
        }

        #[test]
        fn uadp_round_trip(seed in any::<u64>()) {
            let m = uadp(&mut StdRng::seed_from_u64(seed));
            prop_assert_eq!(UadpNetworkMessage::decode(&m.encode().unwrap()).unwrap(), m);
        }
    }
}
