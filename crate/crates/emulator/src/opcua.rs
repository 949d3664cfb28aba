use std::io::Write;
use std::net::{SocketAddr, TcpStream};
use std::sync::Mutex;
use std::thread;

use plcbench_core::codec::opcua::{
    ChannelHeader, DataValue, OpcUaMessage, ReadRequest, ServiceBody, STATUS_BAD_NODE_ID_UNKNOWN,
    STATUS_BAD_NOT_WRITABLE,
};
use plcbench_core::codec::{stock, Scalar};
use plcbench_core::framing::{read_opcua_chunk, ReadError};
use plcbench_core::InterfaceId;

use crate::config::OpcUaWriteEndpoint;
use crate::pacing::Pacer;
use crate::server::{prepare_stream, Shared, POLL};

/// Values for the requested nodes from one consistent snapshot of DB 1.
fn read_values(shared: &Shared, req: &ReadRequest, timestamp: i64) -> Vec<DataValue> {
    let indices: Vec<Option<usize>> = req
        .nodes
        .iter()
        .map(|n| stock::parse_read_node_index(&n.node_id))
        .collect();
    let ranges: Vec<_> = indices
        .iter()
        .map(|i| (1u16, i.unwrap_or(usize::MAX / 8) * 4, 4))
        .collect();
    indices
        .iter()
        .zip(shared.store.read_many(&ranges))
        .map(|(idx, data)| match (idx, data) {
            (Some(_), Ok(b)) => DataValue {
                value: Some(Scalar::uint32(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))),
                source_timestamp: Some(timestamp),
                ..Default::default()
            },
            _ => DataValue {
                status: Some(STATUS_BAD_NODE_ID_UNKNOWN),
                ..Default::default()
            },
        })
        .collect()
}

pub(crate) fn serve_connection(
    shared: &Shared,
    mut stream: TcpStream,
    peer: SocketAddr,
    pacer: &Mutex<Pacer>,
) {
    let mut sequence = 1u32;
    loop {
        let chunk = match read_opcua_chunk(&mut stream, &mut shared.keep_waiting()) {
            Ok(c) => c,
            Err(ReadError::Closed | ReadError::Abandoned) => return,
            Err(e) => {
                log::info!("OPC UA client {peer}: {e}");
                return;
            }
        };
        let request = match OpcUaMessage::decode(&chunk) {
            Ok(m) => m,
            Err(e) => {
                log::info!("OPC UA client {peer}: {e}");
                return;
            }
        };
        let channel = ChannelHeader {
            sequence_number: sequence,
            ..request.channel
        };
        sequence = sequence.wrapping_add(1);
        let now = stock::datetime_now();
        let response = match &request.body {
            ServiceBody::ReadRequest(req) => {
                let interval = shared.interval(InterfaceId::OpcUaRead, req.nodes.len());
                let values = read_values(shared, req, now);
                let mut msg = stock::read_response(channel, req.header.request_handle, &[], now);
                if let ServiceBody::ReadResponse(r) = &mut msg.body {
                    r.results = values;
                }
                let Ok(bytes) = msg.encode() else { return };
                let mut pacer = pacer.lock().unwrap();
                if !pacer.wait(interval, &shared.stop) || stream.write_all(&bytes).is_err() {
                    return;
                }
                pacer.sent();
                shared.count(InterfaceId::OpcUaRead);
                continue;
            }
            ServiceBody::WriteRequest(req) => stock::write_response(
                channel,
                req.header.request_handle,
                vec![STATUS_BAD_NOT_WRITABLE; req.nodes.len()],
                now,
            ),
            other => {
                log::info!(
                    "OPC UA client {peer}: unexpected service type {}",
                    other.type_id()
                );
                return;
            }
        };
        let Ok(bytes) = response.encode() else { return };
        if stream.write_all(&bytes).is_err() {
            return;
        }
    }
}

/// Connects to the edge device's server and writes the first
/// `values` values of DB 1 as fast as the profile allows.
pub(crate) fn run_write_client(shared: &Shared, ep: &OpcUaWriteEndpoint) {
    let mut pacer = shared.pacer(InterfaceId::OpcUaWrite);
    let interval = shared.interval(InterfaceId::OpcUaWrite, ep.values);
    while !shared.stopped() {
        let mut stream = match TcpStream::connect_timeout(&ep.target, POLL) {
            Ok(s) => s,
            Err(_) => {
                thread::sleep(POLL);
                continue;
            }
        };
        if prepare_stream(&stream).is_err() {
            continue;
        }
        pacer.reset();
        let channel = ChannelHeader {
            secure_channel_id: 1,
            token_id: 1,
            ..Default::default()
        };
        let mut handle = 0u32;
        loop {
            handle = handle.wrapping_add(1);
            let Ok(values) = shared.store.scalars(1, ep.values) else {
                return;
            };
            let ch = ChannelHeader {
                sequence_number: handle,
                request_id: handle,
                ..channel
            };
            let msg = stock::write_request(ch, handle, &values, stock::datetime_now());
            let Ok(bytes) = msg.encode() else { return };
            if !pacer.wait(interval, &shared.stop) {
                return;
            }
            if stream.write_all(&bytes).is_err() {
                break;
            }
            pacer.sent();
            shared.count(InterfaceId::OpcUaWrite);
            match read_opcua_chunk(&mut stream, &mut shared.keep_waiting()) {
                Ok(chunk) => match OpcUaMessage::decode(&chunk) {
                    Ok(OpcUaMessage {
                        body: ServiceBody::WriteResponse(_),
                        ..
                    }) => {}
                    _ => break,
                },
                Err(ReadError::Abandoned) => return,
                Err(_) => break,
            }
        }
    }
}
