use std::io::Write;
use std::net::{SocketAddr, TcpStream};
use std::sync::Mutex;

use plcbench_core::codec::s7::{
    balanced_split, Area, HeaderError, ReadAck, ReadJob, ReadResult, SetupAck, SetupCommunication,
    ACK_ITEM_OVERHEAD, MIN_PDU, RC_ADDRESS_OUT_OF_RANGE, RC_OBJECT_DOES_NOT_EXIST,
};
use plcbench_core::codec::S7Message;
use plcbench_core::framing::{read_tpkt, ReadError};
use plcbench_core::InterfaceId;

use crate::pacing::Pacer;
use crate::server::Shared;
use crate::store::{DataBlockStore, StoreError};

/// Header error of an Ack_Data answering a Job without items.
pub const EMPTY_JOB_ERROR: HeaderError = HeaderError {
    class: 0x85,
    code: 0x00,
};

/// Answers a read Job with as many Ack_Data messages as the PDU limit
/// requires. Items too large for one response are cut into balanced
/// pieces on 4-byte boundaries where possible; the client reassembles
/// them in order.
pub fn handle_s7_read(job: &ReadJob, pdu_limit: u16, store: &DataBlockStore) -> Vec<ReadAck> {
    let ack = |items| ReadAck {
        pdu_ref: job.pdu_ref,
        error: HeaderError::default(),
        items,
    };
    if job.items.is_empty() {
        return vec![ReadAck {
            error: EMPTY_JOB_ERROR,
            ..ack(Vec::new())
        }];
    }
    let pdu = pdu_limit.max(MIN_PDU) as usize;
    let ranges: Vec<_> = job
        .items
        .iter()
        .map(|i| (i.db_number, i.start as usize, i.length as usize))
        .collect();
    let snapshot = store.read_many(&ranges);

    let mut pieces = Vec::new();
    for (item, data) in job.items.iter().zip(snapshot) {
        let data = match (item.area, item.length, data) {
            (Area::DataBlock, 1.., Ok(d)) => d,
            (Area::DataBlock, _, Err(StoreError::NoSuchBlock(_))) => {
                pieces.push(ReadResult::Failed(RC_OBJECT_DOES_NOT_EXIST));
                continue;
            }
            (Area::DataBlock, _, _) => {
                pieces.push(ReadResult::Failed(RC_ADDRESS_OUT_OF_RANGE));
                continue;
            }
            _ => {
                pieces.push(ReadResult::Failed(RC_OBJECT_DOES_NOT_EXIST));
                continue;
            }
        };
        let unit = if data.len() % 4 == 0 { 4 } else { 1 };
        let capacity = ((pdu - ACK_ITEM_OVERHEAD) / unit).max(1);
        let mut offset = 0;
        for units in balanced_split(data.len() / unit, capacity) {
            let end = offset + units * unit;
            pieces.push(ReadResult::bytes(data[offset..end].to_vec()));
            offset = end;
        }
    }

    let mut acks = Vec::new();
    let mut current: Vec<ReadResult> = Vec::new();
    for piece in pieces {
        current.push(piece);
        let fits = S7Message::ReadAck(ack(current.clone())).pdu_len() <= pdu;
        if !fits && current.len() > 1 {
            let piece = current.pop().expect("just pushed");
            acks.push(ack(std::mem::take(&mut current)));
            current.push(piece);
        }
    }
    if !current.is_empty() {
        acks.push(ack(current));
    }
    acks
}

fn requested_values(job: &ReadJob) -> usize {
    let bytes: usize = job.items.iter().map(|i| i.length as usize).sum();
    bytes.div_ceil(4).max(1)
}

pub(crate) fn serve_connection(
    shared: &Shared,
    mut stream: TcpStream,
    peer: SocketAddr,
    pacer: &Mutex<Pacer>,
) {
    let mut pdu = shared.profile.pdu_limit;
    loop {
        let frame = match read_tpkt(&mut stream, &mut shared.keep_waiting()) {
            Ok(f) => f,
            Err(ReadError::Closed | ReadError::Abandoned) => return,
            Err(e) => {
                log::info!("S7 client {peer}: {e}");
                return;
            }
        };
        let reply = match S7Message::decode(&frame) {
            Ok(S7Message::ConnectRequest(cr)) => {
                vec![S7Message::ConnectConfirm(cr.confirm(0x0001))]
            }
            Ok(S7Message::SetupRequest(req)) => {
                pdu = req.pdu_length.min(shared.profile.pdu_limit).max(MIN_PDU);
                vec![S7Message::SetupResponse(SetupAck {
                    error: HeaderError::default(),
                    params: SetupCommunication {
                        pdu_length: pdu,
                        ..req
                    },
                })]
            }
            Ok(S7Message::ReadJob(job)) => {
                let interval = shared.interval(InterfaceId::S7, requested_values(&job));
                let acks = handle_s7_read(&job, pdu, &shared.store);
                let Ok(frames) = acks
                    .into_iter()
                    .map(|a| S7Message::ReadAck(a).encode())
                    .collect::<Result<Vec<_>, _>>()
                else {
                    return;
                };
                let mut pacer = pacer.lock().unwrap();
                for frame in frames {
                    if !pacer.wait(interval, &shared.stop) || stream.write_all(&frame).is_err() {
                        return;
                    }
                    pacer.sent();
                    shared.count(InterfaceId::S7);
                }
                continue;
            }
            Ok(other) => {
                log::info!("S7 client {peer}: unexpected {other:?}");
                return;
            }
            Err(e) => {
                log::info!("S7 client {peer}: {e}");
                return;
            }
        };
        for msg in reply {
            if send(&mut stream, &msg).is_err() {
                return;
            }
        }
    }
}

fn send(stream: &mut TcpStream, msg: &S7Message) -> std::io::Result<()> {
    let bytes = msg
        .encode()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    stream.write_all(&bytes)
}
