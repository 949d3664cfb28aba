use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use plcbench_core::codec::uadp::{DataSetMessage, UadpNetworkMessage};
use plcbench_core::InterfaceId;

use crate::config::WriterGroupConfig;
use crate::server::Shared;

pub(crate) fn run_writer_group(
    shared: &Shared,
    socket: UdpSocket,
    publisher_id: u8,
    destination: SocketAddr,
    group: &WriterGroupConfig,
) {
    if destination.ip().is_multicast() {
        let _ = socket.set_multicast_loop_v4(true);
    }
    let mut pacer = shared.pacer(InterfaceId::Uadp);
    let interval = Duration::from_secs_f64(group.publish_interval_ms / 1000.0);
    let total = group.field_count();
    let mut sequence = 0u16;
    loop {
        let Ok(mut values) = shared.store.scalars(1, total) else {
            return;
        };
        let messages = group
            .writers
            .iter()
            .map(|w| DataSetMessage {
                writer_id: w.writer_id,
                fields: values.drain(..w.fields).collect(),
            })
            .collect();
        let msg = UadpNetworkMessage {
            publisher_id,
            writer_group_id: group.writer_group_id,
            sequence_number: sequence,
            messages,
        };
        sequence = sequence.wrapping_add(1);
        let Ok(bytes) = msg.encode() else { return };
        if !pacer.wait(interval, &shared.stop) {
            return;
        }
        if socket.send_to(&bytes, destination).is_ok() {
            shared.count(InterfaceId::Uadp);
        }
        pacer.sent();
    }
}
