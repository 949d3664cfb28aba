use std::io::Write;
use std::net::{SocketAddr, TcpStream, UdpSocket};
use std::sync::Mutex;

use plcbench_core::codec::{ByteOrder, OucPayload};
use plcbench_core::InterfaceId;

use crate::config::{OucTcpEndpoint, OucUdpEndpoint};
use crate::pacing::Pacer;
use crate::server::Shared;

fn payload(shared: &Shared, n: usize, order: ByteOrder) -> Option<Vec<u8>> {
    let values = shared.store.values(1, n).ok()?;
    Some(OucPayload::new(values, order).encode())
}

pub(crate) fn run_udp_sender(shared: &Shared, socket: UdpSocket, ep: &OucUdpEndpoint) {
    let mut pacer = shared.pacer(InterfaceId::OucUdp);
    let interval = shared.interval(InterfaceId::OucUdp, ep.values);
    loop {
        let Some(bytes) = payload(shared, ep.values, ep.byte_order) else {
            return;
        };
        if !pacer.wait(interval, &shared.stop) {
            return;
        }
        // a partner that is not listening yet makes loopback sends fail
        if socket.send_to(&bytes, ep.partner).is_ok() {
            shared.count(InterfaceId::OucUdp);
        }
        pacer.sent();
    }
}

/// Streams values to the configured partner; anyone else is
/// disconnected immediately.
pub(crate) fn serve_tcp_partner(
    shared: &Shared,
    mut stream: TcpStream,
    peer: SocketAddr,
    ep: &OucTcpEndpoint,
    pacer: &Mutex<Pacer>,
) {
    if peer.ip() != ep.partner_ip {
        log::info!("OUC TCP: refusing {peer}, partner is {}", ep.partner_ip);
        return;
    }
    let interval = shared.interval(InterfaceId::OucTcp, ep.values);
    let mut pacer = pacer.lock().unwrap();
    pacer.reset();
    loop {
        let Some(bytes) = payload(shared, ep.values, ep.byte_order) else {
            return;
        };
        if !pacer.wait(interval, &shared.stop) || stream.write_all(&bytes).is_err() {
            return;
        }
        pacer.sent();
        shared.count(InterfaceId::OucTcp);
    }
}
