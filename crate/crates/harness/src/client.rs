//! Per-interface measurement loops. Each records the instant a complete
//! message has been received and decoded.

use std::io::{ErrorKind, Write};
use std::net::{Ipv4Addr, SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::thread;
use std::time::{Duration, Instant};

use plcbench_core::codec::opcua::{ChannelHeader, OpcUaMessage, ServiceBody, STATUS_GOOD};
use plcbench_core::codec::s7::{split_for_pdu, CotpConnect, SetupCommunication};
use plcbench_core::codec::uadp::UadpNetworkMessage;
use plcbench_core::codec::{stock, ByteOrder, OucPayload, S7Message};
use plcbench_core::framing::{read_full, read_opcua_chunk, read_tpkt, ReadError};
use plcbench_core::{Device, InterfaceId};

use crate::stats::{MeasurementRun, DEFAULT_COUNT, DEFAULT_WARMUP};
use crate::HarnessError;

const READ_POLL: Duration = Duration::from_millis(20);
/// Fewest messages a live run records after its warmup.
pub const MIN_COUNT: usize = 100;
/// PDU size the S7 client asks for; the PLC answers with its own limit.
pub const REQUESTED_PDU: u16 = 960;

/// Where the PLC side of the exchange lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// A server on the PLC (S7, OPC UA Read, OUC TCP).
    Connect(SocketAddr),
    /// A local address the PLC sends or connects to (OUC UDP, UADP,
    /// OPC UA Write).
    Listen(SocketAddr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Messages recorded after the warmup.
    pub count: usize,
    pub warmup: usize,
    /// Longest wait for a single message.
    pub timeout: Duration,
    pub byte_order: ByteOrder,
    /// Multicast group to join for UADP.
    pub multicast_group: Option<Ipv4Addr>,
    /// Only accept UADP messages of this writer group.
    pub writer_group_id: Option<u16>,
    pub device: Option<Device>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            count: DEFAULT_COUNT,
            warmup: DEFAULT_WARMUP,
            timeout: Duration::from_secs(2),
            byte_order: ByteOrder::BigEndian,
            multicast_group: None,
            writer_group_id: None,
            device: None,
        }
    }
}

enum Transport {
    Stream(TcpStream),
    Listener(TcpListener),
    Datagram(UdpSocket),
}

/// An opened measurement endpoint; bind first, then start the PLC side
/// when it needs to know where to send.
pub struct Session {
    interface: InterfaceId,
    transport: Transport,
    opts: RunOptions,
}

fn expected_endpoint(interface: InterfaceId) -> &'static str {
    match interface {
        InterfaceId::OucUdp | InterfaceId::Uadp | InterfaceId::OpcUaWrite => "a listen address",
        _ => "an address to connect to",
    }
}

fn connect(addr: SocketAddr, timeout: Duration) -> Result<TcpStream, HarnessError> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => {
                s.set_nodelay(true)?;
                s.set_read_timeout(Some(READ_POLL))?;
                s.set_write_timeout(Some(timeout))?;
                return Ok(s);
            }
            Err(e) if Instant::now() >= deadline => {
                return Err(HarnessError::ConnectionFailed { addr, source: e });
            }
            Err(_) => thread::sleep(Duration::from_millis(10)),
        }
    }
}

impl Session {
    pub fn open(
        interface: InterfaceId,
        endpoint: Endpoint,
        opts: RunOptions,
    ) -> Result<Self, HarnessError> {
        use InterfaceId as I;
        let transport = match (interface, endpoint) {
            (I::S7 | I::OpcUaRead | I::OucTcp, Endpoint::Connect(addr)) => {
                Transport::Stream(connect(addr, opts.timeout)?)
            }
            (I::OpcUaWrite, Endpoint::Listen(addr)) => {
                let l = TcpListener::bind(addr)
                    .map_err(|source| HarnessError::ConnectionFailed { addr, source })?;
                l.set_nonblocking(true)?;
                Transport::Listener(l)
            }
            (I::OucUdp | I::Uadp, Endpoint::Listen(addr)) => {
                let s = UdpSocket::bind(addr)
                    .map_err(|source| HarnessError::ConnectionFailed { addr, source })?;
                if let Some(group) = opts.multicast_group {
                    s.join_multicast_v4(&group, &Ipv4Addr::UNSPECIFIED)?;
                }
                s.set_read_timeout(Some(READ_POLL))?;
                Transport::Datagram(s)
            }
            _ => {
                return Err(HarnessError::InvalidRun(format!(
                    "{interface} needs {}",
                    expected_endpoint(interface)
                )))
            }
        };
        Ok(Session {
            interface,
            transport,
            opts,
        })
    }

    /// Local address, for telling the PLC where to send.
    pub fn local_addr(&self) -> Result<SocketAddr, HarnessError> {
        Ok(match &self.transport {
            Transport::Stream(s) => s.local_addr()?,
            Transport::Listener(l) => l.local_addr()?,
            Transport::Datagram(s) => s.local_addr()?,
        })
    }

    /// Records `warmup + count` messages of `n` values each.
    pub fn run(self, n: usize) -> Result<MeasurementRun, HarnessError> {
        if n == 0 {
            return Err(HarnessError::InvalidRun(
                "a message needs at least one value".into(),
            ));
        }
        if self.opts.count < MIN_COUNT {
            return Err(HarnessError::InsufficientSamples {
                have: self.opts.count,
                need: MIN_COUNT,
            });
        }
        let total = self.opts.warmup + self.opts.count;
        let mut rec = Recorder::new(total, self.opts.timeout);
        match (self.interface, self.transport) {
            (InterfaceId::OucUdp, Transport::Datagram(s)) => {
                ouc_udp(&s, n, self.opts.byte_order, &mut rec)?
            }
            (InterfaceId::Uadp, Transport::Datagram(s)) => {
                uadp(&s, n, self.opts.writer_group_id, &mut rec)?
            }
            (InterfaceId::OucTcp, Transport::Stream(mut s)) => {
                ouc_tcp(&mut s, n, self.opts.byte_order, &mut rec)?
            }
            (InterfaceId::S7, Transport::Stream(mut s)) => s7(&mut s, n, &mut rec)?,
            (InterfaceId::OpcUaRead, Transport::Stream(mut s)) => opcua_read(&mut s, n, &mut rec)?,
            (InterfaceId::OpcUaWrite, Transport::Listener(l)) => {
                let mut s = accept(&l, self.opts.timeout)?;
                opcua_write_server(&mut s, n, &mut rec)?
            }
            _ => unreachable!("transport chosen by open"),
        }
        MeasurementRun::from_timestamps(
            self.interface,
            self.opts.device,
            n,
            rec.stamps,
            self.opts.warmup,
        )
    }
}

/// Opens a session and runs it; for endpoints whose PLC side is already
/// sending or listening.
pub fn run_measurement(
    interface: InterfaceId,
    endpoint: Endpoint,
    n: usize,
    opts: RunOptions,
) -> Result<MeasurementRun, HarnessError> {
    Session::open(interface, endpoint, opts)?.run(n)
}

struct Recorder {
    start: Instant,
    stamps: Vec<f64>,
    total: usize,
    timeout: Duration,
    /// Start of the current wait for a message.
    waiting_since: Instant,
}

impl Recorder {
    fn new(total: usize, timeout: Duration) -> Self {
        let now = Instant::now();
        Recorder {
            start: now,
            stamps: Vec::with_capacity(total),
            total,
            timeout,
            waiting_since: now,
        }
    }

    fn done(&self) -> bool {
        self.stamps.len() >= self.total
    }

    fn record(&mut self) {
        let now = Instant::now();
        self.stamps.push((now - self.start).as_secs_f64() * 1e6);
        self.waiting_since = now;
    }

    fn timed_out(&self) -> bool {
        self.waiting_since.elapsed() > self.timeout
    }

    fn timeout_error(&self) -> HarnessError {
        HarnessError::Timeout {
            after: self.timeout,
            received: self.stamps.len(),
        }
    }

    fn check(&self, r: Result<Vec<u8>, ReadError>) -> Result<Vec<u8>, HarnessError> {
        r.map_err(|e| match e {
            ReadError::Abandoned => self.timeout_error(),
            ReadError::Closed => HarnessError::Protocol("peer closed the connection".into()),
            ReadError::Io(e) => HarnessError::Io(e),
            ReadError::Codec(e) => HarnessError::Codec(e),
        })
    }
}

fn accept(l: &TcpListener, timeout: Duration) -> Result<TcpStream, HarnessError> {
    let deadline = Instant::now() + timeout;
    loop {
        match l.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)?;
                s.set_nodelay(true)?;
                s.set_read_timeout(Some(READ_POLL))?;
                s.set_write_timeout(Some(timeout))?;
                return Ok(s);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(HarnessError::Timeout {
                        after: timeout,
                        received: 0,
                    });
                }
                thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn recv(s: &UdpSocket, buf: &mut [u8], rec: &Recorder) -> Result<usize, HarnessError> {
    loop {
        match s.recv(buf) {
            Ok(len) => return Ok(len),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if rec.timed_out() {
                    return Err(rec.timeout_error());
                }
            }
            Err(e) if e.kind() == ErrorKind::ConnectionRefused => {}
            Err(e) => return Err(e.into()),
        }
    }
}

fn ouc_udp(
    s: &UdpSocket,
    n: usize,
    order: ByteOrder,
    rec: &mut Recorder,
) -> Result<(), HarnessError> {
    let mut buf = vec![0u8; 65536];
    while !rec.done() {
        let len = recv(s, &mut buf, rec)?;
        let p = OucPayload::decode(&buf[..len], order)?;
        if p.values.len() != n {
            return Err(HarnessError::Protocol(format!(
                "expected {n} values, got {}",
                p.values.len()
            )));
        }
        rec.record();
    }
    Ok(())
}

fn uadp(
    s: &UdpSocket,
    n: usize,
    group: Option<u16>,
    rec: &mut Recorder,
) -> Result<(), HarnessError> {
    let mut buf = vec![0u8; 65536];
    while !rec.done() {
        let len = recv(s, &mut buf, rec)?;
        let msg = UadpNetworkMessage::decode(&buf[..len])?;
        if group.is_some_and(|g| g != msg.writer_group_id) {
            continue;
        }
        if msg.field_count() != n {
            return Err(HarnessError::Protocol(format!(
                "expected {n} fields, got {}",
                msg.field_count()
            )));
        }
        rec.record();
    }
    Ok(())
}

fn ouc_tcp(
    s: &mut TcpStream,
    n: usize,
    order: ByteOrder,
    rec: &mut Recorder,
) -> Result<(), HarnessError> {
    let mut buf = vec![0u8; 4 * n];
    while !rec.done() {
        let r = read_full(s, &mut buf, &mut || !rec.timed_out());
        rec.check(r.map(|_| Vec::new()))?;
        OucPayload::decode(&buf, order)?;
        rec.record();
    }
    Ok(())
}

fn send_s7(s: &mut TcpStream, msg: S7Message) -> Result<(), HarnessError> {
    s.write_all(&msg.encode()?)?;
    Ok(())
}

fn read_s7(s: &mut TcpStream, rec: &Recorder) -> Result<S7Message, HarnessError> {
    let frame = rec.check(read_tpkt(s, &mut || !rec.timed_out()))?;
    Ok(S7Message::decode(&frame)?)
}

/// Connects, negotiates the PDU size and returns it.
pub fn s7_handshake(s: &mut TcpStream, rec_timeout: Duration) -> Result<u16, HarnessError> {
    let rec = Recorder::new(0, rec_timeout);
    send_s7(s, S7Message::ConnectRequest(CotpConnect::request(1)))?;
    match read_s7(s, &rec)? {
        S7Message::ConnectConfirm(_) => {}
        other => {
            return Err(HarnessError::Protocol(format!(
                "expected connect confirm, got {other:?}"
            )))
        }
    }
    send_s7(
        s,
        S7Message::SetupRequest(SetupCommunication {
            pdu_ref: 0,
            max_amq_calling: 1,
            max_amq_called: 1,
            pdu_length: REQUESTED_PDU,
        }),
    )?;
    match read_s7(s, &rec)? {
        S7Message::SetupResponse(ack) if ack.error == Default::default() => {
            Ok(ack.params.pdu_length)
        }
        other => Err(HarnessError::Protocol(format!(
            "setup communication failed: {other:?}"
        ))),
    }
}

fn s7(s: &mut TcpStream, n: usize, rec: &mut Recorder) -> Result<(), HarnessError> {
    let pdu = s7_handshake(s, rec.timeout)?;
    let mut pdu_ref = 1u16;
    rec.waiting_since = Instant::now();
    while !rec.done() {
        let jobs = split_for_pdu(n, pdu, stock::S7_DB, 0, pdu_ref);
        pdu_ref = pdu_ref.wrapping_add(jobs.len() as u16);
        for job in jobs {
            let want: usize = job.items.iter().map(|i| i.length as usize).sum();
            let job_ref = job.pdu_ref;
            send_s7(s, S7Message::ReadJob(job))?;
            let mut got = 0;
            while got < want {
                match read_s7(s, rec)? {
                    S7Message::ReadAck(ack) if ack.pdu_ref == job_ref => {
                        for item in &ack.items {
                            let data = item.data().ok_or_else(|| {
                                HarnessError::Protocol(format!("read failed: {item:?}"))
                            })?;
                            got += data.len();
                        }
                        if ack.items.is_empty() {
                            return Err(HarnessError::Protocol(format!(
                                "job rejected: {:?}",
                                ack.error
                            )));
                        }
                    }
                    other => return Err(HarnessError::Protocol(format!("unexpected {other:?}"))),
                }
            }
        }
        rec.record();
    }
    Ok(())
}

fn read_opcua(s: &mut TcpStream, rec: &Recorder) -> Result<OpcUaMessage, HarnessError> {
    let chunk = rec.check(read_opcua_chunk(s, &mut || !rec.timed_out()))?;
    Ok(OpcUaMessage::decode(&chunk)?)
}

fn opcua_read(s: &mut TcpStream, n: usize, rec: &mut Recorder) -> Result<(), HarnessError> {
    let mut handle = 0u32;
    while !rec.done() {
        handle = handle.wrapping_add(1);
        let ch = ChannelHeader {
            secure_channel_id: 1,
            token_id: 1,
            sequence_number: handle,
            request_id: handle,
        };
        let req = stock::read_request(ch, handle, n, stock::datetime_now());
        s.write_all(&req.encode()?)?;
        match read_opcua(s, rec)? {
            OpcUaMessage {
                body: ServiceBody::ReadResponse(resp),
                channel,
            } if channel.request_id == handle => {
                if resp.results.len() != n || resp.results.iter().any(|v| v.value.is_none()) {
                    return Err(HarnessError::Protocol("read returned bad values".into()));
                }
            }
            other => {
                return Err(HarnessError::Protocol(format!(
                    "unexpected {:?}",
                    other.body
                )))
            }
        }
        rec.record();
    }
    Ok(())
}

fn opcua_write_server(s: &mut TcpStream, n: usize, rec: &mut Recorder) -> Result<(), HarnessError> {
    let mut sequence = 0u32;
    rec.waiting_since = Instant::now();
    while !rec.done() {
        let msg = read_opcua(s, rec)?;
        let ServiceBody::WriteRequest(req) = &msg.body else {
            return Err(HarnessError::Protocol(format!("unexpected {:?}", msg.body)));
        };
        if req.nodes.len() != n {
            return Err(HarnessError::Protocol(format!(
                "expected {n} written values, got {}",
                req.nodes.len()
            )));
        }
        rec.record();
        sequence = sequence.wrapping_add(1);
        let ch = ChannelHeader {
            sequence_number: sequence,
            ..msg.channel
        };
        let resp = stock::write_response(
            ch,
            req.header.request_handle,
            vec![STATUS_GOOD; n],
            stock::datetime_now(),
        );
        s.write_all(&resp.encode()?)?;
    }
    Ok(())
}
