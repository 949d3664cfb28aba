use std::io::{self, ErrorKind};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use plcbench_core::{InterfaceId, PlcProfile};

use crate::config::EmulatorConfig;
use crate::pacing::Pacer;
use crate::store::DataBlockStore;
use crate::{opcua, ouc, pubsub, s7, EmulatorError};

/// How often blocked loops look at the stop flag.
pub(crate) const POLL: Duration = Duration::from_millis(20);

/// State shared by all service loops of one emulator.
pub(crate) struct Shared {
    pub profile: PlcProfile,
    pub store: DataBlockStore,
    pub stop: AtomicBool,
    served: [AtomicU64; 6],
    jitter: f64,
    guard: f64,
    seed: u64,
    connections: Mutex<Vec<JoinHandle<()>>>,
}

impl Shared {
    pub fn stopped(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }

    pub fn keep_waiting(&self) -> impl FnMut() -> bool + '_ {
        move || !self.stopped()
    }

    pub fn pacer(&self, interface: InterfaceId) -> Pacer {
        Pacer::new(self.jitter, self.guard, self.seed ^ index(interface) as u64)
    }

    /// Spacing between messages of `interface` carrying `n` values.
    pub fn interval(&self, interface: InterfaceId, n: usize) -> Duration {
        let ms = self
            .profile
            .message_interval_ms(interface, n.max(1))
            .expect("endpoint only runs for supported interfaces");
        Duration::from_secs_f64(ms / 1000.0)
    }

    pub fn count(&self, interface: InterfaceId) {
        self.served[index(interface)].fetch_add(1, Ordering::Relaxed);
    }

    fn spawn_connection(self: &Arc<Self>, f: impl FnOnce() + Send + 'static) {
        let handle = thread::spawn(f);
        let mut conns = self.connections.lock().unwrap();
        conns.retain(|h| !h.is_finished());
        conns.push(handle);
    }
}

fn index(interface: InterfaceId) -> usize {
    InterfaceId::ALL
        .iter()
        .position(|&i| i == interface)
        .expect("listed interface")
}

pub(crate) fn prepare_stream(stream: &TcpStream) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    stream.set_write_timeout(Some(Duration::from_secs(2)))
}

/// Addresses the endpoints actually bound, useful with port 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundAddrs {
    pub s7: Option<SocketAddr>,
    pub opcua_read: Option<SocketAddr>,
    pub ouc_tcp: Option<SocketAddr>,
    pub ouc_udp: Option<SocketAddr>,
}

/// A running emulator. Dropping it stops all service loops.
pub struct EmulatorHandle {
    shared: Arc<Shared>,
    loops: Vec<JoinHandle<()>>,
    addrs: BoundAddrs,
}

impl std::fmt::Debug for EmulatorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmulatorHandle")
            .field("device", &self.shared.profile.device)
            .field("addrs", &self.addrs)
            .finish_non_exhaustive()
    }
}

impl EmulatorHandle {
    pub fn addrs(&self) -> BoundAddrs {
        self.addrs
    }

    pub fn profile(&self) -> &PlcProfile {
        &self.shared.profile
    }

    pub fn store(&self) -> &DataBlockStore {
        &self.shared.store
    }

    /// Messages sent so far on `interface`.
    pub fn served(&self, interface: InterfaceId) -> u64 {
        self.shared.served[index(interface)].load(Ordering::Relaxed)
    }

    /// Stops every loop and waits for them to finish.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        for h in self.loops.drain(..) {
            let _ = h.join();
        }
        let conns: Vec<_> = self.shared.connections.lock().unwrap().drain(..).collect();
        for h in conns {
            let _ = h.join();
        }
    }
}

impl Drop for EmulatorHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

fn bind_tcp(
    config: &EmulatorConfig,
    interface: InterfaceId,
    port: u16,
) -> Result<TcpListener, EmulatorError> {
    let addr = SocketAddr::new(config.bind, port);
    let listener = TcpListener::bind(addr)
        .and_then(|l| l.set_nonblocking(true).map(|_| l))
        .map_err(|source| EmulatorError::PortUnavailable {
            endpoint: interface,
            addr,
            source,
        })?;
    Ok(listener)
}

/// Accepts connections until stopped, running `handle` on its own thread
/// for each accepted stream.
fn accept_loop<F>(shared: Arc<Shared>, listener: TcpListener, handle: F) -> JoinHandle<()>
where
    F: Fn(Arc<Shared>, TcpStream, SocketAddr) + Send + Sync + Clone + 'static,
{
    thread::spawn(move || {
        while !shared.stopped() {
            match listener.accept() {
                Ok((stream, peer)) => {
                    if let Err(e) = prepare_stream(&stream) {
                        log::warn!("dropping connection from {peer}: {e}");
                        continue;
                    }
                    let (shared2, handle) = (Arc::clone(&shared), handle.clone());
                    shared.spawn_connection(move || handle(shared2, stream, peer));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(2))
                }
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    thread::sleep(POLL);
                }
            }
        }
    })
}

/// Starts every endpoint in `config`. Nothing is started unless all of
/// them can be.
pub fn serve(config: &EmulatorConfig) -> Result<EmulatorHandle, EmulatorError> {
    let profile = config.profile.resolve();
    config.validate(&profile)?;

    let s7_listener = config
        .s7
        .as_ref()
        .map(|e| bind_tcp(config, InterfaceId::S7, e.port))
        .transpose()?;
    let read_listener = config
        .opcua_read
        .as_ref()
        .map(|e| bind_tcp(config, InterfaceId::OpcUaRead, e.port))
        .transpose()?;
    let tcp_listener = config
        .ouc_tcp
        .as_ref()
        .map(|e| bind_tcp(config, InterfaceId::OucTcp, e.port))
        .transpose()?;
    let udp_socket = config
        .ouc_udp
        .as_ref()
        .map(|e| {
            let addr = SocketAddr::new(config.bind, e.port);
            UdpSocket::bind(addr).map_err(|source| EmulatorError::PortUnavailable {
                endpoint: InterfaceId::OucUdp,
                addr,
                source,
            })
        })
        .transpose()?;

    let any = SocketAddr::new(config.bind, 0);
    let pubsub_sockets = config
        .pubsub
        .iter()
        .flat_map(|ps| ps.writer_groups.iter().cloned())
        .map(|group| {
            UdpSocket::bind(any).map(|s| (s, group)).map_err(|source| {
                EmulatorError::PortUnavailable {
                    endpoint: InterfaceId::Uadp,
                    addr: any,
                    source,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let addrs = BoundAddrs {
        s7: s7_listener.as_ref().and_then(|l| l.local_addr().ok()),
        opcua_read: read_listener.as_ref().and_then(|l| l.local_addr().ok()),
        ouc_tcp: tcp_listener.as_ref().and_then(|l| l.local_addr().ok()),
        ouc_udp: udp_socket.as_ref().and_then(|s| s.local_addr().ok()),
    };

    let shared = Arc::new(Shared {
        store: DataBlockStore::with_ramp(&config.data_blocks),
        profile,
        stop: AtomicBool::new(false),
        served: Default::default(),
        jitter: config.jitter,
        guard: config.guard,
        seed: config.seed,
        connections: Mutex::new(Vec::new()),
    });

    let mut loops = Vec::new();
    if let Some(l) = s7_listener {
        let pacer = Arc::new(Mutex::new(shared.pacer(InterfaceId::S7)));
        loops.push(accept_loop(
            Arc::clone(&shared),
            l,
            move |sh, stream, peer| s7::serve_connection(&sh, stream, peer, &pacer),
        ));
    }
    if let Some(l) = read_listener {
        let pacer = Arc::new(Mutex::new(shared.pacer(InterfaceId::OpcUaRead)));
        loops.push(accept_loop(
            Arc::clone(&shared),
            l,
            move |sh, stream, peer| opcua::serve_connection(&sh, stream, peer, &pacer),
        ));
    }
    if let (Some(l), Some(ep)) = (tcp_listener, config.ouc_tcp.clone()) {
        let pacer = Arc::new(Mutex::new(shared.pacer(InterfaceId::OucTcp)));
        loops.push(accept_loop(
            Arc::clone(&shared),
            l,
            move |sh, stream, peer| ouc::serve_tcp_partner(&sh, stream, peer, &ep, &pacer),
        ));
    }
    if let (Some(sock), Some(ep)) = (udp_socket, config.ouc_udp.clone()) {
        let sh = Arc::clone(&shared);
        loops.push(thread::spawn(move || ouc::run_udp_sender(&sh, sock, &ep)));
    }
    if let Some(ep) = config.opcua_write.clone() {
        let sh = Arc::clone(&shared);
        loops.push(thread::spawn(move || opcua::run_write_client(&sh, &ep)));
    }
    for (sock, group) in pubsub_sockets {
        let sh = Arc::clone(&shared);
        let ps = config
            .pubsub
            .as_ref()
            .expect("sockets imply a PubSub config");
        let (publisher_id, destination) = (ps.publisher_id, ps.destination);
        loops.push(thread::spawn(move || {
            pubsub::run_writer_group(&sh, sock, publisher_id, destination, &group)
        }));
    }

    Ok(EmulatorHandle {
        shared,
        loops,
        addrs,
    })
}
