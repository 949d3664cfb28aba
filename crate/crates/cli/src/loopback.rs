//! One measurement against an emulator started for just that run.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};

use plcbench_core::{Device, InterfaceId, PlcProfile};
use plcbench_emulator::{
    serve, EmulatorConfig, EmulatorError, ListenEndpoint, OpcUaWriteEndpoint, OucTcpEndpoint,
    OucUdpEndpoint, ProfileSpec, PubSubConfig,
};
use plcbench_harness::{Endpoint, HarnessError, MeasurementRun, RunOptions, Session};

const LOCALHOST: IpAddr = IpAddr::V4(Ipv4Addr::LOCALHOST);

#[derive(Debug, thiserror::Error)]
pub enum LoopbackError {
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{interface} is not offered by {device}")]
    Unsupported {
        interface: InterfaceId,
        device: Device,
    },
}

/// Emulator settings a loopback run may override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopbackOptions {
    pub jitter: f64,
    pub guard: f64,
    pub seed: u64,
}

impl Default for LoopbackOptions {
    fn default() -> Self {
        let cfg = EmulatorConfig::new(ProfileSpec::Stock(Device::S7_314));
        LoopbackOptions {
            jitter: cfg.jitter,
            guard: cfg.guard,
            seed: cfg.seed,
        }
    }
}

/// Starts an emulator with the single endpoint needed, measures it over
/// the loopback interface and shuts it down again.
pub fn measure_loopback(
    device: Device,
    interface: InterfaceId,
    n: usize,
    run: RunOptions,
    emu: LoopbackOptions,
) -> Result<MeasurementRun, LoopbackError> {
    let profile = PlcProfile::stock(device);
    if !profile.supports(interface) {
        return Err(LoopbackError::Unsupported { interface, device });
    }
    let mut cfg = EmulatorConfig::new(ProfileSpec::Stock(device));
    cfg.bind = LOCALHOST;
    cfg.jitter = emu.jitter;
    cfg.guard = emu.guard;
    cfg.seed = emu.seed;
    let run = RunOptions {
        device: Some(device),
        ..run
    };
    let any = SocketAddr::new(LOCALHOST, 0);

    // endpoints the PLC sends to must exist before it starts
    let listen =
        match interface {
            InterfaceId::OucUdp | InterfaceId::Uadp | InterfaceId::OpcUaWrite => Some(
                Session::open(interface, Endpoint::Listen(any), run.clone())?,
            ),
            _ => None,
        };
    let local = listen.as_ref().map(Session::local_addr).transpose()?;

    match interface {
        InterfaceId::S7 => cfg.s7 = Some(ListenEndpoint { port: 0 }),
        InterfaceId::OpcUaRead => cfg.opcua_read = Some(ListenEndpoint { port: 0 }),
        InterfaceId::OucTcp => {
            cfg.ouc_tcp = Some(OucTcpEndpoint {
                port: 0,
                partner_ip: LOCALHOST,
                values: n,
                byte_order: run.byte_order,
            })
        }
        InterfaceId::OucUdp => {
            cfg.ouc_udp = Some(OucUdpEndpoint {
                partner: local.expect("bound above"),
                values: n,
                byte_order: run.byte_order,
                port: 0,
            })
        }
        InterfaceId::OpcUaWrite => {
            cfg.opcua_write = Some(OpcUaWriteEndpoint {
                target: local.expect("bound above"),
                values: n,
            })
        }
        InterfaceId::Uadp => {
            cfg.pubsub = PubSubConfig::single(&profile, local.expect("bound above"), n);
        }
    }
    let emulator = serve(&cfg)?;
    let addrs = emulator.addrs();
    let session = match (listen, interface) {
        (Some(s), _) => s,
        (None, InterfaceId::S7) => Session::open(
            interface,
            Endpoint::Connect(addrs.s7.expect("s7 bound")),
            run,
        )?,
        (None, InterfaceId::OpcUaRead) => Session::open(
            interface,
            Endpoint::Connect(addrs.opcua_read.expect("server bound")),
            run,
        )?,
        (None, _) => Session::open(
            interface,
            Endpoint::Connect(addrs.ouc_tcp.expect("listener bound")),
            run,
        )?,
    };
    let result = session.run(n);
    emulator.shutdown();
    Ok(result?)
}
