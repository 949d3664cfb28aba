//! A software PLC. It serves the S7 protocol, OPC UA Read, OPC UA Write
//! (as a client), OUC over UDP and TCP, and publishes UADP, each paced to
//! the minimum update times and limited like the device profile it runs.

mod config;
mod opcua;
mod ouc;
mod pacing;
mod pubsub;
mod s7;
mod server;
mod store;

use std::io;
use std::net::SocketAddr;

use plcbench_core::{Device, InterfaceId};

pub use config::{
    configure_pubsub, AcceptedPubSub, DataSetWriterConfig, EmulatorConfig, ListenEndpoint,
    OpcUaWriteEndpoint, OucTcpEndpoint, OucUdpEndpoint, ProfileSpec, PubSubConfig, PubSubError,
    WriterGroupConfig,
};
pub use pacing::{sleep_until, Pacer};
pub use s7::{handle_s7_read, EMPTY_JOB_ERROR};
pub use server::{serve, BoundAddrs, EmulatorHandle};
pub use store::{DataBlockStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum EmulatorError {
    #[error("cannot bind {endpoint} endpoint to {addr}: {source}")]
    PortUnavailable {
        endpoint: InterfaceId,
        addr: SocketAddr,
        source: io::Error,
    },
    #[error("{device} does not offer {interface}")]
    UnsupportedInterface {
        interface: InterfaceId,
        device: Device,
    },
    #[error("port {0} is used by more than one endpoint")]
    DuplicatePort(u16),
    #[error(transparent)]
    PubSub(#[from] PubSubError),
    #[error("invalid emulator config: {0}")]
    Config(String),
}
