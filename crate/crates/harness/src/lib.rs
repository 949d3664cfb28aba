//! Edge-side measurement of PLC update times: the time between two
//! consecutive messages delivered to the application.

mod client;
mod stats;

use std::io;
use std::net::SocketAddr;
use std::time::Duration;

use plcbench_core::codec::CodecError;

pub use client::{
    run_measurement, s7_handshake, Endpoint, RunOptions, Session, MIN_COUNT, REQUESTED_PDU,
};
pub use stats::{
    summarize, MeasurementRun, StatsReport, UpdateTimeStats, DEFAULT_COUNT, DEFAULT_WARMUP,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot reach {addr}: {source}")]
    ConnectionFailed { addr: SocketAddr, source: io::Error },
    #[error("no message within {after:?} after {received} messages")]
    Timeout { after: Duration, received: usize },
    #[error("{have} samples after warmup, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}
