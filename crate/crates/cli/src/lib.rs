//! Command-line front end: modes, config resolution and report output.

pub mod commands;
pub mod config;
pub mod loopback;
pub mod report;
pub mod selftest;

use plcbench_emulator::EmulatorError;
use plcbench_harness::HarnessError;

use crate::config::{Args, BenchConfig, Mode};
use crate::loopback::LoopbackError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error("{0} self-test checks failed")]
    SelfTest(usize),
}

impl From<LoopbackError> for CliError {
    fn from(e: LoopbackError) -> Self {
        match e {
            LoopbackError::Emulator(e) => e.into(),
            LoopbackError::Harness(e) => e.into(),
            e @ LoopbackError::Unsupported { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    /// 1 for bad input, 2 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Emulator(
                EmulatorError::UnsupportedInterface { .. }
                | EmulatorError::DuplicatePort(_)
                | EmulatorError::PubSub(_)
                | EmulatorError::Config(_),
            ) => 1,
            CliError::Io(_)
            | CliError::Harness(_)
            | CliError::Emulator(_)
            | CliError::SelfTest(_) => 2,
        }
    }
}

/// Runs one invocation and writes its reports.
pub fn run(args: Args) -> Result<(), CliError> {
    let cfg = BenchConfig::resolve(args)?;
    let reports = match cfg.mode {
        Mode::Tables => commands::tables(&cfg)?,
        Mode::Breakeven => commands::breakeven(&cfg)?,
        Mode::Measure => commands::measure(&cfg)?,
        Mode::Emulate => commands::emulate(&cfg)?,
        Mode::RoundtripSelftest => commands::roundtrip_selftest(&cfg)?,
    };
    report::emit(&reports, cfg.out.as_deref())
}
