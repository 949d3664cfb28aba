//! Command-line flags, the optional JSON config file and their merge.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use plcbench_core::{Device, InterfaceId, NBucket};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Run the software PLC until stopped or `--duration` elapses.
    Emulate,
    /// Measure update times against a PLC or the built-in emulator.
    Measure,
    /// Message sizes and protocol efficiency.
    Tables,
    /// Break-even points of computation offloading.
    Breakeven,
    /// Codec round trips and size checks.
    RoundtripSelftest,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Md,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Md => "md",
            Format::Json => "json",
        }
    }
}

/// Ports of the PLC-side endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ports {
    pub s7: u16,
    pub opcua: u16,
    pub ouc_tcp: u16,
    pub ouc_udp: u16,
    pub uadp: u16,
}

impl Default for Ports {
    fn default() -> Self {
        Ports {
            s7: 102,
            opcua: 4840,
            ouc_tcp: 2000,
            ouc_udp: 2001,
            uadp: 4840,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "plcbench",
    version,
    about = "PLC interface emulator, update-time harness and report tables"
)]
pub struct Args {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// JSON file with defaults for every flag.
    #[arg(long, env = "PLCBENCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// s7-314 or s7-1512; all devices when omitted.
    #[arg(long, visible_alias = "device")]
    pub profile: Option<Device>,
    /// Interfaces to include, comma separated or repeated.
    #[arg(long, visible_alias = "interfaces", value_delimiter = ',')]
    pub interface: Vec<InterfaceId>,
    /// Values per message, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Break-even scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Stats files of earlier measurements replacing the configured
    /// update times.
    #[arg(long, value_delimiter = ',')]
    pub t_update_from: Vec<PathBuf>,
    #[arg(long)]
    pub port_s7: Option<u16>,
    #[arg(long)]
    pub port_opcua: Option<u16>,
    #[arg(long)]
    pub port_ouc_tcp: Option<u16>,
    #[arg(long)]
    pub port_ouc_udp: Option<u16>,
    #[arg(long)]
    pub port_uadp: Option<u16>,
    /// PLC address to connect to when measuring.
    #[arg(long)]
    pub target: Option<IpAddr>,
    /// Local address to bind: emulator endpoints, or the listening side of
    /// a measurement.
    #[arg(long)]
    pub bind: Option<IpAddr>,
    /// Edge device address the emulator sends to or accepts as OUC partner.
    #[arg(long)]
    pub partner: Option<IpAddr>,
    /// Measure against an emulator started in-process.
    #[arg(long)]
    pub loopback: bool,
    /// Messages recorded per measurement after the warmup.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Full emulator configuration, overriding the endpoint flags.
    #[arg(long)]
    pub emulator_config: Option<PathBuf>,
    /// Seconds to emulate before exiting.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Seed for the emulator jitter and the self-test messages.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Contents of the config file; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub profile: Option<Device>,
    pub interfaces: Option<Vec<InterfaceId>>,
    pub n_values: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub scenario: Option<PathBuf>,
    pub t_update_from: Option<Vec<PathBuf>>,
    pub ports: Option<Ports>,
    pub target: Option<IpAddr>,
    pub bind: Option<IpAddr>,
    pub partner: Option<IpAddr>,
    pub loopback: Option<bool>,
    pub count: Option<usize>,
    pub warmup: Option<usize>,
    pub emulator_config: Option<PathBuf>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))
    }
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub mode: Mode,
    pub profile: Option<Device>,
    pub interfaces: Vec<InterfaceId>,
    pub n_values: Vec<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub scenario: Option<PathBuf>,
    #[serde(skip)]
    pub t_update_from: Vec<PathBuf>,
    pub ports: Ports,
    pub target: Option<IpAddr>,
    pub bind: IpAddr,
    pub partner: Option<IpAddr>,
    pub loopback: bool,
    pub count: usize,
    pub warmup: usize,
    #[serde(skip)]
    pub emulator_config: Option<PathBuf>,
    pub duration: Option<f64>,
    pub seed: u64,
}

/// Most values a single message may carry on `interface`.
pub fn max_values(interface: InterfaceId) -> usize {
    match interface {
        // one unfragmented datagram
        InterfaceId::OucUdp => 368,
        _ => 100,
    }
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

impl BenchConfig {
    /// Merges flags over the config file over the defaults and checks the
    /// result.
    pub fn resolve(args: Args) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut ports = file.ports.unwrap_or_default();
        let flag_ports = [
            (args.port_s7, &mut ports.s7),
            (args.port_opcua, &mut ports.opcua),
            (args.port_ouc_tcp, &mut ports.ouc_tcp),
            (args.port_ouc_udp, &mut ports.ouc_udp),
            (args.port_uadp, &mut ports.uadp),
        ];
        for (flag, slot) in flag_ports {
            if let Some(p) = flag {
                *slot = p;
            }
        }
        let mode = args
            .mode
            .or(file.mode)
            .ok_or_else(|| CliError::Config("no --mode given".into()))?;
        let cfg = BenchConfig {
            mode,
            profile: args.profile.or(file.profile),
            interfaces: non_empty(args.interface)
                .or(file.interfaces)
                .unwrap_or_else(|| InterfaceId::ALL.to_vec()),
            n_values: non_empty(args.n)
                .or(file.n_values)
                .unwrap_or_else(|| NBucket::ALL.map(NBucket::values).to_vec()),
            out: args.out.or(file.out),
            format: args.format.or(file.format).unwrap_or_default(),
            scenario: args.scenario.or(file.scenario),
            t_update_from: non_empty(args.t_update_from)
                .or(file.t_update_from)
                .unwrap_or_default(),
            ports,
            target: args.target.or(file.target),
            bind: args
                .bind
                .or(file.bind)
                .unwrap_or(IpAddr::V4(Ipv4Addr::LOCALHOST)),
            partner: args.partner.or(file.partner),
            loopback: args.loopback || file.loopback.unwrap_or(false),
            count: args
                .count
                .or(file.count)
                .unwrap_or(plcbench_harness::DEFAULT_COUNT),
            warmup: args
                .warmup
                .or(file.warmup)
                .unwrap_or(plcbench_harness::DEFAULT_WARMUP),
            emulator_config: args.emulator_config.or(file.emulator_config),
            duration: args.duration.or(file.duration),
            seed: args.seed.or(file.seed).unwrap_or(0),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        for &interface in &self.interfaces {
            if let Some(&n) = self
                .n_values
                .iter()
                .find(|&&n| n == 0 || n > max_values(interface))
            {
                return Err(CliError::Config(format!(
                    "{interface} carries 1 to {} values per message, got {n}",
                    max_values(interface)
                )));
            }
        }
        if let Some(d) = self.duration {
            if !(d.is_finite() && d > 0.0) {
                return Err(CliError::Config(format!(
                    "duration must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn devices(&self) -> Vec<Device> {
        match self.profile {
            Some(d) => vec![d],
            None => Device::ALL.to_vec(),
        }
    }

    /// Address of the PLC endpoint for `interface` on `host`.
    pub fn endpoint_addr(&self, host: IpAddr, interface: InterfaceId) -> SocketAddr {
        let port = match interface {
            InterfaceId::S7 => self.ports.s7,
            InterfaceId::OpcUaRead | InterfaceId::OpcUaWrite => self.ports.opcua,
            InterfaceId::OucTcp => self.ports.ouc_tcp,
            InterfaceId::OucUdp => self.ports.ouc_udp,
            InterfaceId::Uadp => self.ports.uadp,
        };
        SocketAddr::new(host, port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("plcbench").chain(list.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let cfg = BenchConfig::resolve(args(&["--mode", "tables"])).unwrap();
        assert_eq!(cfg.interfaces, InterfaceId::ALL);
        assert_eq!(cfg.n_values, [1, 10, 100]);
        assert_eq!(cfg.format, Format::Md);
        assert_eq!(cfg.devices(), Device::ALL);
    }

    #[test]
    fn lists_and_aliases() {
        let cfg = BenchConfig::resolve(args(&[
            "--mode",
            "tables",
            "--interfaces",
            "ouc-udp,s7",
            "--n",
            "50",
            "--device",
            "314",
        ]))
        .unwrap();
        assert_eq!(cfg.interfaces, [InterfaceId::OucUdp, InterfaceId::S7]);
        assert_eq!(cfg.n_values, [50]);
        assert_eq!(cfg.profile, Some(Device::S7_314));
    }

    #[test]
    fn value_range() {
        assert!(BenchConfig::resolve(args(&["--mode", "tables", "--n", "101"])).is_err());
        assert!(BenchConfig::resolve(args(&[
            "--mode",
            "tables",
            "--interface",
            "ouc-udp",
            "--n",
            "300"
        ]))
        .is_ok());
        assert!(BenchConfig::resolve(args(&["--mode", "tables", "--n", "0"])).is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.json");
        std::fs::write(
            &path,
            r#"{"mode": "breakeven", "format": "csv", "ports": {"s7": 1102}}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = BenchConfig::resolve(args(&["--config", p, "--format", "json"])).unwrap();
        assert_eq!(cfg.mode, Mode::Breakeven);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.ports.s7, 1102);
        assert_eq!(cfg.ports.opcua, 4840);

        std::fs::write(&path, r#"{"mode": "tables", "colour": "red"}"#).unwrap();
        assert!(matches!(
            BenchConfig::resolve(args(&["--config", p])),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn mode_is_required() {
        assert!(matches!(
            BenchConfig::resolve(args(&[])),
            Err(CliError::Config(_))
        ));
    }
}
