//! One function per mode.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use plcbench_core::frame::efficiency_row;
use plcbench_core::offload::{build_breakeven_table, ScenarioConfig, UpdateOverride};
use plcbench_core::{Device, InterfaceId, NBucket, PlcProfile};
use plcbench_emulator::{
    serve, EmulatorConfig, ListenEndpoint, OpcUaWriteEndpoint, OucTcpEndpoint, OucUdpEndpoint,
    ProfileSpec, PubSubConfig,
};
use plcbench_harness::{Endpoint, MeasurementRun, RunOptions, Session, StatsReport};

use crate::config::{BenchConfig, Format};
use crate::loopback::{measure_loopback, LoopbackOptions};
use crate::report::{self, config_hash, DeviceCell, EfficiencyLine, Report, UpdateSource};
use crate::{selftest, CliError};

/// What a report's hash covers: the settings and the contents of every
/// input file.
#[derive(Serialize)]
struct HashInput<'a> {
    config: &'a BenchConfig,
    overrides: &'a [UpdateOverride],
    scenario: Option<&'a ScenarioConfig>,
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Update times from stats files of earlier runs; each run contributes its
/// minimum gap.
pub fn load_overrides(paths: &[impl AsRef<Path>]) -> Result<Vec<UpdateOverride>, CliError> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let report = StatsReport::from_json(&read_file(p)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let device = report
                .device
                .ok_or_else(|| CliError::Config(format!("{}: run names no device", p.display())))?;
            Ok(UpdateOverride {
                interface: report.interface,
                device,
                n: report.n,
                ms: report.stats.min_ms,
            })
        })
        .collect()
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Efficiency and update time per (interface, n), one cell per device.
pub fn efficiency_lines(
    interfaces: &[InterfaceId],
    ns: &[usize],
    devices: &[Device],
    overrides: &[UpdateOverride],
) -> Vec<EfficiencyLine> {
    let profiles: Vec<PlcProfile> = devices.iter().map(|&d| PlcProfile::stock(d)).collect();
    let mut lines = Vec::new();
    for &interface in interfaces {
        if !profiles.iter().any(|p| p.supports(interface)) {
            continue;
        }
        for &n in ns {
            let mut estimated = false;
            let cells = profiles
                .iter()
                .map(|p| {
                    let row = efficiency_row(interface, n, p).ok();
                    estimated |= row.as_ref().is_some_and(|r| r.estimated);
                    let measured = overrides
                        .iter()
                        .find(|o| o.interface == interface && o.device == p.device && o.n == n)
                        .map(|o| (o.ms, UpdateSource::Measured));
                    let update = measured.or_else(|| {
                        p.min_update_time(interface, NBucket::nearest(n))
                            .map(|t| (t.ms, UpdateSource::Profile))
                    });
                    DeviceCell::from_row(p.device, row.as_ref(), update)
                })
                .collect();
            lines.push(EfficiencyLine {
                interface,
                n,
                estimated,
                devices: cells,
            });
        }
    }
    lines
}

pub fn tables(cfg: &BenchConfig) -> Result<Vec<Report>, CliError> {
    let overrides = load_overrides(&cfg.t_update_from)?;
    let hash = config_hash(&HashInput {
        config: cfg,
        overrides: &overrides,
        scenario: None,
    });
    let devices = cfg.devices();
    let lines = efficiency_lines(&cfg.interfaces, &cfg.n_values, &devices, &overrides);
    Ok(vec![
        report::message_sizes(&cfg.interfaces, &cfg.n_values, cfg.format, &hash),
        report::efficiency(&lines, &devices, cfg.format, &hash),
    ])
}

pub fn breakeven(cfg: &BenchConfig) -> Result<Vec<Report>, CliError> {
    let mut scenario = match &cfg.scenario {
        Some(p) => load_scenario(p)?,
        None => ScenarioConfig::default(),
    };
    let overrides = load_overrides(&cfg.t_update_from)?;
    scenario
        .t_update_overrides
        .extend(overrides.iter().copied());
    let hash = config_hash(&HashInput {
        config: cfg,
        overrides: &overrides,
        scenario: Some(&scenario),
    });
    let profiles: Vec<PlcProfile> = cfg.devices().into_iter().map(PlcProfile::stock).collect();
    let mut table = build_breakeven_table(&profiles, &cfg.interfaces, &scenario);
    table.cells.retain(|c| cfg.n_values.contains(&c.n));
    if table.cells.is_empty() {
        return Err(CliError::Config(
            "break-even points exist for n = 1, 10 and 100 only".into(),
        ));
    }
    Ok(vec![report::breakeven(&table, cfg.format, &hash)])
}

pub fn roundtrip_selftest(cfg: &BenchConfig) -> Result<Vec<Report>, CliError> {
    let results = selftest::run(cfg.count, cfg.seed);
    let hash = config_hash(&HashInput {
        config: cfg,
        overrides: &[],
        scenario: None,
    });
    let body = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                generator: &'static str,
                config: &'a str,
                checks: &'a [selftest::CheckResult],
            }
            serde_json::to_string_pretty(&Out {
                generator: report::TOOL,
                config: &hash,
                checks: &results,
            })
            .expect("plain data serializes")
                + "\n"
        }
        Format::Csv | Format::Md => results
            .iter()
            .map(|r| {
                format!(
                    "{} {}: {}\n",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.check,
                    r.detail
                )
            })
            .collect(),
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    let reports = vec![Report {
        name: "selftest".into(),
        format: cfg.format,
        body,
    }];
    if failed > 0 {
        report::emit(&reports, cfg.out.as_deref())?;
        return Err(CliError::SelfTest(failed));
    }
    Ok(reports)
}

fn run_options(cfg: &BenchConfig, device: Device) -> RunOptions {
    RunOptions {
        count: cfg.count,
        warmup: cfg.warmup,
        device: Some(device),
        ..Default::default()
    }
}

fn measure_one(
    cfg: &BenchConfig,
    device: Device,
    interface: InterfaceId,
    n: usize,
) -> Result<MeasurementRun, CliError> {
    let opts = run_options(cfg, device);
    if cfg.loopback {
        let emu = LoopbackOptions {
            seed: cfg.seed,
            ..Default::default()
        };
        return Ok(measure_loopback(device, interface, n, opts, emu)?);
    }
    let endpoint = if interface.is_push() || interface == InterfaceId::OpcUaWrite {
        match interface {
            InterfaceId::OucTcp => Endpoint::Connect(cfg.endpoint_addr(target(cfg)?, interface)),
            _ => Endpoint::Listen(cfg.endpoint_addr(cfg.bind, interface)),
        }
    } else {
        Endpoint::Connect(cfg.endpoint_addr(target(cfg)?, interface))
    };
    Ok(Session::open(interface, endpoint, opts)?.run(n)?)
}

fn target(cfg: &BenchConfig) -> Result<std::net::IpAddr, CliError> {
    cfg.target
        .ok_or_else(|| CliError::Config("--target is needed to reach the PLC".into()))
}

fn run_file_stem(r: &MeasurementRun) -> String {
    let device = r.device.map_or("unknown", Device::as_str);
    format!("run_{}_{}_n{}", r.interface, device, r.n)
}

pub fn measure(cfg: &BenchConfig) -> Result<Vec<Report>, CliError> {
    let devices = match (cfg.loopback, cfg.profile) {
        (true, _) => cfg.devices(),
        (false, Some(d)) => vec![d],
        (false, None) => return Err(CliError::Config("--profile names the measured PLC".into())),
    };
    let mut stats = Vec::new();
    let mut reports = Vec::new();
    for &device in &devices {
        let profile = PlcProfile::stock(device);
        for &interface in &cfg.interfaces {
            if !profile.supports(interface) {
                eprintln!("skipping {interface}: not offered by {device}");
                continue;
            }
            for &n in &cfg.n_values {
                let run = measure_one(cfg, device, interface, n)?;
                let summary = StatsReport::new(&run)?;
                if cfg.out.is_some() {
                    let mut raw = Vec::new();
                    run.write_csv(&mut raw)?;
                    reports.push(Report {
                        name: run_file_stem(&run),
                        format: Format::Csv,
                        body: String::from_utf8(raw).expect("csv is utf-8"),
                    });
                    reports.push(Report {
                        name: run_file_stem(&run).replacen("run_", "stats_", 1),
                        format: Format::Json,
                        body: summary.to_json() + "\n",
                    });
                }
                stats.push(summary);
            }
        }
    }
    reports.push(measurement_summary(&stats, cfg.format));
    Ok(reports)
}

fn measurement_summary(stats: &[StatsReport], format: Format) -> Report {
    let body = match format {
        Format::Json => serde_json::to_string_pretty(stats).expect("plain data serializes") + "\n",
        Format::Csv | Format::Md => {
            let header = "interface,device,n,samples,min_ms,mean_ms,p50_ms,p99_ms";
            let rows: Vec<String> = stats
                .iter()
                .map(|s| {
                    format!(
                        "{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
                        s.interface,
                        s.device.map_or("", Device::as_str),
                        s.n,
                        s.stats.sample_count,
                        s.stats.min_ms,
                        s.stats.mean_ms,
                        s.stats.p50_ms,
                        s.stats.p99_ms
                    )
                })
                .collect();
            if format == Format::Csv {
                std::iter::once(header.to_string())
                    .chain(rows)
                    .map(|l| l + "\n")
                    .collect()
            } else {
                let md = |l: &str| format!("| {} |\n", l.replace(',', " | "));
                let mut out = md(header);
                out.push_str(&md(&["---"; 8].join(",")));
                out.extend(rows.iter().map(|r| md(r)));
                out
            }
        }
    };
    Report {
        name: "measurements".into(),
        format,
        body,
    }
}

/// The emulator setup described by the flags.
pub fn emulator_config(cfg: &BenchConfig) -> Result<EmulatorConfig, CliError> {
    if let Some(path) = &cfg.emulator_config {
        return Ok(EmulatorConfig::load(path)?);
    }
    let device = cfg
        .profile
        .ok_or_else(|| CliError::Config("--profile selects the emulated PLC".into()))?;
    let profile = PlcProfile::stock(device);
    let values = cfg.n_values[0];
    let mut ec = EmulatorConfig::new(ProfileSpec::Stock(device));
    ec.bind = cfg.bind;
    ec.seed = cfg.seed;
    let partner = |interface: InterfaceId| {
        cfg.partner.ok_or_else(|| {
            CliError::Config(format!(
                "{interface} needs --partner, the edge device address"
            ))
        })
    };
    for &interface in &cfg.interfaces {
        match interface {
            InterfaceId::S7 => ec.s7 = Some(ListenEndpoint { port: cfg.ports.s7 }),
            InterfaceId::OpcUaRead => {
                ec.opcua_read = Some(ListenEndpoint {
                    port: cfg.ports.opcua,
                })
            }
            InterfaceId::OucTcp => {
                ec.ouc_tcp = Some(OucTcpEndpoint {
                    port: cfg.ports.ouc_tcp,
                    partner_ip: partner(interface)?,
                    values,
                    byte_order: Default::default(),
                })
            }
            InterfaceId::OucUdp => {
                ec.ouc_udp = Some(OucUdpEndpoint {
                    partner: cfg.endpoint_addr(partner(interface)?, interface),
                    values,
                    byte_order: Default::default(),
                    port: 0,
                })
            }
            InterfaceId::OpcUaWrite => {
                ec.opcua_write = Some(OpcUaWriteEndpoint {
                    target: cfg.endpoint_addr(partner(interface)?, interface),
                    values,
                })
            }
            InterfaceId::Uadp => {
                let dest = cfg.endpoint_addr(partner(interface)?, interface);
                ec.pubsub = PubSubConfig::single(&profile, dest, values);
                if ec.pubsub.is_none() {
                    return Err(CliError::Config(format!("{device} does not publish UADP")));
                }
            }
        }
    }
    Ok(ec)
}

pub fn emulate(cfg: &BenchConfig) -> Result<Vec<Report>, CliError> {
    let ec = emulator_config(cfg)?;
    let emu = serve(&ec)?;
    let a = emu.addrs();
    let bound = [
        ("s7", a.s7),
        ("opcua-read", a.opcua_read),
        ("ouc-tcp", a.ouc_tcp),
        ("ouc-udp", a.ouc_udp),
    ];
    eprintln!("emulating {}", emu.profile().device);
    for (name, addr) in bound {
        if let Some(addr) = addr {
            eprintln!("  {name} on {addr}");
        }
    }
    let deadline = cfg
        .duration
        .map(|s| Instant::now() + Duration::from_secs_f64(s));
    while deadline.is_none_or(|d| Instant::now() < d) {
        std::thread::sleep(Duration::from_millis(100));
    }
    let served: Vec<String> = InterfaceId::ALL
        .iter()
        .filter(|&&i| emu.served(i) > 0)
        .map(|&i| format!("{i}={}", emu.served(i)))
        .collect();
    emu.shutdown();
    eprintln!(
        "messages sent: {}",
        if served.is_empty() {
            "none".into()
        } else {
            served.join(" ")
        }
    );
    Ok(Vec::new())
}
