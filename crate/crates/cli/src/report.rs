//! Report rendering. Every report starts with the tool version and a hash
//! of the settings and inputs it was computed from, and is otherwise a
//! pure function of them.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use plcbench_core::frame::{layouts, message_size, EfficiencyRow, MessageName};
use plcbench_core::offload::BreakEvenTable;
use plcbench_core::{Device, InterfaceId};

use crate::config::Format;
use crate::CliError;

pub const TOOL: &str = concat!("plcbench ", env!("CARGO_PKG_VERSION"));

/// First 16 hex digits of the SHA-256 of `input`'s JSON form.
pub fn config_hash<T: Serialize>(input: &T) -> String {
    let json = serde_json::to_vec(input).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// A finished report file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub name: String,
    pub format: Format,
    pub body: String,
}

impl Report {
    pub fn file_name(&self) -> String {
        format!("{}.{}", self.name, self.format.extension())
    }
}

fn header_line(format: Format, hash: &str) -> String {
    match format {
        Format::Csv => format!("# {TOOL} config {hash}\n"),
        Format::Md => format!("<!-- {TOOL} config {hash} -->\n\n"),
        Format::Json => String::new(),
    }
}

#[derive(Serialize)]
struct JsonReport<'a, T: Serialize> {
    generator: &'static str,
    config: &'a str,
    #[serde(flatten)]
    content: T,
}

fn json_body<T: Serialize>(hash: &str, content: T) -> String {
    let mut s = serde_json::to_string_pretty(&JsonReport {
        generator: TOOL,
        config: hash,
        content,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

fn csv_text(records: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        out.push('|');
        for c in cells {
            let _ = write!(out, " {c} |");
        }
        out.push('\n');
    };
    line(&mut out, header);
    line(&mut out, &vec!["---".to_string(); header.len()]);
    for r in rows {
        line(&mut out, r);
    }
    out
}

/// Sizes of every message of the selected interfaces.
pub fn message_sizes(
    interfaces: &[InterfaceId],
    ns: &[usize],
    format: Format,
    hash: &str,
) -> Report {
    let selected: Vec<_> = layouts()
        .iter()
        .filter(|l| interfaces.contains(&l.interface))
        .collect();
    let body = match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                interface: InterfaceId,
                message: MessageName,
                bytes: Vec<(usize, usize)>,
            }
            #[derive(Serialize)]
            struct Sizes {
                message_sizes: Vec<Row>,
            }
            let rows = selected
                .iter()
                .map(|l| Row {
                    interface: l.interface,
                    message: l.name,
                    bytes: ns.iter().map(|&n| (n, message_size(l, n))).collect(),
                })
                .collect();
            json_body(
                hash,
                Sizes {
                    message_sizes: rows,
                },
            )
        }
        Format::Csv | Format::Md => {
            let mut header = vec!["interface".to_string(), "message".to_string()];
            header.extend(ns.iter().map(|n| format!("n={n}")));
            let rows: Vec<Vec<String>> = selected
                .iter()
                .map(|l| {
                    let mut r = vec![l.interface.to_string(), l.name.to_string()];
                    r.extend(ns.iter().map(|&n| message_size(l, n).to_string()));
                    r
                })
                .collect();
            let table = if format == Format::Csv {
                csv_text(std::iter::once(header).chain(rows))
            } else {
                markdown(&header, &rows)
            };
            header_line(format, hash) + &table
        }
    };
    Report {
        name: "message_sizes".into(),
        format,
        body,
    }
}

/// Where an update time came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateSource {
    Profile,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceCell {
    pub device: Device,
    /// None where the device lacks the interface.
    pub efficiency_pct: Option<f64>,
    pub total_bytes: Option<usize>,
    pub requests: Option<usize>,
    pub update_ms: Option<f64>,
    pub update_source: Option<UpdateSource>,
}

/// One (interface, n) row of the efficiency table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyLine {
    pub interface: InterfaceId,
    pub n: usize,
    pub estimated: bool,
    pub devices: Vec<DeviceCell>,
}

impl DeviceCell {
    pub fn from_row(
        device: Device,
        row: Option<&EfficiencyRow>,
        update: Option<(f64, UpdateSource)>,
    ) -> Self {
        DeviceCell {
            device,
            efficiency_pct: row.map(|r| r.efficiency_pct.0 as f64 / 10.0),
            total_bytes: row.map(|r| r.total_bytes),
            requests: row.map(|r| r.requests),
            update_ms: update.map(|u| u.0),
            update_source: update.map(|u| u.1),
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |p| format!("{p:.1}"))
}

pub fn efficiency(
    lines: &[EfficiencyLine],
    devices: &[Device],
    format: Format,
    hash: &str,
) -> Report {
    let body = match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Eff<'a> {
                efficiency: &'a [EfficiencyLine],
            }
            json_body(hash, Eff { efficiency: lines })
        }
        Format::Csv => {
            let header = [
                "interface",
                "device",
                "n",
                "efficiency_pct",
                "total_bytes",
                "estimated_flag",
                "update_time_ms",
                "update_source",
            ]
            .map(String::from)
            .to_vec();
            // one row per cell the device offers
            let rows = lines.iter().flat_map(|l| {
                l.devices
                    .iter()
                    .filter(|c| c.efficiency_pct.is_some())
                    .map(move |c| {
                        vec![
                            l.interface.to_string(),
                            c.device.to_string(),
                            l.n.to_string(),
                            pct(c.efficiency_pct),
                            c.total_bytes.map(|b| b.to_string()).unwrap_or_default(),
                            l.estimated.to_string(),
                            c.update_ms.map(|t| format!("{t:.2}")).unwrap_or_default(),
                            match c.update_source {
                                Some(UpdateSource::Measured) => "measured".into(),
                                Some(UpdateSource::Profile) => "profile".into(),
                                None => String::new(),
                            },
                        ]
                    })
            });
            header_line(format, hash) + &csv_text(std::iter::once(header).chain(rows))
        }
        Format::Md => {
            let mut header = vec!["Interface".to_string(), "n".to_string()];
            header.extend(
                devices
                    .iter()
                    .map(|d| format!("Efficiency {} [%]", d.short())),
            );
            header.extend(devices.iter().map(|d| format!("Update {} [ms]", d.short())));
            let (mut estimated, mut measured) = (false, false);
            let rows: Vec<Vec<String>> = lines
                .iter()
                .map(|l| {
                    let mark = if l.estimated { "*" } else { "" };
                    estimated |= l.estimated;
                    let mut r = vec![l.interface.label().to_string(), l.n.to_string()];
                    r.extend(l.devices.iter().map(|c| match c.efficiency_pct {
                        Some(_) => format!("{}{mark}", pct(c.efficiency_pct)),
                        None => "n/a".into(),
                    }));
                    r.extend(
                        l.devices
                            .iter()
                            .map(|c| match (c.update_ms, c.update_source) {
                                (Some(t), Some(UpdateSource::Measured)) => {
                                    measured = true;
                                    format!("{t:.2}†")
                                }
                                (Some(t), _) => format!("{t:.2}{mark}"),
                                (None, _) => "n/a".into(),
                            }),
                    );
                    r
                })
                .collect();
            let mut out = header_line(format, hash) + &markdown(&header, &rows);
            if estimated {
                out.push_str("\n\\* more values than one writer group carries on current firmware; estimated\n");
            }
            if measured {
                out.push_str("\n† measured minimum update time\n");
            }
            out
        }
    };
    Report {
        name: "efficiency".into(),
        format,
        body,
    }
}

pub fn breakeven(table: &BreakEvenTable, format: Format, hash: &str) -> Report {
    let body = match format {
        Format::Json => json_body(hash, table),
        Format::Csv => header_line(format, hash) + &table.to_csv(),
        Format::Md => header_line(format, hash) + &table.to_markdown(),
    };
    Report {
        name: "breakeven".into(),
        format,
        body,
    }
}

/// Writes the reports into `dir`, or to stdout one after the other.
pub fn emit(reports: &[Report], dir: Option<&Path>) -> Result<(), CliError> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            for r in reports {
                let path = dir.join(r.file_name());
                std::fs::write(&path, &r.body)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
        }
        None => {
            let text: Vec<&str> = reports.iter().map(|r| r.body.as_str()).collect();
            print!("{}", text.join("\n"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_short() {
        let a = config_hash(&("tables", [1, 10, 100]));
        assert_eq!(a.len(), 16);
        assert_eq!(a, config_hash(&("tables", [1, 10, 100])));
        assert_ne!(a, config_hash(&("tables", [1, 10])));
    }

    #[test]
    fn sizes_filtered_by_interface() {
        let r = message_sizes(&[InterfaceId::S7], &[1, 10, 100], Format::Csv, "h");
        let lines: Vec<_> = r.body.lines().collect();
        assert_eq!(lines[0], format!("# {TOOL} config h"));
        assert_eq!(lines[1], "interface,message,n=1,n=10,n=100");
        assert_eq!(lines[2], "s7,Job,169,169,169");
        assert_eq!(lines[3], "s7,Ack_Data,167,203,563");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn json_carries_generator() {
        let r = message_sizes(&[InterfaceId::OucUdp], &[10], Format::Json, "abc");
        let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v["generator"], TOOL);
        assert_eq!(v["config"], "abc");
        assert_eq!(v["message_sizes"][0]["bytes"][0][1], 94);
    }
}
