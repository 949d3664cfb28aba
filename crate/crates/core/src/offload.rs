//! Cost model for moving a computation from the PLC to an edge node.
//!
//! The load is the Leibniz series for pi. On the PLC each partial sum
//! lengthens the cycle by a fixed amount; offloading instead pays the edge
//! compute time plus network, update and virtualization latencies. All
//! arithmetic is in microseconds; milliseconds appear only at the API
//! edges that say so.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::interface::{Device, InterfaceId, NBucket};
use crate::profile::PlcProfile;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OffloadError {
    #[error("no table row for {0} digits (rows cover 1 to 6)")]
    OutOfTable(usize),
    #[error("edge is not faster than the PLC ({edge_us} us vs {plc_us} us per partial sum)")]
    NoBenefit { plc_us: f64, edge_us: f64 },
}

/// Approximation of pi from the partial sums k = 0..=n.
pub fn leibniz_pi(n: u64) -> f64 {
    let mut sum = 0.0f64;
    for k in 0..=n {
        let term = 1.0 / (2 * k + 1) as f64;
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    4.0 * sum
}

/// Partial sums needed for 1..=6 leading digits, with the digits shown.
pub const DIGITS_TABLE: [(u64, &str); 6] = [
    (2, "3"),
    (32, "3.1"),
    (1_000, "3.14"),
    (10_000, "3.141"),
    (100_000, "3.141"),
    (1_000_000, "3.14159"),
];

/// Truncates `x` to `digits` significant digits (one before the point)
/// and formats it.
pub fn truncated_prefix(x: f64, digits: usize) -> String {
    let decimals = digits.saturating_sub(1);
    let scale = 10f64.powi(decimals as i32);
    let t = (x * scale).floor() / scale;
    format!("{t:.decimals$}")
}

pub fn matches_pi_prefix(x: f64, digits: usize) -> bool {
    truncated_prefix(x, digits) == truncated_prefix(PI, digits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitsRequired {
    pub digits: usize,
    /// Partial sums listed in the reference table.
    pub table_n: u64,
    pub table_prefix: &'static str,
    /// Whether the approximation at `table_n` actually shows the right
    /// prefix; false for the 5-digit row.
    pub table_row_matches: bool,
    /// Smallest n whose approximation shows the right prefix.
    pub minimal_n: u64,
}

pub fn digits_required(digits: usize) -> Result<DigitsRequired, OffloadError> {
    if !(1..=DIGITS_TABLE.len()).contains(&digits) {
        return Err(OffloadError::OutOfTable(digits));
    }
    let (table_n, table_prefix) = DIGITS_TABLE[digits - 1];
    Ok(DigitsRequired {
        digits,
        table_n,
        table_prefix,
        table_row_matches: matches_pi_prefix(leibniz_pi(table_n), digits),
        minimal_n: minimal_partial_sums(digits, 10_000_000),
    })
}

/// Linear scan for the first n whose approximation shows `digits` digits
/// of pi; `limit` if none up to it does.
pub fn minimal_partial_sums(digits: usize, limit: u64) -> u64 {
    let mut sum = 0.0f64;
    for k in 0..=limit {
        let term = 1.0 / (2 * k + 1) as f64;
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if matches_pi_prefix(4.0 * sum, digits) {
            return k;
        }
    }
    limit
}

/// Execution cost of one partial sum on a device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleModel {
    pub c_us: f64,
    /// Partial sums at which the PLC enters its stop state; informational.
    #[serde(default)]
    pub n_max: Option<u64>,
}

impl CycleModel {
    pub const S7_1512: CycleModel = CycleModel {
        c_us: 36.5,
        n_max: Some(164_000),
    };
    pub const S7_314: CycleModel = CycleModel {
        c_us: 20.2,
        n_max: Some(296_000),
    };
    pub const MINI_PC: CycleModel = CycleModel {
        c_us: 0.0349,
        n_max: None,
    };

    pub fn for_device(device: Device) -> CycleModel {
        match device {
            Device::S7_314 => Self::S7_314,
            Device::S7_1512 => Self::S7_1512,
        }
    }

    pub fn delta_t_cycle_us(&self, n: u64) -> f64 {
        self.c_us * n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub line_length_m: f64,
    pub hops: u32,
    pub per_meter_delay_ns: f64,
    pub per_hop_one_way_us: f64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel {
            line_length_m: 1000.0,
            hops: 10,
            per_meter_delay_ns: 5.0,
            per_hop_one_way_us: 7.5,
        }
    }
}

impl NetworkModel {
    pub const ZERO: NetworkModel = NetworkModel {
        line_length_m: 0.0,
        hops: 0,
        per_meter_delay_ns: 0.0,
        per_hop_one_way_us: 0.0,
    };

    /// Both directions together.
    pub fn t_network_us(&self) -> f64 {
        self.line_length_m * self.per_meter_delay_ns / 1000.0
            + f64::from(self.hops) * self.per_hop_one_way_us
    }
}

/// Virtualization overhead on the edge node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadModel {
    /// Context switch.
    pub t_co_us: f64,
    /// Network I/O through the hypervisor, paid on receive and on send.
    pub t_nio_us: f64,
}

impl Default for OverheadModel {
    fn default() -> Self {
        OverheadModel {
            t_co_us: 1.0,
            t_nio_us: 1.5,
        }
    }
}

impl OverheadModel {
    pub const ZERO: OverheadModel = OverheadModel {
        t_co_us: 0.0,
        t_nio_us: 0.0,
    };

    pub fn t_overhead_us(&self) -> f64 {
        2.0 * self.t_nio_us + self.t_co_us
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadScenario {
    pub plc: CycleModel,
    pub edge: CycleModel,
    pub network: NetworkModel,
    pub overhead: OverheadModel,
    pub t_update_us: f64,
    /// Round trips per update. An S7 read split over several PDUs pays
    /// network and overhead once per request.
    pub requests: u32,
}

impl OffloadScenario {
    pub fn new(plc: CycleModel, t_update_ms: f64) -> Self {
        OffloadScenario {
            plc,
            edge: CycleModel::MINI_PC,
            network: NetworkModel::default(),
            overhead: OverheadModel::default(),
            t_update_us: t_update_ms * 1000.0,
            requests: 1,
        }
    }

    fn fixed_us(&self) -> f64 {
        f64::from(self.requests) * (self.network.t_network_us() + self.overhead.t_overhead_us())
            + self.t_update_us
    }

    pub fn t_ro_us(&self, n: u64) -> f64 {
        self.edge.delta_t_cycle_us(n) + self.fixed_us()
    }

    pub fn t_ro_ms(&self, n: u64) -> f64 {
        self.t_ro_us(n) / 1000.0
    }

    fn offloading_pays(&self, n: u64) -> bool {
        self.t_ro_us(n) <= self.plc.delta_t_cycle_us(n)
    }

    /// Smallest n for which offloading is no slower than running on the PLC.
    pub fn break_even(&self) -> Result<u64, OffloadError> {
        let slope = self.plc.c_us - self.edge.c_us;
        if slope <= 0.0 {
            return Err(OffloadError::NoBenefit {
                plc_us: self.plc.c_us,
                edge_us: self.edge.c_us,
            });
        }
        let mut n = (self.fixed_us() / slope).ceil().max(0.0) as u64;
        // the closed form can land one off when the quotient is integral
        while n > 0 && self.offloading_pays(n - 1) {
            n -= 1;
        }
        while !self.offloading_pays(n) {
            n += 1;
        }
        Ok(n)
    }
}

/// Break-even inputs shared by every cell of the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub edge: CycleModel,
    pub plc_314: CycleModel,
    pub plc_1512: CycleModel,
    pub network: NetworkModel,
    pub overhead: OverheadModel,
    /// Update times replacing the profile constants.
    pub t_update_overrides: Vec<UpdateOverride>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            edge: CycleModel::MINI_PC,
            plc_314: CycleModel::S7_314,
            plc_1512: CycleModel::S7_1512,
            network: NetworkModel::default(),
            overhead: OverheadModel::default(),
            t_update_overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateOverride {
    pub interface: InterfaceId,
    pub device: Device,
    pub n: usize,
    pub ms: f64,
}

impl ScenarioConfig {
    pub fn plc(&self, device: Device) -> CycleModel {
        match device {
            Device::S7_314 => self.plc_314,
            Device::S7_1512 => self.plc_1512,
        }
    }

    fn t_update_ms(
        &self,
        profile: &PlcProfile,
        interface: InterfaceId,
        bucket: NBucket,
    ) -> Option<(f64, bool)> {
        let base = profile.min_update_time(interface, bucket)?;
        let over = self.t_update_overrides.iter().find(|o| {
            o.interface == interface
                && o.device == profile.device
                && NBucket::nearest(o.n) == bucket
        });
        Some(match over {
            Some(o) => (o.ms, false),
            None => (base.ms, base.estimated),
        })
    }

    pub fn scenario(
        &self,
        profile: &PlcProfile,
        interface: InterfaceId,
        bucket: NBucket,
    ) -> Option<OffloadScenario> {
        let (ms, _) = self.t_update_ms(profile, interface, bucket)?;
        Some(OffloadScenario {
            plc: self.plc(profile.device),
            edge: self.edge,
            network: self.network,
            overhead: self.overhead,
            t_update_us: ms * 1000.0,
            requests: profile.requests_per_update(interface, bucket.values()) as u32,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakEvenCell {
    pub interface: InterfaceId,
    pub device: Device,
    pub n: usize,
    pub t_update_ms: Option<f64>,
    /// None when the device does not offer the interface.
    pub n_br: Option<u64>,
    pub estimated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BreakEvenTable {
    pub cells: Vec<BreakEvenCell>,
}

impl BreakEvenTable {
    pub fn get(&self, interface: InterfaceId, device: Device, n: usize) -> Option<&BreakEvenCell> {
        self.cells
            .iter()
            .find(|c| c.interface == interface && c.device == device && c.n == n)
    }

    pub fn defined(&self) -> impl Iterator<Item = &BreakEvenCell> {
        self.cells.iter().filter(|c| c.n_br.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("interface,device,n,t_update_ms,n_br,estimated_flag\n");
        for c in &self.cells {
            let t = c.t_update_ms.map(|t| format!("{t:.2}")).unwrap_or_default();
            let n_br = c.n_br.map_or_else(|| "n/a".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.interface.as_str(),
                c.device.short(),
                c.n,
                t,
                n_br,
                c.estimated
            );
        }
        out
    }

    /// One row per interface and device, one column per n.
    pub fn to_markdown(&self) -> String {
        let mut out =
            String::from("| Interface | PLC | n=1 | n=10 | n=100 |\n|---|---|---|---|---|\n");
        let mut keys: Vec<(InterfaceId, Device)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(c.interface, c.device)) {
                keys.push((c.interface, c.device));
            }
        }
        let mut footnote = false;
        for (interface, device) in keys {
            let _ = write!(out, "| {} | {} |", interface.label(), device.short());
            for n in NBucket::ALL.map(NBucket::values) {
                let cell = match self.get(interface, device, n) {
                    Some(BreakEvenCell {
                        n_br: Some(v),
                        estimated,
                        ..
                    }) => {
                        footnote |= *estimated;
                        format!(" {v}{} |", if *estimated { "*" } else { "" })
                    }
                    _ => " n/a |".to_string(),
                };
                out.push_str(&cell);
            }
            out.push('\n');
        }
        if footnote {
            out.push_str("\n\\* update time estimated, not measured\n");
        }
        out
    }
}

/// Break-even points for every interface, device and bucket. Cells of
/// interfaces a device lacks are present with `n_br = None`.
pub fn build_breakeven_table(
    profiles: &[PlcProfile],
    interfaces: &[InterfaceId],
    config: &ScenarioConfig,
) -> BreakEvenTable {
    let mut cells = Vec::new();
    for &interface in interfaces {
        for profile in profiles {
            for bucket in NBucket::ALL {
                let t = config.t_update_ms(profile, interface, bucket);
                let n_br = config
                    .scenario(profile, interface, bucket)
                    .and_then(|s| s.break_even().ok());
                cells.push(BreakEvenCell {
                    interface,
                    device: profile.device,
                    n: bucket.values(),
                    t_update_ms: t.map(|(ms, _)| ms),
                    n_br,
                    estimated: t.is_some_and(|(_, e)| e),
                });
            }
        }
    }
    BreakEvenTable { cells }
}
