use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use plcbench_core::{Device, InterfaceId};

use crate::HarnessError;

pub const DEFAULT_WARMUP: usize = 50;
pub const DEFAULT_COUNT: usize = 1000;

/// Arrival times of the messages of one run, in microseconds since the
/// run started, warmup included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRun {
    pub interface: InterfaceId,
    pub device: Option<Device>,
    pub n: usize,
    pub timestamps_us: Vec<f64>,
    pub warmup_count: usize,
    pub duration_us: f64,
}

impl MeasurementRun {
    /// A run from recorded timestamps, e.g. one read back from a dump.
    pub fn from_timestamps(
        interface: InterfaceId,
        device: Option<Device>,
        n: usize,
        timestamps_us: Vec<f64>,
        warmup_count: usize,
    ) -> Result<Self, HarnessError> {
        if let Some(i) = timestamps_us
            .windows(2)
            .position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(HarnessError::InvalidRun(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        let duration_us = match (timestamps_us.first(), timestamps_us.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        };
        Ok(MeasurementRun {
            interface,
            device,
            n,
            timestamps_us,
            warmup_count,
            duration_us,
        })
    }

    /// Gaps between consecutive messages after the warmup, in µs.
    pub fn gaps_us(&self) -> Vec<f64> {
        self.timestamps_us
            .get(self.warmup_count..)
            .unwrap_or_default()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["timestamp_us"])?;
        for t in &self.timestamps_us {
            out.write_record([format!("{t:.3}")])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv_timestamps<R: Read>(r: R) -> Result<Vec<f64>, HarnessError> {
        let mut rdr = csv::Reader::from_reader(r);
        rdr.records()
            .map(|rec| {
                let rec = rec?;
                rec.get(0)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| HarnessError::InvalidRun(format!("bad timestamp row {rec:?}")))
            })
            .collect()
    }
}

/// Update-time statistics in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateTimeStats {
    pub min_ms: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    /// Number of gaps the statistics cover.
    pub sample_count: usize,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(run: &MeasurementRun) -> Result<UpdateTimeStats, HarnessError> {
    let mut gaps = run.gaps_us();
    if gaps.is_empty() {
        return Err(HarnessError::InsufficientSamples {
            have: run.timestamps_us.len().saturating_sub(run.warmup_count),
            need: 2,
        });
    }
    gaps.sort_by(f64::total_cmp);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(UpdateTimeStats {
        min_ms: gaps[0] / 1000.0,
        mean_ms: mean / 1000.0,
        p50_ms: percentile(&gaps, 0.5) / 1000.0,
        p99_ms: percentile(&gaps, 0.99) / 1000.0,
        sample_count: gaps.len(),
    })
}

/// Stats file written after a run; also the input for recomputing
/// break-even points from measured update times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub interface: InterfaceId,
    pub device: Option<Device>,
    pub n: usize,
    pub warmup: usize,
    pub stats: UpdateTimeStats,
}

impl StatsReport {
    pub fn new(run: &MeasurementRun) -> Result<Self, HarnessError> {
        Ok(StatsReport {
            interface: run.interface,
            device: run.device,
            n: run.n,
            warmup: run.warmup_count,
            stats: summarize(run)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidRun(e.to_string()))
    }
}
