//! Device profiles: the measured minimum update times per interface and
//! payload size, the S7 PDU limit and the PubSub configuration limits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::s7::{ACK_ITEM_OVERHEAD, MIN_PDU};
use crate::interface::{Device, InterfaceId, NBucket};

/// One update-time cell in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateTime {
    pub ms: f64,
    /// Extrapolated rather than measured (the firmware could not send that
    /// many values at once).
    #[serde(default)]
    pub estimated: bool,
}

impl UpdateTime {
    const fn measured(ms: f64) -> Self {
        UpdateTime {
            ms,
            estimated: false,
        }
    }

    const fn estimated(ms: f64) -> Self {
        UpdateTime {
            ms,
            estimated: true,
        }
    }

    pub fn micros(self) -> f64 {
        self.ms * 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PubSubLimits {
    pub max_fields_per_dataset: usize,
    pub max_writers_per_group: usize,
}

impl Default for PubSubLimits {
    fn default() -> Self {
        PubSubLimits {
            max_fields_per_dataset: 10,
            max_writers_per_group: 2,
        }
    }
}

impl PubSubLimits {
    pub fn max_values_per_group(&self) -> usize {
        self.max_fields_per_dataset * self.max_writers_per_group
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcProfile {
    pub device: Device,
    /// Negotiated S7 PDU size in bytes.
    pub pdu_limit: u16,
    /// Minimum update time per interface for 1, 10 and 100 values.
    /// Interfaces without an entry are not supported by the device.
    pub update_times: BTreeMap<InterfaceId, [UpdateTime; 3]>,
    #[serde(default)]
    pub pubsub_limits: PubSubLimits,
}

impl PlcProfile {
    pub fn stock(device: Device) -> Self {
        match device {
            Device::S7_314 => Self::s7_314(),
            Device::S7_1512 => Self::s7_1512(),
        }
    }

    /// S7-314C-2 PN/DP. No OPC UA support at all.
    pub fn s7_314() -> Self {
        use UpdateTime as U;
        let mut t = BTreeMap::new();
        t.insert(
            InterfaceId::OucUdp,
            [U::measured(1.00), U::measured(1.00), U::measured(1.00)],
        );
        t.insert(
            InterfaceId::OucTcp,
            [U::measured(1.01), U::measured(1.04), U::measured(1.02)],
        );
        t.insert(
            InterfaceId::S7,
            [U::measured(2.00), U::measured(2.00), U::measured(4.00)],
        );
        PlcProfile {
            device: Device::S7_314,
            pdu_limit: 240,
            update_times: t,
            pubsub_limits: PubSubLimits::default(),
        }
    }

    /// S7-1512SP F-1 PN, firmware 2.8.
    pub fn s7_1512() -> Self {
        use UpdateTime as U;
        let mut t = BTreeMap::new();
        t.insert(
            InterfaceId::OucUdp,
            [U::measured(3.61), U::measured(3.60), U::measured(3.63)],
        );
        t.insert(
            InterfaceId::OucTcp,
            [U::measured(3.77), U::measured(3.78), U::measured(3.83)],
        );
        t.insert(
            InterfaceId::S7,
            [U::measured(1.32), U::measured(1.32), U::measured(1.40)],
        );
        t.insert(
            InterfaceId::OpcUaWrite,
            [U::measured(6.83), U::measured(7.36), U::measured(16.56)],
        );
        t.insert(
            InterfaceId::OpcUaRead,
            [U::measured(9.11), U::measured(30.35), U::measured(246.1)],
        );
        t.insert(
            InterfaceId::Uadp,
            [U::measured(1.02), U::measured(1.26), U::estimated(2.30)],
        );
        PlcProfile {
            device: Device::S7_1512,
            pdu_limit: 960,
            update_times: t,
            pubsub_limits: PubSubLimits::default(),
        }
    }

    pub fn supports(&self, interface: InterfaceId) -> bool {
        self.update_times.contains_key(&interface)
    }

    pub fn supported_interfaces(&self) -> impl Iterator<Item = InterfaceId> + '_ {
        self.update_times.keys().copied()
    }

    pub fn min_update_time(&self, interface: InterfaceId, bucket: NBucket) -> Option<UpdateTime> {
        self.update_times
            .get(&interface)
            .map(|cells| cells[bucket.index()])
    }

    /// Data values that fit into one S7 read response under the PDU limit.
    pub fn s7_values_per_request(&self) -> usize {
        let pdu = self.pdu_limit.max(MIN_PDU) as usize;
        (pdu - ACK_ITEM_OVERHEAD) / 4
    }

    /// Number of S7 read requests needed to fetch `n` values.
    pub fn s7_requests(&self, n: usize) -> usize {
        n.max(1).div_ceil(self.s7_values_per_request())
    }

    /// Requests per update for any interface; only S7 reads are ever split.
    pub fn requests_per_update(&self, interface: InterfaceId, n: usize) -> usize {
        match interface {
            InterfaceId::S7 => self.s7_requests(n),
            _ => 1,
        }
    }

    /// Minimum spacing in milliseconds between two consecutive messages of
    /// one interface carrying `n` values. For a split S7 read the update
    /// time covers all responses, so each response gets an equal share.
    pub fn message_interval_ms(&self, interface: InterfaceId, n: usize) -> Option<f64> {
        let bucket = NBucket::nearest(n);
        let t = self.min_update_time(interface, bucket)?;
        let per_update = self.requests_per_update(interface, bucket.values());
        Some(t.ms / per_update as f64)
    }
}
