use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the open Ethernet interfaces of the assessed PLCs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterfaceId {
    /// Open User Communication over UDP.
    OucUdp,
    /// Open User Communication over TCP.
    OucTcp,
    /// S7 protocol over ISO-on-TCP (RFC 1006), as spoken by LIBNODAVE.
    S7,
    /// OPC UA server-client, Write service (PLC is the client).
    #[serde(rename = "opcua-write")]
    OpcUaWrite,
    /// OPC UA server-client, Read service (PLC is the server).
    #[serde(rename = "opcua-read")]
    OpcUaRead,
    /// OPC UA PubSub with the UDP-based UADP mapping.
    Uadp,
}

impl InterfaceId {
    pub const ALL: [InterfaceId; 6] = [
        InterfaceId::OucUdp,
        InterfaceId::OucTcp,
        InterfaceId::S7,
        InterfaceId::OpcUaWrite,
        InterfaceId::OpcUaRead,
        InterfaceId::Uadp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceId::OucUdp => "ouc-udp",
            InterfaceId::OucTcp => "ouc-tcp",
            InterfaceId::S7 => "s7",
            InterfaceId::OpcUaWrite => "opcua-write",
            InterfaceId::OpcUaRead => "opcua-read",
            InterfaceId::Uadp => "uadp",
        }
    }

    /// Human readable name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            InterfaceId::OucUdp => "OUC UDP",
            InterfaceId::OucTcp => "OUC TCP",
            InterfaceId::S7 => "LIBNODAVE (ISO on TCP)",
            InterfaceId::OpcUaWrite => "OPC UA Write Service",
            InterfaceId::OpcUaRead => "OPC UA Read Service",
            InterfaceId::Uadp => "OPC UA PubSub (UADP)",
        }
    }

    /// Push interfaces deliver data without being polled by the edge node.
    pub fn is_push(self) -> bool {
        matches!(
            self,
            InterfaceId::OucUdp | InterfaceId::OucTcp | InterfaceId::Uadp | InterfaceId::OpcUaWrite
        )
    }

    /// Whether the interface can be used without reconfiguring (and thus
    /// stopping) the PLC.
    pub fn plug_and_play(self) -> bool {
        matches!(self, InterfaceId::S7 | InterfaceId::OpcUaRead)
    }

    /// Metadata availability: `Some(true)` full, `Some(false)` none,
    /// `None` partial (data type tags only).
    pub fn metadata(self) -> Option<bool> {
        match self {
            InterfaceId::OucUdp | InterfaceId::OucTcp | InterfaceId::S7 => Some(false),
            InterfaceId::OpcUaWrite | InterfaceId::OpcUaRead => Some(true),
            InterfaceId::Uadp => None,
        }
    }
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct ParseIdError {
    kind: &'static str,
    value: String,
}

impl FromStr for InterfaceId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let id = match norm.as_str() {
            "ouc-udp" | "udp" => InterfaceId::OucUdp,
            "ouc-tcp" | "tcp" => InterfaceId::OucTcp,
            "s7" | "libnodave" | "iso-on-tcp" => InterfaceId::S7,
            "opcua-write" | "opc-ua-write" => InterfaceId::OpcUaWrite,
            "opcua-read" | "opc-ua-read" => InterfaceId::OpcUaRead,
            "uadp" | "pubsub" | "opcua-pubsub" => InterfaceId::Uadp,
            _ => {
                return Err(ParseIdError {
                    kind: "interface",
                    value: s.to_string(),
                })
            }
        };
        Ok(id)
    }
}

/// The two assessed PLC models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Device {
    #[serde(rename = "s7-314")]
    S7_314,
    #[serde(rename = "s7-1512")]
    S7_1512,
}

impl Device {
    pub const ALL: [Device; 2] = [Device::S7_314, Device::S7_1512];

    pub fn as_str(self) -> &'static str {
        match self {
            Device::S7_314 => "s7-314",
            Device::S7_1512 => "s7-1512",
        }
    }

    /// Short column label (`314`, `1512`).
    pub fn short(self) -> &'static str {
        match self {
            Device::S7_314 => "314",
            Device::S7_1512 => "1512",
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Device {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "s7-314" | "314" => Ok(Device::S7_314),
            "s7-1512" | "1512" => Ok(Device::S7_1512),
            _ => Err(ParseIdError {
                kind: "device",
                value: s.to_string(),
            }),
        }
    }
}

/// Direction of a message relative to the PLC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    PlcToEdge,
    EdgeToPlc,
}

/// The three measured payload sizes: 1, 10 and 100 data values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NBucket {
    One,
    Ten,
    Hundred,
}

impl NBucket {
    pub const ALL: [NBucket; 3] = [NBucket::One, NBucket::Ten, NBucket::Hundred];

    pub fn values(self) -> usize {
        match self {
            NBucket::One => 1,
            NBucket::Ten => 10,
            NBucket::Hundred => 100,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Nearest bucket in log scale. The boundaries are at sqrt(10) and
    /// sqrt(1000), so 1..=3 map to one value, 4..=31 to ten.
    pub fn nearest(n: usize) -> NBucket {
        // n*n < 10  <=>  log10(n) < 0.5
        let sq = (n as u128) * (n as u128);
        if sq < 10 {
            NBucket::One
        } else if sq < 1000 {
            NBucket::Ten
        } else {
            NBucket::Hundred
        }
    }

    pub fn exact(n: usize) -> Option<NBucket> {
        NBucket::ALL.into_iter().find(|b| b.values() == n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_boundaries() {
        assert_eq!(NBucket::nearest(1), NBucket::One);
        assert_eq!(NBucket::nearest(3), NBucket::One);
        assert_eq!(NBucket::nearest(4), NBucket::Ten);
        assert_eq!(NBucket::nearest(31), NBucket::Ten);
        assert_eq!(NBucket::nearest(32), NBucket::Hundred);
        assert_eq!(NBucket::nearest(100), NBucket::Hundred);
        assert_eq!(NBucket::nearest(5000), NBucket::Hundred);
    }

    #[test]
    fn names_parse_back() {
        for id in InterfaceId::ALL {
            assert_eq!(id.as_str().parse::<InterfaceId>().unwrap(), id);
        }
        for d in Device::ALL {
            assert_eq!(d.as_str().parse::<Device>().unwrap(), d);
            assert_eq!(d.short().parse::<Device>().unwrap(), d);
        }
        assert!("profinet".parse::<InterfaceId>().is_err());
    }

    #[test]
    fn plug_and_play_matrix() {
        let pnp: Vec<_> = InterfaceId::ALL
            .into_iter()
            .filter(|i| i.plug_and_play())
            .collect();
        assert_eq!(pnp, vec![InterfaceId::S7, InterfaceId::OpcUaRead]);
    }
}
