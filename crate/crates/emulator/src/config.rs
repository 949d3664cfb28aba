use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::Path;

use serde::{Deserialize, Serialize};

use plcbench_core::codec::ByteOrder;
use plcbench_core::{Device, InterfaceId, NBucket, PlcProfile};

use crate::EmulatorError;

/// Either a stock device name or a complete custom profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Stock(Device),
    Custom(PlcProfile),
}

impl ProfileSpec {
    pub fn resolve(&self) -> PlcProfile {
        match self {
            ProfileSpec::Stock(d) => PlcProfile::stock(*d),
            ProfileSpec::Custom(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenEndpoint {
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OucUdpEndpoint {
    /// Where the datagrams go; the configured communication partner.
    pub partner: SocketAddr,
    pub values: usize,
    #[serde(default)]
    pub byte_order: ByteOrder,
    /// Local source port, 0 for any.
    #[serde(default)]
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OucTcpEndpoint {
    pub port: u16,
    /// Connections from any other address are refused.
    pub partner_ip: IpAddr,
    pub values: usize,
    #[serde(default)]
    pub byte_order: ByteOrder,
}

/// The emulated PLC acting as OPC UA client, writing to a server on the
/// edge device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpcUaWriteEndpoint {
    pub target: SocketAddr,
    pub values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSetWriterConfig {
    pub writer_id: u16,
    /// Fields of the published data set.
    pub fields: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterGroupConfig {
    pub writer_group_id: u16,
    pub publish_interval_ms: f64,
    pub writers: Vec<DataSetWriterConfig>,
}

impl WriterGroupConfig {
    pub fn field_count(&self) -> usize {
        self.writers.iter().map(|w| w.fields).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PubSubConfig {
    pub publisher_id: u8,
    /// Multicast group or unicast subscriber address.
    pub destination: SocketAddr,
    pub writer_groups: Vec<WriterGroupConfig>,
}

impl PubSubConfig {
    /// One group with one writer publishing `fields` values at the
    /// profile's minimum interval.
    pub fn single(profile: &PlcProfile, destination: SocketAddr, fields: usize) -> Option<Self> {
        let t = profile.min_update_time(InterfaceId::Uadp, NBucket::nearest(fields))?;
        Some(PubSubConfig {
            publisher_id: 1,
            destination,
            writer_groups: vec![WriterGroupConfig {
                writer_group_id: 100,
                publish_interval_ms: t.ms,
                writers: vec![DataSetWriterConfig {
                    writer_id: 1,
                    fields,
                }],
            }],
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PubSubError {
    #[error("{device} has no PubSub support")]
    Unsupported { device: Device },
    #[error("writer {writer_id} publishes {fields} fields, at most {max} allowed")]
    TooManyFields {
        writer_id: u16,
        fields: usize,
        max: usize,
    },
    #[error("writer group {writer_group_id} has {writers} writers, at most {max} allowed")]
    TooManyWriters {
        writer_group_id: u16,
        writers: usize,
        max: usize,
    },
    #[error("writer group {writer_group_id} has no fields to publish")]
    Empty { writer_group_id: u16 },
    #[error(
        "writer group {writer_group_id} interval {interval_ms} ms is below the {min_ms} ms minimum"
    )]
    IntervalTooShort {
        writer_group_id: u16,
        interval_ms: f64,
        min_ms: f64,
    },
}

/// A PubSub configuration that passed validation. PubSub is not plug and
/// play: applying it takes an emulator restart.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedPubSub {
    pub config: PubSubConfig,
    pub requires_restart: bool,
}

pub fn configure_pubsub(
    cfg: &PubSubConfig,
    profile: &PlcProfile,
) -> Result<AcceptedPubSub, PubSubError> {
    if !profile.supports(InterfaceId::Uadp) {
        return Err(PubSubError::Unsupported {
            device: profile.device,
        });
    }
    let limits = profile.pubsub_limits;
    for group in &cfg.writer_groups {
        if group.writers.len() > limits.max_writers_per_group {
            return Err(PubSubError::TooManyWriters {
                writer_group_id: group.writer_group_id,
                writers: group.writers.len(),
                max: limits.max_writers_per_group,
            });
        }
        if let Some(w) = group
            .writers
            .iter()
            .find(|w| w.fields > limits.max_fields_per_dataset)
        {
            return Err(PubSubError::TooManyFields {
                writer_id: w.writer_id,
                fields: w.fields,
                max: limits.max_fields_per_dataset,
            });
        }
        let n = group.field_count();
        if n == 0 {
            return Err(PubSubError::Empty {
                writer_group_id: group.writer_group_id,
            });
        }
        let min = profile
            .min_update_time(InterfaceId::Uadp, NBucket::nearest(n))
            .expect("supported interface has update times");
        // small tolerance so that the profile value itself is accepted
        if group.publish_interval_ms < min.ms * (1.0 - 1e-9) {
            return Err(PubSubError::IntervalTooShort {
                writer_group_id: group.writer_group_id,
                interval_ms: group.publish_interval_ms,
                min_ms: min.ms,
            });
        }
    }
    Ok(AcceptedPubSub {
        config: cfg.clone(),
        requires_restart: true,
    })
}

fn default_bind() -> IpAddr {
    IpAddr::V4(Ipv4Addr::LOCALHOST)
}

fn default_blocks() -> BTreeMap<u16, usize> {
    BTreeMap::from([(1, 4096)])
}

fn default_jitter() -> f64 {
    0.02
}

fn default_guard() -> f64 {
    0.025
}

/// Full emulator setup, as read from its JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatorConfig {
    pub profile: ProfileSpec,
    #[serde(default = "default_bind")]
    pub bind: IpAddr,
    #[serde(default)]
    pub s7: Option<ListenEndpoint>,
    #[serde(default)]
    pub opcua_read: Option<ListenEndpoint>,
    #[serde(default)]
    pub opcua_write: Option<OpcUaWriteEndpoint>,
    #[serde(default)]
    pub ouc_udp: Option<OucUdpEndpoint>,
    #[serde(default)]
    pub ouc_tcp: Option<OucTcpEndpoint>,
    #[serde(default)]
    pub pubsub: Option<PubSubConfig>,
    /// Data block sizes in bytes; values are served from block 1.
    #[serde(default = "default_blocks")]
    pub data_blocks: BTreeMap<u16, usize>,
    /// Upper bound of the random extra spacing, as a fraction of the
    /// interval.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Fixed extra spacing absorbing scheduling noise on the receiving
    /// side, as a fraction of the interval.
    #[serde(default = "default_guard")]
    pub guard: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EmulatorConfig {
    pub fn new(profile: ProfileSpec) -> Self {
        EmulatorConfig {
            profile,
            bind: default_bind(),
            s7: None,
            opcua_read: None,
            opcua_write: None,
            ouc_udp: None,
            ouc_tcp: None,
            pubsub: None,
            data_blocks: default_blocks(),
            jitter: default_jitter(),
            guard: default_guard(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, EmulatorError> {
        serde_json::from_str(text).map_err(|e| EmulatorError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EmulatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmulatorError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn requested_interfaces(&self) -> Vec<InterfaceId> {
        let mut v = Vec::new();
        if self.ouc_udp.is_some() {
            v.push(InterfaceId::OucUdp);
        }
        if self.ouc_tcp.is_some() {
            v.push(InterfaceId::OucTcp);
        }
        if self.s7.is_some() {
            v.push(InterfaceId::S7);
        }
        if self.opcua_write.is_some() {
            v.push(InterfaceId::OpcUaWrite);
        }
        if self.opcua_read.is_some() {
            v.push(InterfaceId::OpcUaRead);
        }
        if self.pubsub.is_some() {
            v.push(InterfaceId::Uadp);
        }
        v
    }

    /// Checks everything that can be checked without opening sockets.
    pub fn validate(&self, profile: &PlcProfile) -> Result<(), EmulatorError> {
        for interface in self.requested_interfaces() {
            if !profile.supports(interface) {
                return Err(EmulatorError::UnsupportedInterface {
                    interface,
                    device: profile.device,
                });
            }
        }
        let mut ports: Vec<u16> = [
            self.s7.as_ref().map(|e| e.port),
            self.opcua_read.as_ref().map(|e| e.port),
            self.ouc_tcp.as_ref().map(|e| e.port),
            self.ouc_udp.as_ref().map(|e| e.port),
        ]
        .into_iter()
        .flatten()
        .filter(|&p| p != 0)
        .collect();
        ports.sort_unstable();
        if let Some(w) = ports.windows(2).find(|w| w[0] == w[1]) {
            return Err(EmulatorError::DuplicatePort(w[0]));
        }
        let db1 = self.data_blocks.get(&1).copied().unwrap_or(0);
        let mut needed = [
            self.ouc_udp.as_ref().map(|e| e.values),
            self.ouc_tcp.as_ref().map(|e| e.values),
            self.opcua_write.as_ref().map(|e| e.values),
        ]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
        if let Some(ps) = &self.pubsub {
            configure_pubsub(ps, profile)?;
            needed.extend(ps.writer_groups.iter().map(WriterGroupConfig::field_count));
        }
        if let Some(&n) = needed.iter().find(|&&n| n == 0 || 4 * n > db1) {
            return Err(EmulatorError::Config(format!(
                "{n} values requested but data block 1 holds {} values",
                db1 / 4
            )));
        }
        if !(0.0..1.0).contains(&self.jitter) || !(0.0..1.0).contains(&self.guard) {
            return Err(EmulatorError::Config(
                "jitter and guard must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dest() -> SocketAddr {
        "127.0.0.1:4840".parse().unwrap()
    }

    fn group(writers: &[usize], interval: f64) -> PubSubConfig {
        PubSubConfig {
            publisher_id: 1,
            destination: dest(),
            writer_groups: vec![WriterGroupConfig {
                writer_group_id: 1,
                publish_interval_ms: interval,
                writers: writers
                    .iter()
                    .enumerate()
                    .map(|(i, &fields)| DataSetWriterConfig {
                        writer_id: i as u16 + 1,
                        fields,
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn pubsub_limits() {
        let p = PlcProfile::s7_1512();
        let ok = configure_pubsub(&group(&[10], 1.26), &p).unwrap();
        assert!(ok.requires_restart);
        assert!(matches!(
            configure_pubsub(&group(&[11], 5.0), &p),
            Err(PubSubError::TooManyFields { fields: 11, .. })
        ));
        assert!(matches!(
            configure_pubsub(&group(&[1, 1, 1], 5.0), &p),
            Err(PubSubError::TooManyWriters { writers: 3, .. })
        ));
        assert!(matches!(
            configure_pubsub(&group(&[1], 1.0), &p),
            Err(PubSubError::IntervalTooShort { .. })
        ));
        assert!(configure_pubsub(&group(&[1], 1.02), &p).is_ok());
        assert!(matches!(
            configure_pubsub(&group(&[1], 1.02), &PlcProfile::s7_314()),
            Err(PubSubError::Unsupported { .. })
        ));
    }

    #[test]
    fn config_json() {
        let cfg = EmulatorConfig::from_json(
            r#"{"profile": "s7-314", "s7": {"port": 1102}, "ouc_tcp": {"port": 2001, "partner_ip": "127.0.0.2", "values": 10}}"#,
        )
        .unwrap();
        assert_eq!(cfg.profile, ProfileSpec::Stock(Device::S7_314));
        assert_eq!(
            cfg.requested_interfaces(),
            [InterfaceId::OucTcp, InterfaceId::S7]
        );
        cfg.validate(&cfg.profile.resolve()).unwrap();
        assert!(EmulatorConfig::from_json("{}").is_err());
    }

    #[test]
    fn validation() {
        let p = PlcProfile::s7_314();
        let mut cfg = EmulatorConfig::new(ProfileSpec::Stock(Device::S7_314));
        cfg.opcua_read = Some(ListenEndpoint { port: 4840 });
        assert!(matches!(
            cfg.validate(&p),
            Err(EmulatorError::UnsupportedInterface {
                interface: InterfaceId::OpcUaRead,
                ..
            })
        ));
        cfg.opcua_read = None;
        cfg.s7 = Some(ListenEndpoint { port: 5000 });
        cfg.ouc_tcp = Some(OucTcpEndpoint {
            port: 5000,
            partner_ip: default_bind(),
            values: 1,
            byte_order: ByteOrder::BigEndian,
        });
        assert!(matches!(
            cfg.validate(&p),
            Err(EmulatorError::DuplicatePort(5000))
        ));
        cfg.ouc_tcp.as_mut().unwrap().port = 0;
        cfg.ouc_tcp.as_mut().unwrap().values = 5000;
        assert!(matches!(cfg.validate(&p), Err(EmulatorError::Config(_))));
    }
}
