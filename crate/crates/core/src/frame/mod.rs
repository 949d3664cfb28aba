//! Byte accounting for every message of the assessed interfaces.
//!
//! All sizes are counted as they appear on the edge node's network
//! interface: every Ethernet frame costs its 14 byte header, 4 byte FCS and
//! 8 byte preamble/SFD on top of the IP packet, and IP packets shorter than
//! 46 bytes are padded. TCP messages include the acknowledge segments they
//! provoke.
//!
//! Segmentation depends on who sends. Messages sent by the PLC arrive
//! split into MSS-sized segments and the edge node acknowledges every one
//! of them. Messages sent by the edge node are seen before segmentation
//! offload, as a single frame, and the PLC acknowledges every second
//! segment it receives.

mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::interface::{Device, Direction, InterfaceId};
use crate::profile::PlcProfile;

pub use report::{efficiency_csv, efficiency_markdown, message_sizes_csv, message_sizes_markdown};

/// Width of one data value.
pub const VALUE_BYTES: usize = 4;
pub const ETHERNET_MTU: usize = 1500;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("unknown message name `{0}`")]
    UnknownMessageName(String),
    #[error("{interface} is not available on the {device}")]
    UnsupportedInterface {
        interface: InterfaceId,
        device: Device,
    },
    #[error("at least one data value is required")]
    NoValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderStack {
    /// Ethernet II header, FCS, preamble and SFD.
    pub ethernet_overhead: usize,
    pub ip_header: usize,
    pub l4_header: usize,
    /// Shortest IP packet that fills a minimum-size Ethernet frame.
    pub min_l3_payload: usize,
}

impl HeaderStack {
    pub const UDP: HeaderStack = HeaderStack {
        ethernet_overhead: 26,
        ip_header: 20,
        l4_header: 8,
        min_l3_payload: 46,
    };

    pub const TCP: HeaderStack = HeaderStack {
        ethernet_overhead: 26,
        ip_header: 20,
        l4_header: 20,
        min_l3_payload: 46,
    };

    pub fn for_transport(transport: Transport) -> HeaderStack {
        match transport {
            Transport::Udp => HeaderStack::UDP,
            Transport::Tcp => HeaderStack::TCP,
        }
    }

    /// IP + transport header bytes.
    pub fn l3_overhead(&self) -> usize {
        self.ip_header + self.l4_header
    }

    /// Largest transport payload per IP packet.
    pub fn max_segment(&self) -> usize {
        ETHERNET_MTU - self.l3_overhead()
    }
}

/// Bytes on the wire for one IP packet of `l3_bytes`.
pub fn ethernet_frame_size(l3_bytes: usize, stack: &HeaderStack) -> usize {
    l3_bytes.max(stack.min_l3_payload) + stack.ethernet_overhead
}

/// Size of a bare TCP acknowledge frame (72 bytes).
pub fn tcp_ack_size() -> usize {
    ethernet_frame_size(HeaderStack::TCP.l3_overhead(), &HeaderStack::TCP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transport {
    Udp,
    Tcp,
}

/// Bytes on the wire for an application message of `app_len` bytes,
/// including frame overhead, padding, segmentation and acknowledges.
pub fn wire_bytes(app_len: usize, transport: Transport, direction: Direction) -> usize {
    let stack = HeaderStack::for_transport(transport);
    match transport {
        // IP fragmentation is not modelled.
        Transport::Udp => ethernet_frame_size(app_len + stack.l3_overhead(), &stack),
        Transport::Tcp => {
            let mss = stack.max_segment();
            let segments = app_len.div_ceil(mss).max(1);
            match direction {
                Direction::PlcToEdge => {
                    let full = app_len / mss;
                    let rest = app_len - full * mss;
                    let mut bytes = full * ethernet_frame_size(mss + stack.l3_overhead(), &stack);
                    if rest > 0 || full == 0 {
                        bytes += ethernet_frame_size(rest + stack.l3_overhead(), &stack);
                    }
                    bytes + segments * tcp_ack_size()
                }
                Direction::EdgeToPlc => {
                    ethernet_frame_size(app_len + stack.l3_overhead(), &stack)
                        + segments.div_ceil(2) * tcp_ack_size()
                }
            }
        }
    }
}

/// Names of the data messages, as they appear in the message-size table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageName {
    #[serde(rename = "UDP_Data")]
    UdpData,
    #[serde(rename = "TCP_Data")]
    TcpData,
    Job,
    #[serde(rename = "Ack_Data")]
    AckData,
    WriteRequest,
    WriteResponse,
    ReadRequest,
    ReadResponse,
    DataSetMessage,
}

impl MessageName {
    pub const ALL: [MessageName; 9] = [
        MessageName::UdpData,
        MessageName::TcpData,
        MessageName::Job,
        MessageName::AckData,
        MessageName::WriteRequest,
        MessageName::WriteResponse,
        MessageName::ReadRequest,
        MessageName::ReadResponse,
        MessageName::DataSetMessage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageName::UdpData => "UDP_Data",
            MessageName::TcpData => "TCP_Data",
            MessageName::Job => "Job",
            MessageName::AckData => "Ack_Data",
            MessageName::WriteRequest => "WriteRequest",
            MessageName::WriteResponse => "WriteResponse",
            MessageName::ReadRequest => "ReadRequest",
            MessageName::ReadResponse => "ReadResponse",
            MessageName::DataSetMessage => "DataSetMessage",
        }
    }

    pub fn layout(self) -> &'static MessageLayout {
        LAYOUTS
            .iter()
            .find(|l| l.name == self)
            .expect("every message name has a layout")
    }
}

impl fmt::Display for MessageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageName {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageName::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FrameError::UnknownMessageName(s.to_string()))
    }
}

/// Application-level size model of one message type.
///
/// The application payload for `n` values is
/// `fixed_overhead + (per_value_overhead + payload_per_value) * n`, plus the
/// decimal digits of the 0-based value index when the message addresses
/// values by indexed string identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageLayout {
    pub interface: InterfaceId,
    pub name: MessageName,
    pub transport: Transport,
    pub direction: Direction,
    pub fixed_overhead: usize,
    pub per_value_overhead: usize,
    /// Data bytes carried per value (0 for messages that only address values).
    pub payload_per_value: usize,
    pub index_digits: bool,
    /// Published sizes for 1, 10 and 100 values.
    pub size_table: [(usize, usize); 3],
}

impl MessageLayout {
    pub fn app_len(&self, n: usize) -> usize {
        let mut len = self.fixed_overhead + (self.per_value_overhead + self.payload_per_value) * n;
        if self.index_digits {
            len += index_digit_sum(n);
        }
        len
    }
}

/// Sum of the decimal digit counts of 0, 1, ..., n-1.
pub fn index_digit_sum(n: usize) -> usize {
    let mut total = 0;
    let mut lo = 0usize;
    let mut hi = 10usize;
    let mut digits = 1;
    while lo < n {
        total += (hi.min(n) - lo) * digits;
        lo = hi;
        hi = hi.saturating_mul(10);
        digits += 1;
    }
    total
}

#[allow(clippy::too_many_arguments)]
const fn layout(
    interface: InterfaceId,
    name: MessageName,
    transport: Transport,
    direction: Direction,
    fixed_overhead: usize,
    per_value_overhead: usize,
    payload_per_value: usize,
    index_digits: bool,
    sizes: [usize; 3],
) -> MessageLayout {
    MessageLayout {
        interface,
        name,
        transport,
        direction,
        fixed_overhead,
        per_value_overhead,
        payload_per_value,
        index_digits,
        size_table: [(1, sizes[0]), (10, sizes[1]), (100, sizes[2])],
    }
}

use Direction::{EdgeToPlc, PlcToEdge};
use InterfaceId as I;
use MessageName as M;
use Transport::{Tcp, Udp};

static LAYOUTS: [MessageLayout; 9] = [
    layout(
        I::OucUdp,
        M::UdpData,
        Udp,
        PlcToEdge,
        0,
        0,
        4,
        false,
        [72, 94, 454],
    ),
    layout(
        I::OucTcp,
        M::TcpData,
        Tcp,
        PlcToEdge,
        0,
        0,
        4,
        false,
        [144, 178, 538],
    ),
    // TPKT 4 + COTP 3 + S7 header 10 + read-var parameter with one item 14
    layout(
        I::S7,
        M::Job,
        Tcp,
        EdgeToPlc,
        31,
        0,
        0,
        false,
        [169, 169, 169],
    ),
    // TPKT 4 + COTP 3 + S7 header 12 + parameter 2 + item header 4
    layout(
        I::S7,
        M::AckData,
        Tcp,
        PlcToEdge,
        25,
        0,
        4,
        false,
        [167, 203, 563],
    ),
    // chunk headers 24 + type id 4 + request header with GUID token 46 +
    // array length 4; each WriteValue: 4 byte node id, attribute,
    // index range, value mask, variant type
    layout(
        I::OpcUaWrite,
        M::WriteRequest,
        Tcp,
        PlcToEdge,
        78,
        14,
        4,
        false,
        [234, 396, 2154],
    ),
    // chunk headers 24 + type id 4 + response header 24 + two array lengths
    layout(
        I::OpcUaWrite,
        M::WriteResponse,
        Tcp,
        EdgeToPlc,
        60,
        4,
        0,
        false,
        [202, 238, 598],
    ),
    // chunk headers 24 + type id 4 + request header with numeric token 34 +
    // max age 8 + timestamps 4 + array length 4; each ReadValueId carries
    // a 39 byte string node id plus the index digits
    layout(
        I::OpcUaRead,
        M::ReadRequest,
        Tcp,
        EdgeToPlc,
        78,
        53,
        0,
        true,
        [270, 756, 5778],
    ),
    // each DataValue: mask, variant type, value, source timestamp
    layout(
        I::OpcUaRead,
        M::ReadResponse,
        Tcp,
        PlcToEdge,
        60,
        10,
        4,
        false,
        [212, 338, 1598],
    ),
    // network message header 8 + payload header 3 + data set header 3;
    // one type byte per field
    layout(
        I::Uadp,
        M::DataSetMessage,
        Udp,
        PlcToEdge,
        14,
        1,
        4,
        false,
        [73, 118, 568],
    ),
];

pub fn layouts() -> &'static [MessageLayout] {
    &LAYOUTS
}

/// Wire size of a message carrying (or addressing) `n` values.
pub fn message_size(layout: &MessageLayout, n: usize) -> usize {
    wire_bytes(layout.app_len(n), layout.transport, layout.direction)
}

pub fn message_size_by_name(name: &str, n: usize) -> Result<usize, FrameError> {
    let name: MessageName = name.parse()?;
    Ok(message_size(name.layout(), n))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExchangePattern {
    pub messages_per_exchange: Vec<(MessageName, Direction)>,
    pub includes_tcp_ack: bool,
    pub ack_size: usize,
}

impl ExchangePattern {
    pub fn for_interface(interface: InterfaceId) -> ExchangePattern {
        let messages: Vec<MessageName> = match interface {
            I::OucUdp => vec![M::UdpData],
            I::OucTcp => vec![M::TcpData],
            I::S7 => vec![M::Job, M::AckData],
            I::OpcUaWrite => vec![M::WriteRequest, M::WriteResponse],
            I::OpcUaRead => vec![M::ReadRequest, M::ReadResponse],
            I::Uadp => vec![M::DataSetMessage],
        };
        let includes_tcp_ack = messages.iter().any(|m| m.layout().transport == Tcp);
        ExchangePattern {
            messages_per_exchange: messages
                .into_iter()
                .map(|m| (m, m.layout().direction))
                .collect(),
            includes_tcp_ack,
            ack_size: if includes_tcp_ack { tcp_ack_size() } else { 0 },
        }
    }

    fn bytes(&self, n: usize) -> usize {
        self.messages_per_exchange
            .iter()
            .map(|(m, _)| message_size(m.layout(), n))
            .sum()
    }
}

/// Byte accounting of one complete update of `n` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExchangeBytes {
    pub payload: usize,
    /// Bytes actually exchanged, with split requests sized by what they
    /// carry.
    pub wire_total: usize,
    /// Bytes charged when computing efficiency: every request of a split
    /// update costs as much as an unsplit exchange, which halves the
    /// efficiency of a two-request S7 read.
    pub accounted_total: usize,
    pub requests: usize,
}

pub fn exchange_bytes(
    interface: InterfaceId,
    n: usize,
    profile: &PlcProfile,
) -> Result<ExchangeBytes, FrameError> {
    if n == 0 {
        return Err(FrameError::NoValues);
    }
    if !profile.supports(interface) {
        return Err(FrameError::UnsupportedInterface {
            interface,
            device: profile.device,
        });
    }
    let pattern = ExchangePattern::for_interface(interface);
    let unsplit = pattern.bytes(n);
    let (wire_total, requests) = if interface == I::S7 {
        let chunks = crate::codec::s7::balanced_split(n, profile.s7_values_per_request());
        let wire = chunks.iter().map(|&c| pattern.bytes(c)).sum();
        (wire, chunks.len())
    } else {
        (unsplit, 1)
    };
    Ok(ExchangeBytes {
        payload: VALUE_BYTES * n,
        wire_total,
        accounted_total: unsplit * requests,
        requests,
    })
}

pub fn exchange_total_bytes(
    interface: InterfaceId,
    n: usize,
    profile: &PlcProfile,
) -> Result<usize, FrameError> {
    exchange_bytes(interface, n, profile).map(|b| b.wire_total)
}

pub fn protocol_efficiency(
    interface: InterfaceId,
    n: usize,
    profile: &PlcProfile,
) -> Result<f64, FrameError> {
    let b = exchange_bytes(interface, n, profile)?;
    Ok(b.payload as f64 / b.accounted_total as f64)
}

/// A percentage in tenths of a percent.
///
/// The ratio is first rounded half-up to hundredths of a percent and the
/// result again half-up to tenths. All arithmetic is on integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PercentTenths(pub u64);

impl PercentTenths {
    pub fn from_ratio(num: usize, den: usize) -> PercentTenths {
        assert!(den > 0, "ratio with zero denominator");
        let (num, den) = (num as u64, den as u64);
        let hundredths = (2 * num * 10_000 + den) / (2 * den);
        PercentTenths((hundredths + 5) / 10)
    }
}

impl fmt::Display for PercentTenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub interface: InterfaceId,
    pub device: Device,
    pub n: usize,
    pub efficiency: f64,
    pub efficiency_pct: PercentTenths,
    pub payload_bytes: usize,
    pub total_bytes: usize,
    pub wire_bytes: usize,
    pub requests: usize,
    /// More values than one PubSub writer group can carry on current
    /// firmware; the cell is an extrapolation.
    pub estimated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub rows: Vec<EfficiencyRow>,
}

impl EfficiencyReport {
    pub fn get(&self, interface: InterfaceId, device: Device, n: usize) -> Option<&EfficiencyRow> {
        self.rows
            .iter()
            .find(|r| r.interface == interface && r.device == device && r.n == n)
    }
}

pub fn efficiency_row(
    interface: InterfaceId,
    n: usize,
    profile: &PlcProfile,
) -> Result<EfficiencyRow, FrameError> {
    let b = exchange_bytes(interface, n, profile)?;
    Ok(EfficiencyRow {
        interface,
        device: profile.device,
        n,
        efficiency: b.payload as f64 / b.accounted_total as f64,
        efficiency_pct: PercentTenths::from_ratio(b.payload, b.accounted_total),
        payload_bytes: b.payload,
        total_bytes: b.accounted_total,
        wire_bytes: b.wire_total,
        requests: b.requests,
        estimated: interface == I::Uadp && n > profile.pubsub_limits.max_values_per_group(),
    })
}

/// Efficiency rows for every supported (interface, device, n) combination,
/// interface-major.
pub fn build_table1(
    profiles: &[PlcProfile],
    interfaces: &[InterfaceId],
    ns: &[usize],
) -> EfficiencyReport {
    let mut rows = Vec::new();
    for &interface in interfaces {
        for profile in profiles {
            if !profile.supports(interface) {
                continue;
            }
            for &n in ns {
                if let Ok(row) = efficiency_row(interface, n, profile) {
                    rows.push(row);
                }
            }
        }
    }
    EfficiencyReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_size_examples() {
        assert_eq!(ethernet_frame_size(32, &HeaderStack::UDP), 72);
        assert_eq!(ethernet_frame_size(46, &HeaderStack::UDP), 72);
        assert_eq!(ethernet_frame_size(440, &HeaderStack::TCP), 466);
        assert_eq!(
            ethernet_frame_size(440, &HeaderStack::TCP) + tcp_ack_size(),
            538
        );
        assert_eq!(tcp_ack_size(), 72);
    }

    #[test]
    fn stack_constants() {
        assert_eq!(HeaderStack::UDP.ethernet_overhead, 26);
        assert_eq!(HeaderStack::UDP.ip_header, 20);
        assert_eq!(HeaderStack::UDP.l4_header, 8);
        assert_eq!(HeaderStack::TCP.l4_header, 20);
        assert_eq!(HeaderStack::TCP.max_segment(), 1460);
    }

    #[test]
    fn message_size_examples() {
        assert_eq!(message_size_by_name("UDP_Data", 10), Ok(94));
        assert_eq!(message_size_by_name("Job", 100), Ok(169));
        assert_eq!(message_size_by_name("Ack_Data", 50), Ok(363));
        assert_eq!(
            message_size_by_name("Foo", 1),
            Err(FrameError::UnknownMessageName("Foo".into()))
        );
    }

    #[test]
    fn size_tables_reproduced() {
        for l in layouts() {
            for (n, size) in l.size_table {
                assert_eq!(message_size(l, n), size, "{} n={n}", l.name);
            }
        }
    }

    #[test]
    fn digit_sum() {
        assert_eq!(index_digit_sum(0), 0);
        assert_eq!(index_digit_sum(1), 1);
        assert_eq!(index_digit_sum(10), 10);
        assert_eq!(index_digit_sum(11), 12);
        assert_eq!(index_digit_sum(100), 190);
        let brute: usize = (0..1234usize).map(|i| i.to_string().len()).sum();
        assert_eq!(index_digit_sum(1234), brute);
    }

    #[test]
    fn exchange_examples() {
        let p1512 = PlcProfile::s7_1512();
        let p314 = PlcProfile::s7_314();
        assert_eq!(exchange_total_bytes(I::S7, 1, &p1512), Ok(336));
        assert_eq!(exchange_total_bytes(I::OucTcp, 1, &p314), Ok(144));
        assert_eq!(exchange_total_bytes(I::OucTcp, 1, &p1512), Ok(144));
        // two requests of 50 values each
        assert_eq!(exchange_total_bytes(I::S7, 100, &p314), Ok(2 * (169 + 363)));
        assert_eq!(
            exchange_total_bytes(I::OpcUaRead, 1, &p314),
            Err(FrameError::UnsupportedInterface {
                interface: I::OpcUaRead,
                device: Device::S7_314
            })
        );
        assert_eq!(
            exchange_total_bytes(I::Uadp, 0, &p1512),
            Err(FrameError::NoValues)
        );
    }

    #[test]
    fn efficiency_examples() {
        let p1512 = PlcProfile::s7_1512();
        let p314 = PlcProfile::s7_314();
        let e = protocol_efficiency(I::OucUdp, 100, &p1512).unwrap();
        assert!((e - 400.0 / 454.0).abs() < 1e-12);
        let e = protocol_efficiency(I::OpcUaRead, 10, &p1512).unwrap();
        assert!((e - 40.0 / 1094.0).abs() < 1e-12);
        let r = efficiency_row(I::S7, 100, &p314).unwrap();
        assert_eq!(r.efficiency_pct.to_string(), "27.3");
        assert_eq!(r.total_bytes, 1464);
        assert_eq!(r.wire_bytes, 1064);
        let r = efficiency_row(I::S7, 50, &p314).unwrap();
        assert_eq!(r.efficiency_pct.to_string(), "37.6");
        assert_eq!(r.requests, 1);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(PercentTenths::from_ratio(4, 72).to_string(), "5.6");
        // 74.349... rounds to 74.35 and then to 74.4
        assert_eq!(PercentTenths::from_ratio(400, 538).to_string(), "74.4");
        assert_eq!(PercentTenths::from_ratio(400, 454).to_string(), "88.1");
        assert_eq!(PercentTenths::from_ratio(1, 1).to_string(), "100.0");
        assert_eq!(PercentTenths::from_ratio(0, 7).to_string(), "0.0");
    }

    #[test]
    fn table1_shapes() {
        let profiles = [PlcProfile::s7_314(), PlcProfile::s7_1512()];
        let empty = build_table1(&profiles, &[], &[1, 10, 100]);
        assert!(empty.rows.is_empty());
        let udp = build_table1(&profiles, &[I::OucUdp], &[1, 10, 100]);
        assert_eq!(udp.rows.len(), 6);
        for n in [1, 10, 100] {
            let a = udp.get(I::OucUdp, Device::S7_314, n).unwrap();
            let b = udp.get(I::OucUdp, Device::S7_1512, n).unwrap();
            assert_eq!(a.efficiency, b.efficiency);
        }
        let all = build_table1(&profiles, &InterfaceId::ALL, &[1, 10, 100]);
        assert_eq!(all.rows.len(), 27);
        let flagged: Vec<_> = all.rows.iter().filter(|r| r.estimated).collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!((flagged[0].interface, flagged[0].n), (I::Uadp, 100));
    }

    #[test]
    fn efficiency_increases_with_n_on_1512() {
        let p = PlcProfile::s7_1512();
        for i in InterfaceId::ALL {
            let e: Vec<f64> = [1, 10, 100]
                .iter()
                .map(|&n| protocol_efficiency(i, n, &p).unwrap())
                .collect();
            assert!(e[0] < e[1] && e[1] < e[2], "{i}: {e:?}");
        }
    }

    proptest! {
        #[test]
        fn padding_floor(l3 in 0usize..=46) {
            prop_assert_eq!(ethernet_frame_size(l3, &HeaderStack::UDP), 72);
        }

        #[test]
        fn slope_one_above_floor(l3 in 46usize..100_000) {
            let s = &HeaderStack::TCP;
            prop_assert_eq!(ethernet_frame_size(l3 + 1, s), ethernet_frame_size(l3, s) + 1);
        }

        #[test]
        fn s7_response_is_affine(n in 1usize..=55) {
            prop_assert_eq!(message_size(M::AckData.layout(), n) - 4 * n, 163);
        }

        #[test]
        fn uadp_marginal_cost(n in 1usize..=200) {
            let l = M::DataSetMessage.layout();
            prop_assert_eq!(message_size(l, n) - message_size(l, 1), 5 * (n - 1));
        }
    }
}
