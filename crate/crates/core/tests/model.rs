//! Frame model, codecs and cost model through the public API only.

use plcbench_core::codec::{stock, S7Message};
use plcbench_core::frame::{
    build_table1, efficiency_row, layouts, message_size, message_size_by_name, wire_bytes,
    MessageName, Transport,
};
use plcbench_core::offload::{
    build_breakeven_table, digits_required, leibniz_pi, CycleModel, OffloadScenario,
    ScenarioConfig, UpdateOverride,
};
use plcbench_core::{Device, Direction, InterfaceId, NBucket, PlcProfile};
use proptest::prelude::*;

#[test]
fn size_table_matches_by_name() {
    for layout in layouts() {
        for (n, published) in layout.size_table {
            assert_eq!(
                message_size_by_name(layout.name.as_str(), n).unwrap(),
                published,
                "{}",
                layout.name
            );
        }
    }
    assert!(message_size_by_name("NoSuchMessage", 1).is_err());
}

#[test]
fn table1_covers_supported_cells_only() {
    let profiles = Device::ALL.map(PlcProfile::stock);
    let report = build_table1(&profiles, &InterfaceId::ALL, &[1, 10, 100]);
    // three interfaces on the 314, six on the 1512
    assert_eq!(report.rows.len(), (3 + 6) * 3);
    let s7 = report.get(InterfaceId::S7, Device::S7_314, 100).unwrap();
    assert_eq!(s7.requests, 2);
    assert_eq!(s7.efficiency_pct.to_string(), "27.3");
    assert!(report
        .get(InterfaceId::OpcUaRead, Device::S7_314, 1)
        .is_none());
    assert!(
        report
            .get(InterfaceId::Uadp, Device::S7_1512, 100)
            .unwrap()
            .estimated
    );
}

#[test]
fn overrides_feed_the_breakeven_cells() {
    let profiles = [PlcProfile::stock(Device::S7_1512)];
    let mut cfg = ScenarioConfig::default();
    let before = build_breakeven_table(&profiles, &[InterfaceId::Uadp], &cfg);
    let est = before.get(InterfaceId::Uadp, Device::S7_1512, 100).unwrap();
    assert_eq!((est.n_br, est.estimated), (Some(66), true));

    cfg.t_update_overrides.push(UpdateOverride {
        interface: InterfaceId::Uadp,
        device: Device::S7_1512,
        n: 100,
        ms: 5.0,
    });
    let after = build_breakeven_table(&profiles, &[InterfaceId::Uadp], &cfg);
    let cell = after.get(InterfaceId::Uadp, Device::S7_1512, 100).unwrap();
    assert!(!cell.estimated);
    assert_eq!(cell.n_br, Some((5084.0f64 / (36.5 - 0.0349)).ceil() as u64));
}

#[test]
fn fifth_leibniz_row_repeats_the_fourth() {
    let row = digits_required(5).unwrap();
    assert_eq!((row.table_n, row.table_prefix), (100_000, "3.141"));
    assert!(!row.table_row_matches);
    assert_ne!(row.minimal_n, row.table_n);
    assert!(plcbench_core::offload::matches_pi_prefix(
        leibniz_pi(row.minimal_n),
        5
    ));
    assert!(digits_required(7).is_err());
}

#[test]
fn stock_s7_ack_decodes() {
    let bytes = stock::encoded(MessageName::AckData, 10).unwrap();
    assert!(matches!(
        S7Message::decode(&bytes).unwrap(),
        S7Message::ReadAck(_)
    ));
}

proptest! {
    #[test]
    fn sizes_grow_with_values(n in 1usize..2000) {
        for layout in layouts() {
            prop_assert!(message_size(layout, n + 1) >= message_size(layout, n));
        }
    }

    #[test]
    fn frames_never_below_minimum(app in 0usize..20_000) {
        for transport in [Transport::Udp, Transport::Tcp] {
            for direction in [Direction::PlcToEdge, Direction::EdgeToPlc] {
                let bytes = wire_bytes(app, transport, direction);
                // padding to the minimum frame, else at least the UDP headers
                prop_assert!(bytes >= 72 && bytes >= app + 26 + 28);
            }
        }
    }

    #[test]
    fn efficiency_is_a_fraction(n in 1usize..=100) {
        for device in Device::ALL {
            let profile = PlcProfile::stock(device);
            for interface in profile.supported_interfaces().collect::<Vec<_>>() {
                let row = efficiency_row(interface, n, &profile).unwrap();
                prop_assert!(row.efficiency > 0.0 && row.efficiency < 1.0);
                prop_assert!(row.wire_bytes <= row.total_bytes);
                prop_assert_eq!(row.payload_bytes, 4 * n);
            }
        }
    }

    #[test]
    fn breakeven_is_the_first_paying_n(t_update_ms in 0.0f64..500.0, requests in 1u32..4) {
        let mut s = OffloadScenario::new(CycleModel::S7_1512, t_update_ms);
        s.requests = requests;
        let n = s.break_even().unwrap();
        let cycle = |n: u64| CycleModel::S7_1512.delta_t_cycle_us(n);
        prop_assert!(s.t_ro_us(n) <= cycle(n));
        prop_assert!(n == 0 || s.t_ro_us(n - 1) > cycle(n - 1));
    }

    #[test]
    fn nearest_bucket_is_closest_in_log(n in 1usize..100_000) {
        let b = NBucket::nearest(n);
        let d = |b: NBucket| ((n as f64).log10() - (b.values() as f64).log10()).abs();
        for other in NBucket::ALL {
            prop_assert!(d(b) <= d(other) + 1e-12);
        }
    }

    #[test]
    fn leibniz_error_alternates_around_pi(n in 0u64..5000) {
        let below = leibniz_pi(n) < std::f64::consts::PI;
        prop_assert_eq!(below, n % 2 == 1);
    }
}
