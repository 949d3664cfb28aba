//! The binary end to end: outputs, determinism and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn plcbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plcbench"))
        .args(args)
        .env_remove("PLCBENCH_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn tables_are_byte_identical_across_runs() {
    for format in ["csv", "md", "json"] {
        let a = plcbench(&["--mode", "tables", "--format", format]);
        let b = plcbench(&["--mode", "tables", "--format", format]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{format}");
    }
}

#[test]
fn one_interface_gives_one_row_per_value_count() {
    let o = plcbench(&[
        "--mode",
        "tables",
        "--interfaces",
        "ouc-udp",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<_> = text.lines().filter(|l| l.starts_with("ouc-udp,")).collect();
    // one size row plus three efficiency rows per device
    assert_eq!(rows.len(), 7, "{text}");
    assert!(rows.contains(&"ouc-udp,UDP_Data,72,94,454"));
    assert!(rows.contains(&"ouc-udp,s7-1512,100,88.1,454,false,3.63,profile"));
}

#[test]
fn fifty_values_from_the_314_fit_one_request() {
    let o = plcbench(&[
        "--mode",
        "tables",
        "--n",
        "50",
        "--interface",
        "s7",
        "--device",
        "314",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("| 50 | 37.6 |"), "{}", stdout(&o));
}

#[test]
fn breakeven_table_in_every_format() {
    let o = plcbench(&["--mode", "breakeven", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# plcbench "));
    assert!(text.contains("ouc-udp,314,1,1.00,54,false"));
    assert!(text.contains("uadp,1512,100,2.30,66,true"));
    let j = plcbench(&["--mode", "breakeven", "--format", "json", "--n", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert!(v["cells"].as_array().unwrap().iter().all(|c| c["n"] == 1));
}

#[test]
fn missing_scenario_file_is_a_config_error() {
    let o = plcbench(&["--mode", "breakeven", "--scenario", "/does/not/exist.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exist.json"));
}

#[test]
fn scenario_file_changes_the_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    std::fs::write(&path, r#"{"network": {"line_length_m": 0, "hops": 0, "per_meter_delay_ns": 0, "per_hop_one_way_us": 0}}"#)
        .unwrap();
    let o = plcbench(&[
        "--mode",
        "breakeven",
        "--format",
        "csv",
        "--interface",
        "ouc-udp",
        "--device",
        "314",
        "--n",
        "1",
        "--scenario",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // (4 + 1000) / (20.2 - 0.0349) = 49.8
    assert!(
        stdout(&o).contains("ouc-udp,314,1,1.00,50,false"),
        "{}",
        stdout(&o)
    );
}

fn write_stats(dir: &Path, min_ms: f64) -> String {
    let run = plcbench_harness::MeasurementRun::from_timestamps(
        plcbench_core::InterfaceId::OucUdp,
        Some(plcbench_core::Device::S7_314),
        1,
        (0..200).map(|i| i as f64 * min_ms * 1000.0).collect(),
        0,
    )
    .unwrap();
    let report = plcbench_harness::StatsReport::new(&run).unwrap();
    let path = dir.join("stats.json");
    std::fs::write(&path, report.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn measured_update_times_replace_profile_values() {
    let dir = tempfile::tempdir().unwrap();
    let stats = write_stats(dir.path(), 2.5);
    let base = [
        "--interface",
        "ouc-udp",
        "--device",
        "314",
        "--n",
        "1",
        "--format",
        "csv",
    ];
    let mut args = vec!["--mode", "breakeven", "--t-update-from", &stats];
    args.extend(base);
    let o = plcbench(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // (84 + 2500) / 20.1651 = 128.1
    assert!(
        stdout(&o).contains("ouc-udp,314,1,2.50,129,false"),
        "{}",
        stdout(&o)
    );

    let mut args = vec!["--mode", "tables", "--t-update-from", &stats];
    args.extend(base);
    let t = stdout(&plcbench(&args));
    assert!(
        t.contains("ouc-udp,s7-314,1,5.6,72,false,2.50,measured"),
        "{t}"
    );
    let plain = stdout(&plcbench(&[&["--mode", "tables"], &base[..]].concat()));
    assert!(
        plain.contains("ouc-udp,s7-314,1,5.6,72,false,1.00,profile"),
        "{plain}"
    );
    // the hash covers the measurement file
    assert_ne!(t.lines().next(), plain.lines().next());
}

#[test]
fn reports_go_to_files_with_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reports");
    let o = plcbench(&[
        "--mode",
        "tables",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    for name in ["message_sizes.json", "efficiency.json"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["generator"].as_str().unwrap().starts_with("plcbench"));
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.json");
    std::fs::write(
        &path,
        r#"{"mode": "tables", "interfaces": ["uadp"], "n_values": [10], "format": "csv"}"#,
    )
    .unwrap();
    let o = plcbench(&["--config", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("uadp,DataSetMessage,118"));
}

#[test]
fn selftest_passes() {
    let o = plcbench(&["--mode", "roundtrip-selftest", "--count", "200"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS")).count(),
        13,
        "{text}"
    );
}

#[test]
fn loopback_measurement_writes_raw_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let o = plcbench(&[
        "--mode",
        "measure",
        "--loopback",
        "--device",
        "1512",
        "--interface",
        "s7",
        "--n",
        "10",
        "--count",
        "120",
        "--warmup",
        "5",
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stats = std::fs::read_to_string(dir.path().join("stats_s7_s7-1512_n10.json")).unwrap();
    let report = plcbench_harness::StatsReport::from_json(&stats).unwrap();
    assert_eq!(report.n, 10);
    assert!(dir.path().join("run_s7_s7-1512_n10.csv").exists());
    let summary = std::fs::read_to_string(dir.path().join("measurements.csv")).unwrap();
    assert!(summary
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("s7,s7-1512,10,"));
}

#[test]
fn emulator_runs_for_its_duration() {
    let o = plcbench(&[
        "--mode",
        "emulate",
        "--device",
        "1512",
        "--interface",
        "s7,opcua-read",
        "--port-s7",
        "0",
        "--port-opcua",
        "0",
        "--duration",
        "0.3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("s7 on 127.0.0.1:"));
    assert!(err.contains("opcua-read on 127.0.0.1:"));
}

#[test]
fn exit_codes() {
    assert_eq!(plcbench(&["--help"]).status.code(), Some(0));
    assert_eq!(plcbench(&["--version"]).status.code(), Some(0));
    assert_eq!(plcbench(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(plcbench(&[]).status.code(), Some(1));
    assert_eq!(
        plcbench(&["--mode", "tables", "--n", "101"]).status.code(),
        Some(1)
    );
    assert_eq!(
        plcbench(&[
            "--mode",
            "emulate",
            "--device",
            "314",
            "--interface",
            "opcua-read",
            "--duration",
            "0.1"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        plcbench(&[
            "--mode",
            "emulate",
            "--device",
            "1512",
            "--interface",
            "ouc-udp",
            "--duration",
            "0.1"
        ])
        .status
        .code(),
        Some(1),
        "ouc-udp needs a partner"
    );
    // nothing listens on the discard port
    assert_eq!(
        plcbench(&[
            "--mode",
            "measure",
            "--device",
            "1512",
            "--interface",
            "s7",
            "--n",
            "1",
            "--target",
            "127.0.0.1",
            "--port-s7",
            "9"
        ])
        .status
        .code(),
        Some(2)
    );
}
