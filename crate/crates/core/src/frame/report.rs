use std::fmt::Write as _;

use super::{layouts, message_size, EfficiencyRow};

/// Update time lookup for a report row, in milliseconds.
pub type UpdateLookup<'a> = &'a dyn Fn(&EfficiencyRow) -> Option<f64>;

const EFFICIENCY_HEADER: [&str; 7] = [
    "interface",
    "device",
    "n",
    "efficiency_pct",
    "total_bytes",
    "estimated_flag",
    "update_time_ms",
];

fn efficiency_record(row: &EfficiencyRow, update_ms: UpdateLookup<'_>) -> [String; 7] {
    [
        row.interface.to_string(),
        row.device.to_string(),
        row.n.to_string(),
        row.efficiency_pct.to_string(),
        row.total_bytes.to_string(),
        row.estimated.to_string(),
        update_ms(row)
            .map(|t| format!("{t:.2}"))
            .unwrap_or_default(),
    ]
}

pub fn efficiency_csv(rows: &[EfficiencyRow], update_ms: UpdateLookup<'_>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EFFICIENCY_HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(efficiency_record(row, update_ms))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn efficiency_markdown(rows: &[EfficiencyRow], update_ms: UpdateLookup<'_>) -> String {
    let mut out = String::new();
    markdown_row(&mut out, EFFICIENCY_HEADER.iter().map(|s| s.to_string()));
    markdown_row(
        &mut out,
        EFFICIENCY_HEADER.iter().map(|_| "---".to_string()),
    );
    for row in rows {
        markdown_row(&mut out, efficiency_record(row, update_ms));
    }
    out
}

fn size_records(ns: &[usize]) -> Vec<Vec<String>> {
    layouts()
        .iter()
        .map(|l| {
            let mut rec = vec![l.interface.to_string(), l.name.to_string()];
            rec.extend(ns.iter().map(|&n| message_size(l, n).to_string()));
            rec
        })
        .collect()
}

fn size_header(ns: &[usize]) -> Vec<String> {
    let mut h = vec!["interface".to_string(), "message".to_string()];
    h.extend(ns.iter().map(|n| format!("n{n}")));
    h
}

pub fn message_sizes_csv(ns: &[usize]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(size_header(ns)).expect("in-memory write");
    for rec in size_records(ns) {
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn message_sizes_markdown(ns: &[usize]) -> String {
    let mut out = String::new();
    let header = size_header(ns);
    let width = header.len();
    markdown_row(&mut out, header);
    markdown_row(&mut out, (0..width).map(|_| "---".to_string()));
    for rec in size_records(ns) {
        markdown_row(&mut out, rec);
    }
    out
}

fn markdown_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    out.push('|');
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out.push('\n');
}
