//! Codec self-test: random round trips and encoded sizes against the
//! frame model.

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use plcbench_core::codec::sample::{self, CodecFamily};
use plcbench_core::codec::{stock, OpcUaMessage, OucPayload, S7Message, UadpNetworkMessage};
use plcbench_core::frame::{message_size, wire_bytes, MessageName};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

/// Whether one random message of `family` survives encode and decode.
fn round_trips(family: CodecFamily, rng: &mut StdRng) -> Result<(), String> {
    fn same<T: PartialEq + std::fmt::Debug>(a: T, b: T) -> Result<(), String> {
        if a == b {
            Ok(())
        } else {
            Err(format!("{a:?} decoded as {b:?}"))
        }
    }
    match family {
        CodecFamily::Ouc => {
            let m = sample::ouc(rng);
            let back = OucPayload::decode(&m.encode(), m.byte_order).map_err(|e| e.to_string())?;
            same(m, back)
        }
        CodecFamily::S7 => {
            let m = sample::s7(rng);
            let bytes = m.encode().map_err(|e| e.to_string())?;
            same(m, S7Message::decode(&bytes).map_err(|e| e.to_string())?)
        }
        CodecFamily::OpcUa => {
            let m = sample::opcua(rng);
            let bytes = m.encode().map_err(|e| e.to_string())?;
            same(m, OpcUaMessage::decode(&bytes).map_err(|e| e.to_string())?)
        }
        CodecFamily::Uadp => {
            let m = sample::uadp(rng);
            let bytes = m.encode().map_err(|e| e.to_string())?;
            same(
                m,
                UadpNetworkMessage::decode(&bytes).map_err(|e| e.to_string())?,
            )
        }
    }
}

pub fn round_trip_check(family: CodecFamily, count: usize, seed: u64) -> CheckResult {
    let mut rng = StdRng::seed_from_u64(seed ^ family as u64);
    let failures: Vec<String> = (0..count)
        .filter_map(|i| {
            round_trips(family, &mut rng)
                .err()
                .map(|e| format!("#{i}: {e}"))
        })
        .collect();
    CheckResult {
        check: format!("round-trip {}", family.as_str()),
        passed: failures.is_empty(),
        detail: match failures.first() {
            None => format!("{count} messages"),
            Some(first) => format!("{} of {count} failed, first {first}", failures.len()),
        },
    }
}

/// Encoded sizes of the canonical messages for every n in `1..=max_n`
/// against the frame model, and at 1, 10 and 100 against the published
/// table.
pub fn size_check(name: MessageName, max_n: usize) -> CheckResult {
    let layout = name.layout();
    let mut mismatches = Vec::new();
    for n in 1..=max_n {
        match stock::encoded(name, n) {
            Ok(bytes) => {
                let wire = wire_bytes(bytes.len(), layout.transport, layout.direction);
                if bytes.len() != layout.app_len(n) || wire != message_size(layout, n) {
                    mismatches.push(format!(
                        "n={n}: {wire} bytes, model {}",
                        message_size(layout, n)
                    ));
                }
            }
            Err(e) => mismatches.push(format!("n={n}: {e}")),
        }
    }
    for &(n, published) in &layout.size_table {
        if message_size(layout, n) != published {
            mismatches.push(format!(
                "n={n}: model {} != table {published}",
                message_size(layout, n)
            ));
        }
    }
    CheckResult {
        check: format!("sizes {name}"),
        passed: mismatches.is_empty(),
        detail: match mismatches.first() {
            None => format!("n=1..{max_n}"),
            Some(first) => format!("{} mismatches, first {first}", mismatches.len()),
        },
    }
}

/// Every check of the self-test.
pub fn run(count: usize, seed: u64) -> Vec<CheckResult> {
    CodecFamily::ALL
        .into_iter()
        .map(|f| round_trip_check(f, count, seed))
        .chain(MessageName::ALL.into_iter().map(|m| size_check(m, 100)))
        .collect()
}
