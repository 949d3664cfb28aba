//! Open User Communication payloads: the values are packed back to back
//! with no framing or metadata, so the receiver must know count and byte
//! order in advance.

use serde::{Deserialize, Serialize};

use super::{CodecError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ByteOrder {
    #[default]
    #[serde(alias = "big")]
    BigEndian,
    #[serde(alias = "little")]
    LittleEndian,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OucPayload {
    pub values: Vec<u32>,
    pub byte_order: ByteOrder,
}

impl OucPayload {
    pub fn new(values: Vec<u32>, byte_order: ByteOrder) -> Self {
        OucPayload { values, byte_order }
    }

    pub fn encoded_len(&self) -> usize {
        self.values.len() * 4
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        for &v in &self.values {
            match self.byte_order {
                ByteOrder::BigEndian => out.extend_from_slice(&v.to_be_bytes()),
                ByteOrder::LittleEndian => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], byte_order: ByteOrder) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(CodecError::malformed(
                "OUC payload",
                format!("{} bytes is not a whole number of values", bytes.len()),
            ));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| {
                let c: [u8; 4] = c.try_into().expect("chunk of 4");
                match byte_order {
                    ByteOrder::BigEndian => u32::from_be_bytes(c),
                    ByteOrder::LittleEndian => u32::from_le_bytes(c),
                }
            })
            .collect();
        Ok(OucPayload { values, byte_order })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_order_is_respected() {
        let p = OucPayload::new(vec![0x0102_0304], ByteOrder::BigEndian);
        assert_eq!(p.encode(), [1, 2, 3, 4]);
        let p = OucPayload::new(vec![0x0102_0304], ByteOrder::LittleEndian);
        assert_eq!(p.encode(), [4, 3, 2, 1]);
    }

    #[test]
    fn ragged_input_rejected() {
        assert!(matches!(
            OucPayload::decode(&[1, 2, 3], ByteOrder::BigEndian),
            Err(CodecError::Malformed { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(any::<u32>(), 0..200), le in any::<bool>()) {
            let order = if le { ByteOrder::LittleEndian } else { ByteOrder::BigEndian };
            let p = OucPayload::new(values, order);
            let bytes = p.encode();
            prop_assert_eq!(bytes.len(), p.encoded_len());
            prop_assert_eq!(OucPayload::decode(&bytes, order).unwrap(), p);
        }
    }
}
