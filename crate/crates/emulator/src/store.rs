use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use plcbench_core::codec::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("data block {0} does not exist")]
    NoSuchBlock(u16),
    #[error("bytes {start}..{end} outside data block {db} of {size} bytes")]
    OutOfRange {
        db: u16,
        start: usize,
        end: usize,
        size: usize,
    },
}

/// Process image of the emulated PLC: data blocks by number.
///
/// Every request is served under one lock acquisition, so a reader never
/// sees a half-applied write.
#[derive(Debug, Default)]
pub struct DataBlockStore {
    blocks: RwLock<BTreeMap<u16, Vec<u8>>>,
    cycle: AtomicU64,
}

impl DataBlockStore {
    /// Blocks of the given sizes, each filled with byte `i` = `i mod 256`.
    pub fn with_ramp(sizes: &BTreeMap<u16, usize>) -> Self {
        let blocks = sizes
            .iter()
            .map(|(&db, &size)| (db, (0..size).map(|i| i as u8).collect()))
            .collect();
        DataBlockStore {
            blocks: RwLock::new(blocks),
            cycle: AtomicU64::new(0),
        }
    }

    pub fn block_len(&self, db: u16) -> Option<usize> {
        self.blocks.read().unwrap().get(&db).map(Vec::len)
    }

    pub fn read(&self, db: u16, start: usize, len: usize) -> Result<Vec<u8>, StoreError> {
        self.read_many(&[(db, start, len)])
            .pop()
            .expect("one range")
    }

    /// Several ranges from one consistent snapshot.
    pub fn read_many(&self, ranges: &[(u16, usize, usize)]) -> Vec<Result<Vec<u8>, StoreError>> {
        let blocks = self.blocks.read().unwrap();
        self.cycle.fetch_add(1, Ordering::Relaxed);
        ranges
            .iter()
            .map(|&(db, start, len)| {
                let block = blocks.get(&db).ok_or(StoreError::NoSuchBlock(db))?;
                let end = start.saturating_add(len);
                block
                    .get(start..end)
                    .map(<[u8]>::to_vec)
                    .ok_or(StoreError::OutOfRange {
                        db,
                        start,
                        end,
                        size: block.len(),
                    })
            })
            .collect()
    }

    pub fn write(&self, db: u16, start: usize, data: &[u8]) -> Result<(), StoreError> {
        let mut blocks = self.blocks.write().unwrap();
        let block = blocks.get_mut(&db).ok_or(StoreError::NoSuchBlock(db))?;
        let size = block.len();
        let end = start.saturating_add(data.len());
        block
            .get_mut(start..end)
            .ok_or(StoreError::OutOfRange {
                db,
                start,
                end,
                size,
            })?
            .copy_from_slice(data);
        self.cycle.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Accesses served so far.
    pub fn cycle(&self) -> u64 {
        self.cycle.load(Ordering::Relaxed)
    }

    /// The first `n` big-endian 4-byte values of block `db`.
    pub fn values(&self, db: u16, n: usize) -> Result<Vec<u32>, StoreError> {
        Ok(self
            .read(db, 0, 4 * n)?
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn scalars(&self, db: u16, n: usize) -> Result<Vec<Scalar>, StoreError> {
        Ok(self
            .values(db, n)?
            .into_iter()
            .map(Scalar::uint32)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> DataBlockStore {
        DataBlockStore::with_ramp(&BTreeMap::from([(1, 600), (2, 8)]))
    }

    #[test]
    fn ramp_pattern() {
        let s = store();
        let b = s.read(1, 254, 4).unwrap();
        assert_eq!(b, [254, 255, 0, 1]);
        assert_eq!(s.values(1, 2).unwrap(), [0x0001_0203, 0x0405_0607]);
    }

    #[test]
    fn bounds() {
        let s = store();
        assert_eq!(s.read(3, 0, 1), Err(StoreError::NoSuchBlock(3)));
        assert!(matches!(
            s.read(2, 6, 4),
            Err(StoreError::OutOfRange { .. })
        ));
        assert!(s.read(2, 8, 0).is_ok());
        assert!(matches!(
            s.write(2, 7, &[1, 2]),
            Err(StoreError::OutOfRange { .. })
        ));
    }

    #[test]
    fn writes_are_visible_and_counted() {
        let s = store();
        let before = s.cycle();
        s.write(2, 0, &[9, 9]).unwrap();
        assert_eq!(s.read(2, 0, 3).unwrap(), [9, 9, 2]);
        assert_eq!(s.cycle(), before + 2);
    }

    #[test]
    fn no_torn_reads() {
        use std::sync::Arc;
        let s = Arc::new(DataBlockStore::with_ramp(&BTreeMap::from([(1, 400)])));
        let writer = {
            let s = Arc::clone(&s);
            std::thread::spawn(move || {
                for v in 0..2000u32 {
                    let fill = (v % 256) as u8;
                    s.write(1, 0, &[fill; 400]).unwrap();
                }
            })
        };
        for _ in 0..2000 {
            let b = s.read(1, 0, 400).unwrap();
            assert!(
                b.iter().all(|&x| x == b[0]) || b == (0..400).map(|i| i as u8).collect::<Vec<_>>()
            );
        }
        writer.join().unwrap();
    }
}
