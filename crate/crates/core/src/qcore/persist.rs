//! Binary Q-table format, version 1. All integers and floats little-endian.
//!
//! ```text
//! magic        4 bytes   "QTAB"
//! version      u32       1
//! discount     f64
//! state_count  u64
//! state_count times, ascending by key:
//!   key_len    u32, then key_len x i32
//!   visits     u64
//!   pair_count u64
//!   pair_count times, ascending by action key:
//!     key_len  u32, then key_len x i32
//!     q        f64
//!     visits   u64
//! checksum     u64       FNV-1a 64 over every preceding byte
//! ```

use std::collections::{BTreeMap, HashMap};

use super::table::{ActionKey, PairRecord, QTable, StateKey, StateRecord};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QTAB";
pub const FORMAT_VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

fn put_key(out: &mut Vec<u8>, key: &[i32]) {
    out.extend_from_slice(&(key.len() as u32).to_le_bytes());
    for c in key {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

pub fn save_table(table: &QTable) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&table.discount().to_le_bytes());
    let mut states: Vec<_> = table.states().collect();
    states.sort_by(|a, b| a.0.cmp(b.0));
    out.extend_from_slice(&(states.len() as u64).to_le_bytes());
    for (key, record) in states {
        put_key(&mut out, &key.0);
        out.extend_from_slice(&record.visits.to_le_bytes());
        out.extend_from_slice(&(record.actions.len() as u64).to_le_bytes());
        for (action, pair) in &record.actions {
            put_key(&mut out, &action.0);
            out.extend_from_slice(&pair.q.to_le_bytes());
            out.extend_from_slice(&pair.visits.to_le_bytes());
        }
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            Error::Persistence(format!("truncated table: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn key(&mut self) -> Result<Vec<i32>> {
        let len = self.u32()? as usize;
        let raw = self.take(len.checked_mul(4).ok_or_else(|| Error::Persistence("key length overflow".into()))?)?;
        Ok(raw.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().expect("chunk of 4"))).collect())
    }
}

pub fn load_table(bytes: &[u8]) -> Result<QTable> {
    if bytes.len() < 4 + 4 + 8 + 8 + 8 {
        return Err(Error::Persistence(format!("truncated table: only {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Persistence("not a Q-table file (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8-byte tail"));
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Persistence(format!("unsupported table version {version}, expected {FORMAT_VERSION}")));
    }
    if fnv1a64(body) != stored {
        return Err(Error::Persistence("checksum mismatch (corrupt or truncated file)".into()));
    }
    let discount = r.f64()?;
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Persistence(format!("stored discount {discount} outside [0, 1)")));
    }
    let n_states = r.u64()?;
    let mut states = HashMap::new();
    for _ in 0..n_states {
        let key = StateKey(r.key()?);
        let visits = r.u64()?;
        let n_pairs = r.u64()?;
        let mut actions = BTreeMap::new();
        for _ in 0..n_pairs {
            let action = ActionKey(r.key()?);
            let q = r.f64()?;
            let pair_visits = r.u64()?;
            actions.insert(action, PairRecord { q, visits: pair_visits });
        }
        if states.insert(key.clone(), StateRecord { visits, actions }).is_some() {
            return Err(Error::Persistence(format!("duplicate state {key}")));
        }
    }
    if r.pos != body.len() {
        return Err(Error::Persistence(format!("{} trailing bytes after table body", body.len() - r.pos)));
    }
    Ok(QTable::from_parts(discount, states))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn empty_round_trip() {
        let t = QTable::new(0.9).unwrap();
        let back = load_table(&save_table(&t)).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.discount(), 0.9);
    }

    #[test]
    fn large_random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = QTable::new(0.9).unwrap();
        while t.pair_count() < 100_000 {
            let x = StateKey(vec![rng.random_range(0..2000), rng.random_range(-3..3)]);
            let a = ActionKey(vec![rng.random_range(0..60)]);
            let next = StateKey(vec![rng.random_range(0..2000), 0]);
            t.update(&x, &a, rng.random::<f64>(), &next).unwrap();
        }
        let bytes = save_table(&t);
        let back = load_table(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(save_table(&back), bytes);
    }

    #[test]
    fn truncated_and_corrupt_files_are_rejected() {
        let mut t = QTable::new(0.5).unwrap();
        t.update(&StateKey(vec![1]), &ActionKey(vec![2]), 0.3, &StateKey(vec![1])).unwrap();
        let bytes = save_table(&t);
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(load_table(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(load_table(&flipped).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(load_table(&wrong_version), Err(Error::Persistence(m)) if m.contains("version")));
    }
}
