// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Deterministic key hashing used for partitioning and hash tables.
//!
//! Each value is hashed from its domain tag and canonical little-endian
//! bytes through a splitmix64 finalizer; key columns are folded with
//! `h = mix(h ^ column_hash)`. No per-process randomization.

use std::hash::{BuildHasherDefault, Hasher};

use crate::column::{Column, ColumnData};
use crate::error::Result;
use crate::kernels::KeySpec;
use crate::table::Table;

pub const HASH_SEED: u64 = 0x2545_F491_4F6C_DD1D;
pub const NULL_HASH: u64 = 0x6E75_6C6C_6E75_6C6C;

#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn tagged(tag: u8) -> u64 {
    mix64(HASH_SEED ^ tag as u64)
}

/// Hash of slot `i` of `col`.
#[inline]
pub fn value_hash(col: &Column, i: usize) -> u64 {
    if !col.is_valid(i) {
        return NULL_HASH;
    }
    match col.data() {
        ColumnData::Int64(v) => mix64(tagged(0) ^ v[i] as u64),
        ColumnData::Float64(v) => mix64(tagged(1) ^ v[i].to_bits()),
        ColumnData::Boolean(v) => mix64(tagged(3) ^ v[i] as u64),
        ColumnData::Utf8 { .. } => {
            let bytes = col.utf8_bytes(i);
            let mut h = tagged(2);
            for chunk in bytes.chunks(8) {
                let mut w = [0u8; 8];
                w[..chunk.len()].copy_from_slice(chunk);
                h = mix64(h ^ u64::from_le_bytes(w));
            }
            mix64(h ^ bytes.len() as u64)
        }
    }
}

/// Per-row hash of the key columns. Depends only on key values.
pub fn hash_keys(t: &Table, keys: &KeySpec) -> Result<Vec<u64>> {
    keys.check(t.schema())?;
    let n = t.num_rows();
    let mut out = vec![HASH_SEED; n];
    for &c in keys.columns() {
        let col = t.column(c);
        match (col.i64_values(), col.null_count()) {
            (Some(v), 0) => {
                let tag = tagged(0);
                for (h, x) in out.iter_mut().zip(v) {
                    *h = mix64(*h ^ mix64(tag ^ *x as u64));
                }
            }
            _ => {
                for (i, h) in out.iter_mut().enumerate() {
                    *h = mix64(*h ^ value_hash(col, i));
                }
            }
        }
    }
    Ok(out)
}

/// Partition id for a hash: `hash mod parts`.
#[inline]
pub fn bucket(hash: u64, parts: usize) -> usize {
    (hash % parts as u64) as usize
}

/// Pass-through hasher for keys that are already well-mixed `u64` hashes.
#[derive(Default)]
pub struct IdentityHasher(u64);

impl Hasher for IdentityHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 << 8) | *b as u64;
        }
    }

    fn write_u64(&mut self, i: u64) {
        // Partitioning uses `hash mod p`, so the low bits are correlated
        // within one partition. Swap halves before bucketing.
        self.0 = i.rotate_left(32);
    }
}

pub type HashBuild = BuildHasherDefault<IdentityHasher>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Domain, Schema, Value};

    fn table(keys: Vec<Value>) -> Table {
        Table::build(
            Schema::from_pairs([("k", Domain::Utf8)]).unwrap(),
            vec![keys],
        )
        .unwrap()
    }

    #[test]
    fn equal_keys_hash_equal_across_tables() {
        let a = table(vec!["x".into(), "yy".into(), Value::Null]);
        let b = table(vec![Value::Null, "yy".into(), "x".into()]);
        let ha = hash_keys(&a, &KeySpec::single(0)).unwrap();
        let hb = hash_keys(&b, &KeySpec::single(0)).unwrap();
        assert_eq!(ha[0], hb[2]);
        assert_eq!(ha[1], hb[1]);
        assert_eq!(ha[2], hb[0]);
        assert_eq!(ha, hash_keys(&a, &KeySpec::single(0)).unwrap());
    }

    #[test]
    fn pinned_values_do_not_drift() {
        // Cross-process stability: these must never change.
        let t = Table::build(
            Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
            vec![vec![0i64.into(), 1i64.into(), Value::Null]],
        )
        .unwrap();
        let h = hash_keys(&t, &KeySpec::single(0)).unwrap();
        let expect0 = mix64(HASH_SEED ^ mix64(mix64(HASH_SEED)));
        assert_eq!(h[0], expect0);
        assert_eq!(h[2], mix64(HASH_SEED ^ NULL_HASH));
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn domain_tag_separates_equal_bits() {
        let i = Column::from_i64(vec![0]);
        let f = Column::from_f64(vec![0.0]);
        assert_ne!(value_hash(&i, 0), value_hash(&f, 0));
    }
}
