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

//! Binary table format.
//!
//! Little-endian layout: magic `BSPF`, `u16` version, `u32` column count,
//! then per column: `u8` domain tag, `u32` name length, name bytes, `u64`
//! row count, then three length-prefixed (`u64`) buffers: validity bitmap,
//! offsets (empty for fixed-width domains) and data.

use std::fs;
use std::path::Path;

use crate::bitmap::Bitmap;
use crate::column::{Column, ColumnData};
use crate::error::{Error, Result};
use crate::kernels::hash::mix64;
use crate::table::Table;
use crate::types::{Domain, Field, Schema};

pub const MAGIC: &[u8; 4] = b"BSPF";
pub const VERSION: u16 = 1;

pub fn serialize_table(t: &Table) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + t.byte_size() + 32 * t.num_columns());
    write_table(t, &mut out);
    out
}

pub fn write_table(t: &Table, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.num_columns() as u32).to_le_bytes());
    for (field, col) in t.schema().fields().iter().zip(t.columns()) {
        out.push(field.domain.tag());
        out.extend_from_slice(&(field.name.len() as u32).to_le_bytes());
        out.extend_from_slice(field.name.as_bytes());
        out.extend_from_slice(&(col.len() as u64).to_le_bytes());
        put_buf(out, col.validity().as_bytes());
        match col.data() {
            ColumnData::Int64(v) => {
                put_u64(out, 0);
                put_u64(out, (v.len() * 8) as u64);
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            ColumnData::Float64(v) => {
                put_u64(out, 0);
                put_u64(out, (v.len() * 8) as u64);
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            ColumnData::Boolean(v) => {
                put_u64(out, 0);
                put_buf(out, v);
            }
            ColumnData::Utf8 { offsets, bytes } => {
                put_u64(out, (offsets.len() * 8) as u64);
                for o in offsets {
                    out.extend_from_slice(&o.to_le_bytes());
                }
                put_buf(out, bytes);
            }
        }
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_buf(out: &mut Vec<u8>, b: &[u8]) {
    put_u64(out, b.len() as u64);
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptPayload(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn buf(&mut self, what: &str) -> Result<&'a [u8]> {
        let n = self.u64(what)?;
        let n =
            usize::try_from(n).map_err(|_| Error::CorruptPayload(format!("{what} too large")))?;
        self.take(n, what)
    }
}

pub fn deserialize_table(bytes: &[u8]) -> Result<Table> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::CorruptPayload("bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::CorruptPayload(format!(
            "unsupported version {version}"
        )));
    }
    let m = r.u32("column count")? as usize;
    let mut fields = Vec::with_capacity(m.min(4096));
    let mut columns = Vec::with_capacity(m.min(4096));
    let mut rows: Option<usize> = None;
    for c in 0..m {
        let tag = r.u8("domain tag")?;
        let domain = Domain::from_tag(tag)
            .ok_or_else(|| Error::CorruptPayload(format!("unknown domain tag {tag}")))?;
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "column name")?)
            .map_err(|_| Error::CorruptPayload("column name is not utf8".into()))?
            .to_string();
        let n = r.u64("row count")? as usize;
        if *rows.get_or_insert(n) != n {
            return Err(Error::CorruptPayload(format!(
                "column {c} row count differs"
            )));
        }
        let validity = Bitmap::from_bytes(r.buf("validity")?.to_vec(), n)
            .ok_or_else(|| Error::CorruptPayload(format!("column {c} validity has wrong size")))?;
        let offsets = r.buf("offsets")?;
        let data = r.buf("data")?;
        let data = match domain {
            Domain::Int64 | Domain::Float64 | Domain::Boolean => {
                let width = domain.width().unwrap();
                if !offsets.is_empty() {
                    return Err(Error::CorruptPayload(format!(
                        "fixed-width column {c} has offsets"
                    )));
                }
                if Some(data.len()) != n.checked_mul(width) {
                    return Err(Error::CorruptPayload(format!(
                        "column {c} data length mismatch"
                    )));
                }
                match domain {
                    Domain::Int64 => ColumnData::Int64(
                        data.chunks_exact(8)
                            .map(|b| i64::from_le_bytes(b.try_into().unwrap()))
                            .collect(),
                    ),
                    Domain::Float64 => ColumnData::Float64(
                        data.chunks_exact(8)
                            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                            .collect(),
                    ),
                    _ => ColumnData::Boolean(data.to_vec()),
                }
            }
            Domain::Utf8 => {
                if Some(offsets.len()) != (n + 1).checked_mul(8) {
                    return Err(Error::CorruptPayload(format!(
                        "column {c} offsets length mismatch"
                    )));
                }
                ColumnData::Utf8 {
                    offsets: offsets
                        .chunks_exact(8)
                        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                        .collect(),
                    bytes: data.to_vec(),
                }
            }
        };
        fields.push(Field::new(name, domain));
        columns.push(Column::from_parts(validity, data)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptPayload(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let schema = Schema::new(fields).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    Table::try_new(schema, columns)
}

/// Stable 64-bit digest of a schema (names and domains, in order).
pub fn schema_digest(schema: &Schema) -> u64 {
    let mut h = mix64(0x5343_4845_4d41 ^ schema.len() as u64);
    for f in schema.fields() {
        h = mix64(h ^ f.domain.tag() as u64);
        for chunk in f.name.as_bytes().chunks(8) {
            let mut w = [0u8; 8];
            w[..chunk.len()].copy_from_slice(chunk);
            h = mix64(h ^ u64::from_le_bytes(w));
        }
        h = mix64(h ^ f.name.len() as u64);
    }
    h
}

pub fn write_file(path: impl AsRef<Path>, t: &Table) -> Result<()> {
    fs::write(path, serialize_table(t))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Table> {
    deserialize_table(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Value;

    fn sample() -> Table {
        let schema = Schema::from_pairs([
            ("i", Domain::Int64),
            ("f", Domain::Float64),
            ("s", Domain::Utf8),
            ("b", Domain::Boolean),
        ])
        .unwrap();
        Table::build(
            schema,
            vec![
                vec![1i64.into(), Value::Null, (-7i64).into()],
                vec![0.5.into(), f64::NAN.into(), Value::Null],
                vec!["héllo".into(), Value::Null, "".into()],
                vec![true.into(), false.into(), Value::Null],
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let back = deserialize_table(&serialize_table(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_round_trip_keeps_schema() {
        let t = sample().slice(0, 0).unwrap();
        let back = deserialize_table(&serialize_table(&t)).unwrap();
        assert_eq!(back.num_rows(), 0);
        assert_eq!(back.schema(), t.schema());
    }

    #[test]
    fn header_layout_is_fixed() {
        let t = Table::build(
            Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
            vec![vec![258i64.into()]],
        )
        .unwrap();
        let b = serialize_table(&t);
        let mut want = Vec::new();
        want.extend_from_slice(b"BSPF");
        want.extend_from_slice(&1u16.to_le_bytes());
        want.extend_from_slice(&1u32.to_le_bytes());
        want.push(0);
        want.extend_from_slice(&1u32.to_le_bytes());
        want.push(b'k');
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.push(1);
        want.extend_from_slice(&0u64.to_le_bytes());
        want.extend_from_slice(&8u64.to_le_bytes());
        want.extend_from_slice(&258i64.to_le_bytes());
        assert_eq!(b, want);
    }

    #[test]
    fn truncation_is_corrupt() {
        let b = serialize_table(&sample());
        for cut in [1, 5, b.len() / 2] {
            let err = deserialize_table(&b[..b.len() - cut]).unwrap_err();
            assert!(matches!(err, Error::CorruptPayload(_)), "cut {cut}: {err}");
        }
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(
            deserialize_table(&extra),
            Err(Error::CorruptPayload(_))
        ));
    }

    #[test]
    fn digest_distinguishes_schemas() {
        let a = Schema::from_pairs([("k", Domain::Int64)]).unwrap();
        let b = Schema::from_pairs([("k", Domain::Float64)]).unwrap();
        let c = Schema::from_pairs([("kk", Domain::Int64)]).unwrap();
        assert_ne!(schema_digest(&a), schema_digest(&b));
        assert_ne!(schema_digest(&a), schema_digest(&c));
        assert_eq!(schema_digest(&a), schema_digest(&a.clone()));
    }
}
