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

//! Seekable synthetic tables. Every cell comes from a fixed position in one
//! ChaCha8 stream, so any row range can be produced independently and shards
//! concatenate to exactly the single-file output.

use bspf_core::{Column, ColumnBuilder, Domain, Schema, Table};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Range of non-key integer columns.
pub const VALUE_RANGE: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub rows: usize,
    /// Fraction of distinct keys; the key column draws from `ceil(c * rows)`
    /// values with replacement.
    pub cardinality: f64,
    pub seed: u64,
    /// Column 0 is the key column.
    #[serde(with = "domain_list")]
    pub columns: Vec<(String, Domain)>,
}

impl GenSpec {
    pub fn new(rows: usize, cardinality: f64, seed: u64) -> Self {
        GenSpec {
            rows,
            cardinality,
            seed,
            columns: vec![("k".into(), Domain::Int64), ("v".into(), Domain::Int64)],
        }
    }

    pub fn with_columns(mut self, columns: &[(&str, Domain)]) -> Self {
        self.columns = columns.iter().map(|(n, d)| (n.to_string(), *d)).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cardinality > 0.0 && self.cardinality <= 1.0) {
            return Err(CliError::Usage(format!(
                "cardinality {} not in (0, 1]",
                self.cardinality
            )));
        }
        if self.columns.is_empty() {
            return Err(CliError::Usage("at least one column".into()));
        }
        Ok(())
    }

    /// Number of distinct key values drawn from.
    pub fn key_space(&self) -> u64 {
        ((self.cardinality * self.rows as f64).ceil() as u64).max(1)
    }

    pub fn schema(&self) -> Result<Schema> {
        Ok(Schema::from_pairs(
            self.columns.iter().map(|(n, d)| (n.clone(), *d)),
        )?)
    }
}

mod domain_list {
    use bspf_core::Domain;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(cols: &[(String, Domain)], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<(&str, String)> = cols
            .iter()
            .map(|(n, d)| (n.as_str(), d.to_string()))
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, Domain)>, D::Error> {
        let v: Vec<(String, String)> = Vec::deserialize(d)?;
        v.into_iter()
            .map(|(n, t)| Ok((n, t.parse::<Domain>().map_err(D::Error::custom)?)))
            .collect()
    }
}

fn bounded(x: u64, m: u64) -> u64 {
    ((x as u128 * m as u128) >> 64) as u64
}

/// Rows `[start, start + len)` of the table described by `spec`.
pub fn generate_rows(spec: &GenSpec, start: usize, len: usize) -> Result<Table> {
    spec.validate()?;
    let schema = spec.schema()?;
    let ncols = spec.columns.len();
    let len = len.min(spec.rows.saturating_sub(start));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_word_pos((start as u128) * (ncols as u128) * 2);
    let m = spec.key_space();
    let mut ints: Vec<Option<Vec<i64>>> = spec
        .columns
        .iter()
        .map(|(_, d)| (*d == Domain::Int64).then(|| Vec::with_capacity(len)))
        .collect();
    let mut others: Vec<Option<ColumnBuilder>> = spec
        .columns
        .iter()
        .map(|(_, d)| (*d != Domain::Int64).then(|| ColumnBuilder::new(*d, len)))
        .collect();
    for _ in 0..len {
        for c in 0..ncols {
            let x = rng.next_u64();
            let range = if c == 0 { m } else { VALUE_RANGE };
            if let Some(v) = ints[c].as_mut() {
                v.push(bounded(x, range) as i64);
                continue;
            }
            let b = others[c].as_mut().unwrap();
            match spec.columns[c].1 {
                Domain::Float64 => b.push_f64((x >> 11) as f64 / (1u64 << 53) as f64),
                Domain::Utf8 => {
                    b.push_value(&bspf_core::Value::Utf8(format!("s{}", bounded(x, range))))?
                }
                Domain::Boolean => b.push_value(&bspf_core::Value::Boolean(x & 1 == 1))?,
                Domain::Int64 => unreachable!(),
            }
        }
    }
    let columns: Vec<Column> = ints
        .into_iter()
        .zip(others)
        .map(|(i, o)| match (i, o) {
            (Some(v), _) => Column::from_i64(v),
            (None, Some(b)) => b.finish(),
            (None, None) => unreachable!(),
        })
        .collect();
    Ok(Table::try_new(schema, columns)?)
}

pub fn generate(spec: &GenSpec) -> Result<Table> {
    generate_rows(spec, 0, spec.rows)
}

/// The `rank`-th of `p` even, contiguous shards.
pub fn generate_shard(spec: &GenSpec, rank: usize, p: usize) -> Result<Table> {
    let (lo, hi) = bspf_runtime::table_comm::chunk_bounds(spec.rows, p)[rank];
    generate_rows(spec, lo, hi - lo)
}

/// Expected number of distinct values after `n` uniform draws from `m`.
pub fn expected_distinct(m: u64, n: u64) -> f64 {
    let m = m as f64;
    m * (1.0 - (1.0 - 1.0 / m).powf(n as f64))
}
