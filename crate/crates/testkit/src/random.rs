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

use bspf_core::{Domain, Field, Schema, Table, Value};
use rand::Rng;

/// Shape of randomly generated tables.
#[derive(Clone, Debug)]
pub struct TableGen {
    pub max_rows: usize,
    pub null_prob: f64,
    /// Distinct values per key-ish column; small values force duplicates.
    pub key_range: i64,
}

impl Default for TableGen {
    fn default() -> Self {
        TableGen {
            max_rows: 256,
            null_prob: 0.1,
            key_range: 16,
        }
    }
}

pub fn random_value<R: Rng>(rng: &mut R, domain: Domain, range: i64, null_prob: f64) -> Value {
    if rng.gen_bool(null_prob) {
        return Value::Null;
    }
    match domain {
        Domain::Int64 => Value::Int64(rng.gen_range(-range..range)),
        // Quarter steps keep sums exact under any association.
        Domain::Float64 => Value::Float64(rng.gen_range(-range * 4..range * 4) as f64 / 4.0),
        Domain::Utf8 => {
            let n = rng.gen_range(0..range.clamp(1, 64));
            Value::Utf8(format!("s{}", "é".repeat((n % 3) as usize)) + &n.to_string())
        }
        Domain::Boolean => Value::Boolean(rng.gen()),
    }
}

pub fn random_domain<R: Rng>(rng: &mut R) -> Domain {
    Domain::ALL[rng.gen_range(0..4)]
}

/// Random table with the given domains and `rows` rows.
pub fn random_table_with<R: Rng>(
    rng: &mut R,
    domains: &[Domain],
    rows: usize,
    key_range: i64,
    null_prob: f64,
) -> Table {
    let fields = domains
        .iter()
        .enumerate()
        .map(|(i, d)| Field::new(format!("c{i}"), *d))
        .collect();
    let schema = Schema::new(fields).unwrap();
    let columns = domains
        .iter()
        .map(|d| {
            (0..rows)
                .map(|_| random_value(rng, *d, key_range, null_prob))
                .collect()
        })
        .collect();
    Table::build(schema, columns).unwrap()
}

/// Random table with 1..=4 columns of random domains.
pub fn random_table<R: Rng>(rng: &mut R, gen: &TableGen) -> Table {
    let m = rng.gen_range(1..=4);
    let domains: Vec<Domain> = (0..m).map(|_| random_domain(rng)).collect();
    let rows = rng.gen_range(0..=gen.max_rows);
    random_table_with(rng, &domains, rows, gen.key_range, gen.null_prob)
}

/// Split a table into `parts` contiguous pieces at random cut points.
pub fn random_split<R: Rng>(rng: &mut R, t: &Table, parts: usize) -> Vec<Table> {
    let n = t.num_rows();
    let mut cuts: Vec<usize> = (0..parts.saturating_sub(1))
        .map(|_| rng.gen_range(0..=n))
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        out.push(t.slice(start, c - start).unwrap());
        start = c;
    }
    out
}
