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

//! Reference relational operators over row-major values.

use std::cmp::Ordering;

use bspf_core::{AggKind, Domain, Field, JoinType, Schema, Table, Value};

pub type Row = Vec<Value>;

fn cmp_keyed(a: &Row, b: &Row, keys: &[usize], asc: &[bool]) -> Ordering {
    for (k, &c) in keys.iter().enumerate() {
        let (x, y) = (&a[c], &b[c]);
        let o = match (x.is_null(), y.is_null()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ if asc[k] => x.total_cmp(y),
            _ => y.total_cmp(x),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Insertion sort: stable, quadratic, obviously correct.
pub fn sort_rows(rows: &[Row], keys: &[usize], asc: &[bool]) -> Vec<Row> {
    let mut out: Vec<Row> = Vec::with_capacity(rows.len());
    for r in rows {
        let pos = out
            .iter()
            .rposition(|o| cmp_keyed(o, r, keys, asc) != Ordering::Greater)
            .map_or(0, |p| p + 1);
        out.insert(pos, r.clone());
    }
    out
}

pub fn oracle_sort(t: &Table, keys: &[usize], asc: &[bool]) -> Table {
    let rows = sort_rows(&t.to_rows(), keys, asc);
    from_rows(t.schema().clone(), &rows)
}

/// Rebuild a table from rows.
pub fn from_rows(schema: Schema, rows: &[Row]) -> Table {
    let m = schema.len();
    let columns = (0..m)
        .map(|c| rows.iter().map(|r| r[c].clone()).collect())
        .collect();
    Table::build(schema, columns).unwrap()
}

/// All-columns ascending order, used to compare multisets.
pub fn sorted_rows(t: &Table) -> Vec<Row> {
    let all: Vec<usize> = (0..t.num_columns()).collect();
    sort_rows(&t.to_rows(), &all, &vec![true; all.len()])
}

fn keys_match(l: &Row, lk: &[usize], r: &Row, rk: &[usize]) -> bool {
    lk.iter()
        .zip(rk)
        .all(|(&a, &b)| !l[a].is_null() && !r[b].is_null() && l[a] == r[b])
}

/// Nested-loop join with the same output layout as the hash join: left
/// columns (keys filled from the right for unmatched right rows), then
/// right non-key columns with `_r` added on name clashes.
pub fn oracle_join(left: &Table, right: &Table, lk: &[usize], rk: &[usize], jt: JoinType) -> Table {
    let mut fields: Vec<Field> = left.schema().fields().to_vec();
    let right_keep: Vec<usize> = (0..right.num_columns())
        .filter(|c| !rk.contains(c))
        .collect();
    for &c in &right_keep {
        let f = right.schema().field(c);
        let mut name = f.name.clone();
        while fields.iter().any(|g| g.name == name) {
            name.push_str("_r");
        }
        fields.push(Field::new(name, f.domain));
    }
    let schema = Schema::new(fields).unwrap();
    let lrows = left.to_rows();
    let rrows = right.to_rows();
    let mut out: Vec<Row> = Vec::new();
    let mut right_hit = vec![false; rrows.len()];
    for l in &lrows {
        let mut hit = false;
        for (j, r) in rrows.iter().enumerate() {
            if keys_match(l, lk, r, rk) {
                hit = true;
                right_hit[j] = true;
                let mut row = l.clone();
                row.extend(right_keep.iter().map(|&c| r[c].clone()));
                out.push(row);
            }
        }
        if !hit && matches!(jt, JoinType::Left | JoinType::FullOuter) {
            let mut row = l.clone();
            row.extend(right_keep.iter().map(|_| Value::Null));
            out.push(row);
        }
    }
    if matches!(jt, JoinType::Right | JoinType::FullOuter) {
        for (j, r) in rrows.iter().enumerate() {
            if right_hit[j] {
                continue;
            }
            let mut row = vec![Value::Null; left.num_columns()];
            for (&a, &b) in lk.iter().zip(rk) {
                row[a] = r[b].clone();
            }
            row.extend(right_keep.iter().map(|&c| r[c].clone()));
            out.push(row);
        }
    }
    from_rows(schema, &out)
}

/// Groups in first-occurrence order, found by linear search.
pub fn oracle_groupby(t: &Table, keys: &[usize], aggs: &[(usize, AggKind, String)]) -> Table {
    let rows = t.to_rows();
    let mut group_keys: Vec<Row> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let k: Row = keys.iter().map(|&c| r[c].clone()).collect();
        match group_keys.iter().position(|g| *g == k) {
            Some(g) => members[g].push(i),
            None => {
                group_keys.push(k);
                members.push(vec![i]);
            }
        }
    }
    let mut fields: Vec<Field> = keys.iter().map(|&c| t.schema().field(c).clone()).collect();
    for (c, kind, name) in aggs {
        let d = t.schema().field(*c).domain;
        let domain = match kind {
            AggKind::Count => Domain::Int64,
            AggKind::Mean => Domain::Float64,
            _ => d,
        };
        fields.push(Field::new(name.clone(), domain));
    }
    let mut out = Vec::with_capacity(group_keys.len());
    for (k, idx) in group_keys.into_iter().zip(&members) {
        let mut row = k;
        for (c, kind, _) in aggs {
            let vals: Vec<&Value> = idx
                .iter()
                .map(|&i| &rows[i][*c])
                .filter(|v| !v.is_null())
                .collect();
            row.push(aggregate(&vals, *kind));
        }
        out.push(row);
    }
    from_rows(Schema::new(fields).unwrap(), &out)
}

fn aggregate(vals: &[&Value], kind: AggKind) -> Value {
    if kind == AggKind::Count {
        return Value::Int64(vals.len() as i64);
    }
    if vals.is_empty() {
        return Value::Null;
    }
    match kind {
        AggKind::Min => (*vals.iter().min_by(|a, b| a.total_cmp(b)).unwrap()).clone(),
        AggKind::Max => (*vals.iter().rev().max_by(|a, b| a.total_cmp(b)).unwrap()).clone(),
        AggKind::Sum | AggKind::Mean => {
            let (sum, as_float) = match vals[0] {
                Value::Int64(_) => {
                    let s = vals.iter().fold(0i64, |acc, v| match v {
                        Value::Int64(x) => acc.wrapping_add(*x),
                        _ => acc,
                    });
                    (Value::Int64(s), s as f64)
                }
                _ => {
                    let s: f64 = vals
                        .iter()
                        .map(|v| match v {
                            Value::Float64(x) => *x,
                            _ => 0.0,
                        })
                        .sum();
                    (Value::Float64(s), s)
                }
            };
            if kind == AggKind::Sum {
                sum
            } else {
                Value::Float64(as_float / vals.len() as f64)
            }
        }
        AggKind::Count => unreachable!(),
    }
}
