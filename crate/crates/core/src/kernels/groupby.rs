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

//! Hash group-by with decomposable aggregates.
//!
//! `local_groupby` aggregates raw rows. `partial_aggregate` emits an
//! intermediate table (keys first, then one column per aggregate, two for
//! `Mean`: running sum and count) which `final_combine` merges after a
//! shuffle. Null values are skipped; a group with no values yields null
//! for Sum/Min/Max/Mean and 0 for Count. Null keys form their own group.
//! Output groups appear in first-occurrence order.

use std::collections::HashMap;
use std::sync::Arc;

use crate::column::{Column, ColumnBuilder};
use crate::error::{Error, Result};
use crate::kernels::hash::{hash_keys, HashBuild};
use crate::kernels::{AggKind, AggSpec, KeySpec};
use crate::table::Table;
use crate::types::{Domain, Field, Schema};

const NONE: u32 = u32::MAX;

/// Dense group ids in first-occurrence order.
struct Groups {
    ids: Vec<u32>,
    first_rows: Vec<usize>,
}

fn assign_groups(t: &Table, keys: &KeySpec) -> Result<Groups> {
    let hashes = hash_keys(t, keys)?;
    let kc = keys.columns();
    let mut heads: HashMap<u64, u32, HashBuild> = HashMap::with_hasher(HashBuild::default());
    let mut next: Vec<u32> = Vec::new();
    let mut first_rows: Vec<usize> = Vec::new();
    let mut ids = Vec::with_capacity(t.num_rows());
    for (i, &h) in hashes.iter().enumerate() {
        let head = heads.entry(h).or_insert(NONE);
        let mut g = *head;
        while g != NONE {
            let r = first_rows[g as usize];
            if kc.iter().all(|&c| t.column(c).eq_at(i, t.column(c), r)) {
                break;
            }
            g = next[g as usize];
        }
        if g == NONE {
            g = first_rows.len() as u32;
            first_rows.push(i);
            next.push(*head);
            *head = g;
        }
        ids.push(g);
    }
    Ok(Groups { ids, first_rows })
}

/// Running state of one aggregate over all groups.
struct Acc {
    kind: AggKind,
    domain: Domain,
    ival: Vec<i64>,
    fval: Vec<f64>,
    has: Vec<bool>,
    cnt: Vec<i64>,
}

impl Acc {
    fn new(kind: AggKind, domain: Domain, groups: usize) -> Self {
        let (ni, nf) = match domain {
            Domain::Int64 => (groups, 0),
            Domain::Float64 => (0, groups),
            _ => (0, 0),
        };
        Acc {
            kind,
            domain,
            ival: vec![0; ni],
            fval: vec![0.0; nf],
            has: vec![false; groups],
            cnt: vec![0; groups],
        }
    }

    #[inline]
    fn add_i(&mut self, g: usize, x: i64) {
        let cur = &mut self.ival[g];
        if !self.has[g] {
            *cur = x;
            self.has[g] = true;
            return;
        }
        match self.kind {
            AggKind::Sum | AggKind::Mean => *cur = cur.wrapping_add(x),
            AggKind::Min => *cur = (*cur).min(x),
            AggKind::Max => *cur = (*cur).max(x),
            AggKind::Count => {}
        }
    }

    #[inline]
    fn add_f(&mut self, g: usize, x: f64) {
        let cur = &mut self.fval[g];
        if !self.has[g] {
            *cur = x;
            self.has[g] = true;
            return;
        }
        match self.kind {
            AggKind::Sum | AggKind::Mean => *cur += x,
            AggKind::Min => {
                if x.total_cmp(cur).is_lt() {
                    *cur = x
                }
            }
            AggKind::Max => {
                if x.total_cmp(cur).is_gt() {
                    *cur = x
                }
            }
            AggKind::Count => {}
        }
    }

    /// Fold raw values of `col`.
    fn update_raw(&mut self, col: &Column, ids: &[u32]) {
        for (i, &g) in ids.iter().enumerate() {
            if !col.is_valid(i) {
                continue;
            }
            let g = g as usize;
            self.cnt[g] += 1;
            if self.kind == AggKind::Count {
                continue;
            }
            match self.domain {
                Domain::Int64 => self.add_i(g, col.i64_values().unwrap()[i]),
                Domain::Float64 => self.add_f(g, col.f64_values().unwrap()[i]),
                _ => {}
            }
        }
    }

    /// Fold partial state: `value` is the sum/min/max column, `count` the count column.
    fn update_partial(&mut self, value: Option<&Column>, count: Option<&Column>, ids: &[u32]) {
        for (i, &g) in ids.iter().enumerate() {
            let g = g as usize;
            if let Some(c) = count {
                if c.is_valid(i) {
                    self.cnt[g] += c.i64_values().unwrap()[i];
                }
            }
            if let Some(v) = value {
                if !v.is_valid(i) {
                    continue;
                }
                match self.domain {
                    Domain::Int64 => self.add_i(g, v.i64_values().unwrap()[i]),
                    Domain::Float64 => self.add_f(g, v.f64_values().unwrap()[i]),
                    _ => {}
                }
            }
        }
    }

    fn value_column(&self) -> Column {
        let n = self.has.len();
        let mut b = ColumnBuilder::new(self.domain, n);
        for g in 0..n {
            if !self.has[g] {
                b.push_null();
            } else if self.domain == Domain::Int64 {
                b.push_i64(self.ival[g]);
            } else {
                b.push_f64(self.fval[g]);
            }
        }
        b.finish()
    }

    fn count_column(&self) -> Column {
        Column::from_i64(self.cnt.clone())
    }

    fn mean_column(&self) -> Column {
        let n = self.has.len();
        let mut b = ColumnBuilder::new(Domain::Float64, n);
        for g in 0..n {
            if self.cnt[g] == 0 || !self.has[g] {
                b.push_null();
                continue;
            }
            let sum = if self.domain == Domain::Int64 {
                self.ival[g] as f64
            } else {
                self.fval[g]
            };
            b.push_f64(sum / self.cnt[g] as f64);
        }
        b.finish()
    }
}

fn key_fields(t: &Table, keys: &KeySpec) -> Vec<Field> {
    keys.columns()
        .iter()
        .map(|&c| t.schema().field(c).clone())
        .collect()
}

fn key_columns(t: &Table, keys: &KeySpec, groups: &Groups) -> Result<Vec<Arc<Column>>> {
    keys.columns()
        .iter()
        .map(|&c| t.column(c).take(&groups.first_rows).map(Arc::new))
        .collect()
}

fn final_fields(fields: &mut Vec<Field>, aggs: &AggSpec, domains: &[Domain]) {
    for (a, d) in aggs.aggregates().iter().zip(domains) {
        let domain = match a.kind {
            AggKind::Count => Domain::Int64,
            AggKind::Mean => Domain::Float64,
            _ => *d,
        };
        fields.push(Field::new(a.output.clone(), domain));
    }
}

fn final_columns(columns: &mut Vec<Arc<Column>>, accs: &[Acc]) {
    for acc in accs {
        columns.push(Arc::new(match acc.kind {
            AggKind::Count => acc.count_column(),
            AggKind::Mean => acc.mean_column(),
            _ => acc.value_column(),
        }));
    }
}

fn check_keys_and_aggs(t: &Table, keys: &KeySpec, aggs: &AggSpec) -> Result<Vec<Domain>> {
    keys.check(t.schema())?;
    aggs.check(t.schema())?;
    Ok(aggs
        .aggregates()
        .iter()
        .map(|a| t.schema().field(a.column).domain)
        .collect())
}

fn raw_accumulators(t: &Table, aggs: &AggSpec, domains: &[Domain], groups: &Groups) -> Vec<Acc> {
    aggs.aggregates()
        .iter()
        .zip(domains)
        .map(|(a, d)| {
            let mut acc = Acc::new(a.kind, *d, groups.first_rows.len());
            acc.update_raw(t.column(a.column), &groups.ids);
            acc
        })
        .collect()
}

/// One output row per distinct key tuple: key columns, then one column per aggregate.
pub fn local_groupby(t: &Table, keys: &KeySpec, aggs: &AggSpec) -> Result<Table> {
    let domains = check_keys_and_aggs(t, keys, aggs)?;
    let groups = assign_groups(t, keys)?;
    let accs = raw_accumulators(t, aggs, &domains, &groups);
    let mut fields = key_fields(t, keys);
    final_fields(&mut fields, aggs, &domains);
    let mut columns = key_columns(t, keys, &groups)?;
    final_columns(&mut columns, &accs);
    Table::from_arcs(Arc::new(Schema::new(fields)?), columns)
}

/// Intermediate names for `Mean`'s sum and count columns.
pub fn mean_part_names(output: &str) -> (String, String) {
    (format!("{output}__sum"), format!("{output}__count"))
}

/// Per-partition pre-aggregation whose output `final_combine` can merge.
pub fn partial_aggregate(t: &Table, keys: &KeySpec, aggs: &AggSpec) -> Result<Table> {
    let domains = check_keys_and_aggs(t, keys, aggs)?;
    let groups = assign_groups(t, keys)?;
    let accs = raw_accumulators(t, aggs, &domains, &groups);
    let mut fields = key_fields(t, keys);
    let mut columns = key_columns(t, keys, &groups)?;
    for ((a, d), acc) in aggs.aggregates().iter().zip(&domains).zip(&accs) {
        match a.kind {
            AggKind::Count => {
                fields.push(Field::new(a.output.clone(), Domain::Int64));
                columns.push(Arc::new(acc.count_column()));
            }
            AggKind::Mean => {
                let (s, c) = mean_part_names(&a.output);
                fields.push(Field::new(s, *d));
                fields.push(Field::new(c, Domain::Int64));
                columns.push(Arc::new(acc.value_column()));
                columns.push(Arc::new(acc.count_column()));
            }
            _ => {
                fields.push(Field::new(a.output.clone(), *d));
                columns.push(Arc::new(acc.value_column()));
            }
        }
    }
    Table::from_arcs(Arc::new(Schema::new(fields)?), columns)
}

/// Merge partial aggregates. `keys` must be the leading columns of `partial`
/// and `aggs` the `AggSpec` that produced it.
pub fn final_combine(partial: &Table, keys: &KeySpec, aggs: &AggSpec) -> Result<Table> {
    let k = keys.len();
    if keys.columns().iter().enumerate().any(|(i, &c)| i != c) {
        return Err(Error::InvalidArgument(
            "partial keys must be the leading columns".into(),
        ));
    }
    let expected = k + aggs
        .aggregates()
        .iter()
        .map(|a| if a.kind == AggKind::Mean { 2 } else { 1 })
        .sum::<usize>();
    if partial.num_columns() != expected {
        return Err(Error::SchemaMismatch(format!(
            "partial table has {} columns, aggregate layout needs {expected}",
            partial.num_columns()
        )));
    }
    let groups = assign_groups(partial, keys)?;
    let ng = groups.first_rows.len();
    let mut fields = key_fields(partial, keys);
    let mut columns = key_columns(partial, keys, &groups)?;
    let mut pos = k;
    let mut accs = Vec::with_capacity(aggs.len());
    let mut domains = Vec::with_capacity(aggs.len());
    for a in aggs.aggregates() {
        let col = partial.column(pos);
        let acc = match a.kind {
            AggKind::Count => {
                if col.domain() != Domain::Int64 {
                    return Err(Error::DomainMismatch("partial count must be int64".into()));
                }
                let mut acc = Acc::new(a.kind, Domain::Int64, ng);
                acc.update_partial(None, Some(col), &groups.ids);
                pos += 1;
                acc
            }
            AggKind::Mean => {
                let cnt = partial.column(pos + 1);
                if !col.domain().is_numeric() || cnt.domain() != Domain::Int64 {
                    return Err(Error::DomainMismatch("bad partial mean layout".into()));
                }
                let mut acc = Acc::new(a.kind, col.domain(), ng);
                acc.update_partial(Some(col), Some(cnt), &groups.ids);
                pos += 2;
                acc
            }
            _ => {
                if !col.domain().is_numeric() {
                    return Err(Error::DomainMismatch(format!(
                        "partial {} must be numeric",
                        a.kind
                    )));
                }
                let mut acc = Acc::new(a.kind, col.domain(), ng);
                acc.update_partial(Some(col), None, &groups.ids);
                pos += 1;
                acc
            }
        };
        domains.push(acc.domain);
        accs.push(acc);
    }
    final_fields(&mut fields, aggs, &domains);
    final_columns(&mut columns, &accs);
    Table::from_arcs(Arc::new(Schema::new(fields)?), columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Value;

    fn kv(keys: &[i64], vals: &[i64]) -> Table {
        Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("v", Domain::Int64)]).unwrap(),
            vec![
                keys.iter().map(|&x| x.into()).collect(),
                vals.iter().map(|&x| x.into()).collect(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn sum_hand_checked() {
        let t = kv(&[1, 1, 2], &[3, 4, 5]);
        let out = local_groupby(
            &t,
            &KeySpec::single(0),
            &AggSpec::default().push(1, AggKind::Sum, "s"),
        )
        .unwrap();
        assert_eq!(
            out.to_rows(),
            vec![
                vec![Value::Int64(1), Value::Int64(7)],
                vec![Value::Int64(2), Value::Int64(5)]
            ]
        );
    }

    #[test]
    fn distinct_keys_count_one() {
        let t = kv(&[5, 3, 9], &[0, 0, 0]);
        let out = local_groupby(
            &t,
            &KeySpec::single(0),
            &AggSpec::default().push(1, AggKind::Count, "c"),
        )
        .unwrap();
        assert!(out.column(1).i64_values().unwrap().iter().all(|&c| c == 1));
        assert_eq!(out.column(0).i64_values().unwrap(), &[5, 3, 9]);
    }

    #[test]
    fn mean_over_partials() {
        let aggs = AggSpec::default().push(1, AggKind::Mean, "m");
        let a = partial_aggregate(&kv(&[0, 0], &[1, 2]), &KeySpec::single(0), &aggs).unwrap();
        let b = partial_aggregate(&kv(&[0], &[3]), &KeySpec::single(0), &aggs).unwrap();
        let out =
            final_combine(&Table::concat(&[a, b]).unwrap(), &KeySpec::single(0), &aggs).unwrap();
        assert_eq!(out.column(1).value(0), Value::Float64(2.0));
    }

    #[test]
    fn single_partition_composition() {
        let t = kv(&[1, 2, 1, 3, 2], &[5, -1, 7, 0, 4]);
        let mut aggs = AggSpec::default();
        for (i, kind) in AggKind::ALL.into_iter().enumerate() {
            aggs = aggs.push(1, kind, format!("a{i}"));
        }
        let direct = local_groupby(&t, &KeySpec::single(0), &aggs).unwrap();
        let partial = partial_aggregate(&t, &KeySpec::single(0), &aggs).unwrap();
        let combined = final_combine(&partial, &KeySpec::single(0), &aggs).unwrap();
        assert_eq!(combined, direct);
    }

    #[test]
    fn null_key_is_a_group_and_null_values_skip() {
        let t = Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("v", Domain::Float64)]).unwrap(),
            vec![
                vec![Value::Null, 1i64.into(), Value::Null],
                vec![Value::Null, 2.0.into(), 4.0.into()],
            ],
        )
        .unwrap();
        let aggs = AggSpec::default()
            .push(1, AggKind::Sum, "s")
            .push(1, AggKind::Count, "c");
        let out = local_groupby(&t, &KeySpec::single(0), &aggs).unwrap();
        assert_eq!(out.num_rows(), 2);
        assert_eq!(
            out.row(0).unwrap().values(),
            vec![Value::Null, 4.0.into(), 1i64.into()]
        );
    }

    #[test]
    fn non_numeric_sum_rejected() {
        let t = Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("s", Domain::Utf8)]).unwrap(),
            vec![vec![1i64.into()], vec!["x".into()]],
        )
        .unwrap();
        let err = local_groupby(
            &t,
            &KeySpec::single(0),
            &AggSpec::default().push(1, AggKind::Max, "m"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DomainMismatch(_)));
        assert!(local_groupby(
            &t,
            &KeySpec::single(0),
            &AggSpec::default().push(1, AggKind::Count, "c")
        )
        .is_ok());
    }
}
