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

//! Row ordering. Per-domain total order: integers numerically, floats by
//! IEEE `total_cmp`, strings bytewise, `false < true`. Nulls sort after
//! every present value regardless of direction.

use std::cmp::Ordering;

use crate::column::Column;
use crate::table::Table;

/// Sort keys: column indices plus a direction per key.
#[derive(Clone, Copy, Debug)]
pub struct SortKeys<'a> {
    pub columns: &'a [usize],
    pub ascending: &'a [bool],
}

/// Compare row `i` of `a` with row `j` of `b` on the given key columns.
/// `b_columns` names the matching columns of `b`.
#[inline]
pub fn cmp_rows(
    a: &Table,
    i: usize,
    a_columns: &[usize],
    b: &Table,
    j: usize,
    b_columns: &[usize],
    ascending: &[bool],
) -> Ordering {
    for (k, (&ca, &cb)) in a_columns.iter().zip(b_columns).enumerate() {
        let ord = cmp_directed(
            a.column(ca),
            i,
            b.column(cb),
            j,
            ascending.get(k).copied().unwrap_or(true),
        );
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

#[inline]
fn cmp_directed(a: &Column, i: usize, b: &Column, j: usize, asc: bool) -> Ordering {
    match (a.is_valid(i), b.is_valid(j)) {
        (true, true) => {
            let o = a.cmp_present(i, b, j);
            if asc {
                o
            } else {
                o.reverse()
            }
        }
        (false, false) => Ordering::Equal,
        (false, true) => Ordering::Greater,
        (true, false) => Ordering::Less,
    }
}

/// Stable sort permutation of `t` by the given keys.
pub fn sort_indices(t: &Table, keys: SortKeys<'_>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..t.num_rows()).collect();
    if let [c] = keys.columns {
        let col = t.column(*c);
        let asc = keys.ascending.first().copied().unwrap_or(true);
        if let (Some(v), 0) = (col.i64_values(), col.null_count()) {
            if asc {
                idx.sort_by_key(|&i| v[i]);
            } else {
                idx.sort_by_key(|&i| std::cmp::Reverse(v[i]));
            }
            return idx;
        }
    }
    idx.sort_by(|&i, &j| cmp_rows(t, i, keys.columns, t, j, keys.columns, keys.ascending));
    idx
}

/// Sort rows lexicographically over all columns, ascending, nulls last.
/// Two tables holding the same row multiset canonicalize to equal tables.
pub fn canonicalize(t: &Table) -> Table {
    let cols: Vec<usize> = (0..t.num_columns()).collect();
    let asc = vec![true; cols.len()];
    let idx = sort_indices(
        t,
        SortKeys {
            columns: &cols,
            ascending: &asc,
        },
    );
    t.take(&idx).expect("permutation indices are in bounds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Domain, Schema, Value};

    #[test]
    fn canonicalize_sorts_and_is_idempotent() {
        let schema = Schema::from_pairs([("k", Domain::Int64)]).unwrap();
        let t = Table::build(
            schema.clone(),
            vec![vec![3i64.into(), 1i64.into(), 2i64.into()]],
        )
        .unwrap();
        let c = canonicalize(&t);
        let want = Table::build(schema, vec![vec![1i64.into(), 2i64.into(), 3i64.into()]]).unwrap();
        assert_eq!(c, want);
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn nulls_last_in_both_directions() {
        let schema = Schema::from_pairs([("k", Domain::Int64)]).unwrap();
        let t = Table::build(schema, vec![vec![Value::Null, 2i64.into(), 5i64.into()]]).unwrap();
        for asc in [true, false] {
            let idx = sort_indices(
                &t,
                SortKeys {
                    columns: &[0],
                    ascending: &[asc],
                },
            );
            assert_eq!(idx[2], 0);
        }
    }
}
