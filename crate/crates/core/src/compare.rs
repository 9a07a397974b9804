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

//! Table comparison helpers used by verification.

use std::fmt;

use crate::column::Column;
use crate::order::{canonicalize, cmp_rows};
use crate::table::Table;
use crate::types::{Domain, Value};

/// First point where two tables differ.
#[derive(Clone, Debug, PartialEq)]
pub enum Mismatch {
    Schema {
        left: String,
        right: String,
    },
    RowCount {
        left: usize,
        right: usize,
    },
    Row {
        index: usize,
        left: Vec<Value>,
        right: Vec<Value>,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &[Value]| {
            r.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Mismatch::Schema { left, right } => write!(f, "schema differs: {left} vs {right}"),
            Mismatch::RowCount { left, right } => write!(f, "row count differs: {left} vs {right}"),
            Mismatch::Row { index, left, right } => {
                write!(
                    f,
                    "row {index} differs: ({}) vs ({})",
                    show(left),
                    show(right)
                )
            }
        }
    }
}

fn cell_eq(a: &Column, i: usize, b: &Column, j: usize, rel_tol: f64) -> bool {
    if a.domain() == Domain::Float64 && rel_tol > 0.0 && a.is_valid(i) && b.is_valid(j) {
        let x = a.f64_values().unwrap()[i];
        let y = b.f64_values().unwrap()[j];
        if x == y || (x.is_nan() && y.is_nan()) {
            return true;
        }
        let scale = x.abs().max(y.abs());
        return (x - y).abs() <= rel_tol * scale;
    }
    a.eq_at(i, b, j)
}

/// Compare row by row. Float64 cells may differ by `rel_tol` relative.
pub fn diff_tables(left: &Table, right: &Table, rel_tol: f64) -> Option<Mismatch> {
    if left.schema() != right.schema() {
        return Some(Mismatch::Schema {
            left: left.schema().to_string(),
            right: right.schema().to_string(),
        });
    }
    if left.num_rows() != right.num_rows() {
        return Some(Mismatch::RowCount {
            left: left.num_rows(),
            right: right.num_rows(),
        });
    }
    for i in 0..left.num_rows() {
        let same = left
            .columns()
            .iter()
            .zip(right.columns())
            .all(|(a, b)| cell_eq(a, i, b, i, rel_tol));
        if !same {
            return Some(Mismatch::Row {
                index: i,
                left: left.row(i).unwrap().values(),
                right: right.row(i).unwrap().values(),
            });
        }
    }
    None
}

/// Compare as row multisets (both sides canonicalized first).
pub fn diff_unordered(left: &Table, right: &Table, rel_tol: f64) -> Option<Mismatch> {
    diff_tables(&canonicalize(left), &canonicalize(right), rel_tol)
}

/// Compare two tables sorted by `keys`: key columns must match row for row,
/// and each block of tied keys must hold the same row multiset.
pub fn diff_sorted(
    left: &Table,
    right: &Table,
    keys: &[usize],
    ascending: &[bool],
) -> Option<Mismatch> {
    if let Some(m) = diff_tables(&left.project(keys).ok()?, &right.project(keys).ok()?, 0.0) {
        return Some(m);
    }
    if left.schema() != right.schema() {
        return Some(Mismatch::Schema {
            left: left.schema().to_string(),
            right: right.schema().to_string(),
        });
    }
    let n = left.num_rows();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cmp_rows(left, start, keys, left, end, keys, ascending).is_eq() {
            end += 1;
        }
        if end - start == 1 {
            if let Some(Mismatch::Row { left, right, .. }) = diff_tables(
                &left.slice(start, 1).ok()?,
                &right.slice(start, 1).ok()?,
                0.0,
            ) {
                return Some(Mismatch::Row {
                    index: start,
                    left,
                    right,
                });
            }
        } else if let Some(m) = diff_unordered(
            &left.slice(start, end - start).ok()?,
            &right.slice(start, end - start).ok()?,
            0.0,
        ) {
            return Some(match m {
                Mismatch::Row { index, left, right } => Mismatch::Row {
                    index: start + index,
                    left,
                    right,
                },
                other => other,
            });
        }
        start = end;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Schema;

    fn t(k: &[i64], v: &[f64]) -> Table {
        Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("v", Domain::Float64)]).unwrap(),
            vec![
                k.iter().map(|&x| x.into()).collect(),
                v.iter().map(|&x| x.into()).collect(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn tolerance_applies_to_floats_only() {
        let a = t(&[1], &[1.0]);
        let b = t(&[1], &[1.0 + 1e-14]);
        assert!(diff_tables(&a, &b, 0.0).is_some());
        assert!(diff_tables(&a, &b, 1e-12).is_none());
        assert!(diff_tables(&a, &t(&[2], &[1.0]), 1e-12).is_some());
    }

    #[test]
    fn tie_blocks_compare_as_multisets() {
        let a = t(&[1, 2, 2, 3], &[0.0, 1.0, 2.0, 3.0]);
        let b = t(&[1, 2, 2, 3], &[0.0, 2.0, 1.0, 3.0]);
        assert!(diff_sorted(&a, &b, &[0], &[true]).is_none());
        let c = t(&[1, 2, 2, 3], &[0.0, 2.0, 2.0, 3.0]);
        assert!(matches!(
            diff_sorted(&a, &c, &[0], &[true]),
            Some(Mismatch::Row { .. })
        ));
    }
}
