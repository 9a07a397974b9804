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

//! Regular sampling and range partitioning for sample sort.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::kernels::KeySpec;
use crate::order::cmp_rows;
use crate::table::Table;

/// Rows `floor(i * N / count)` for `i in 0..count` of a locally sorted table,
/// projected to the key columns. Returns every row when `N < count`.
pub fn select_splitter_candidates(sorted: &Table, keys: &KeySpec, count: usize) -> Result<Table> {
    keys.check(sorted.schema())?;
    let n = sorted.num_rows();
    let idx: Vec<usize> = if n < count {
        (0..n).collect()
    } else {
        (0..count).map(|i| i * n / count).collect()
    };
    sorted.take(&idx)?.project(keys.columns())
}

/// Destination rank per row: the number of splitters `<=` the row's key,
/// so row goes to `r` iff `splitter[r-1] <= key < splitter[r]`. `splitters`
/// holds only key columns, in key order, sorted the same way as `sorted`.
/// Since nulls order last they land on the last rank.
pub fn range_partition(
    sorted: &Table,
    keys: &KeySpec,
    splitters: &Table,
    ascending: &[bool],
) -> Result<Vec<usize>> {
    keys.check(sorted.schema())?;
    if splitters.num_columns() != keys.len() {
        return Err(Error::SchemaMismatch(format!(
            "splitters have {} columns for {} keys",
            splitters.num_columns(),
            keys.len()
        )));
    }
    for (k, d) in keys.domains(sorted.schema()).enumerate() {
        if splitters.column(k).domain() != d {
            return Err(Error::DomainMismatch(format!(
                "splitter column {k} is not {d}"
            )));
        }
    }
    let split_cols: Vec<usize> = (0..keys.len()).collect();
    let s = splitters.num_rows();
    let mut out = Vec::with_capacity(sorted.num_rows());
    let mut target = 0usize;
    for i in 0..sorted.num_rows() {
        // Input is sorted, so targets only move forward.
        while target < s
            && cmp_rows(
                splitters,
                target,
                &split_cols,
                sorted,
                i,
                keys.columns(),
                ascending,
            ) != Ordering::Greater
        {
            target += 1;
        }
        out.push(target);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Domain, Schema, Value};

    fn keys(v: &[i64]) -> Table {
        Table::build(
            Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
            vec![v.iter().map(|&x| x.into()).collect()],
        )
        .unwrap()
    }

    #[test]
    fn regular_candidates() {
        let t = keys(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let c = select_splitter_candidates(&t, &KeySpec::single(0), 4).unwrap();
        assert_eq!(c.column(0).i64_values().unwrap(), &[0, 2, 4, 6]);
        let small = select_splitter_candidates(&keys(&[4, 9]), &KeySpec::single(0), 4).unwrap();
        assert_eq!(small.num_rows(), 2);
    }

    #[test]
    fn partition_by_splitters() {
        let p = range_partition(&keys(&[1, 9]), &KeySpec::single(0), &keys(&[5]), &[true]).unwrap();
        assert_eq!(p, vec![0, 1]);
        let none =
            range_partition(&keys(&[1, 2, 3]), &KeySpec::single(0), &keys(&[]), &[true]).unwrap();
        assert_eq!(none, vec![0, 0, 0]);
        let eq = range_partition(
            &keys(&[4, 5, 5, 6, 10]),
            &KeySpec::single(0),
            &keys(&[5, 10]),
            &[true],
        )
        .unwrap();
        assert_eq!(eq, vec![0, 1, 1, 1, 2]);
    }

    #[test]
    fn nulls_go_last() {
        let t = Table::build(
            Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
            vec![vec![1i64.into(), Value::Null]],
        )
        .unwrap();
        let p = range_partition(&t, &KeySpec::single(0), &keys(&[0, 5]), &[true]).unwrap();
        assert_eq!(p, vec![1, 2]);
    }
}
