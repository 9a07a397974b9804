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

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::kernels::KeySpec;
use crate::order::{cmp_rows, sort_indices, SortKeys};
use crate::table::Table;

fn check(t: &Table, keys: &KeySpec, ascending: &[bool]) -> Result<()> {
    keys.check(t.schema())?;
    if ascending.len() != keys.len() {
        return Err(Error::InvalidArgument(format!(
            "{} sort directions for {} keys",
            ascending.len(),
            keys.len()
        )));
    }
    Ok(())
}

/// Stable lexicographic sort by `keys`, one direction flag per key. Nulls last.
pub fn local_sort(t: &Table, keys: &KeySpec, ascending: &[bool]) -> Result<Table> {
    check(t, keys, ascending)?;
    let idx = sort_indices(
        t,
        SortKeys {
            columns: keys.columns(),
            ascending,
        },
    );
    t.take(&idx)
}

struct Head<'a> {
    run: usize,
    row: usize,
    runs: &'a [Table],
    keys: &'a [usize],
    ascending: &'a [bool],
}

impl Ord for Head<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest (key, run) pops first.
        cmp_rows(
            &self.runs[self.run],
            self.row,
            self.keys,
            &other.runs[other.run],
            other.row,
            self.keys,
            self.ascending,
        )
        .then(self.run.cmp(&other.run))
        .reverse()
    }
}

impl PartialOrd for Head<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Head<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Head<'_> {}

/// Merge runs that are each sorted by `keys`. Ties resolve by run order,
/// then row order, so the merge is stable.
pub fn merge_sorted(runs: &[Table], keys: &KeySpec, ascending: &[bool]) -> Result<Table> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("merge of zero runs".into()))?;
    for r in runs {
        check(r, keys, ascending)?;
    }
    let nonempty: Vec<Table> = runs.iter().filter(|r| !r.is_empty()).cloned().collect();
    if nonempty.len() <= 1 {
        return Table::concat_with_schema(first.schema_ref().clone(), &nonempty);
    }
    let total: usize = nonempty.iter().map(Table::num_rows).sum();
    let mut offsets = Vec::with_capacity(nonempty.len());
    let mut acc = 0;
    for r in &nonempty {
        offsets.push(acc);
        acc += r.num_rows();
    }
    let mut heap = BinaryHeap::with_capacity(nonempty.len());
    for run in 0..nonempty.len() {
        heap.push(Head {
            run,
            row: 0,
            runs: &nonempty,
            keys: keys.columns(),
            ascending,
        });
    }
    let mut order = Vec::with_capacity(total);
    while let Some(mut h) = heap.pop() {
        order.push(offsets[h.run] + h.row);
        h.row += 1;
        if h.row < nonempty[h.run].num_rows() {
            heap.push(h);
        }
    }
    Table::concat(&nonempty)?.take(&order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Domain, Schema, Value};

    fn tagged(keys: &[i64]) -> Table {
        Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("id", Domain::Int64)]).unwrap(),
            vec![
                keys.iter().map(|&x| x.into()).collect(),
                (0..keys.len() as i64).map(Value::Int64).collect(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ascending_and_descending() {
        let t = tagged(&[3, 1, 2]);
        let asc = local_sort(&t, &KeySpec::single(0), &[true]).unwrap();
        assert_eq!(asc.column(0).i64_values().unwrap(), &[1, 2, 3]);
        let desc = local_sort(&t, &KeySpec::single(0), &[false]).unwrap();
        assert_eq!(desc.column(0).i64_values().unwrap(), &[3, 2, 1]);
    }

    #[test]
    fn stable_on_ties() {
        let t = tagged(&[1, 1, 2, 2, 3]);
        assert_eq!(local_sort(&t, &KeySpec::single(0), &[true]).unwrap(), t);
        let d = local_sort(&tagged(&[2, 1, 2, 1]), &KeySpec::single(0), &[true]).unwrap();
        assert_eq!(d.column(1).i64_values().unwrap(), &[1, 3, 0, 2]);
    }

    #[test]
    fn merge_is_stable_by_run() {
        let a = tagged(&[1, 3, 3]);
        let b = tagged(&[0, 3, 4]);
        let m = merge_sorted(&[a, b], &KeySpec::single(0), &[true]).unwrap();
        assert_eq!(m.column(0).i64_values().unwrap(), &[0, 1, 3, 3, 3, 4]);
        // ties: run 0's two 3s (ids 1,2) before run 1's (id 1)
        assert_eq!(m.column(1).i64_values().unwrap(), &[0, 0, 1, 2, 1, 2]);
    }

    #[test]
    fn direction_count_must_match() {
        assert!(local_sort(&tagged(&[1]), &KeySpec::single(0), &[]).is_err());
    }
}
