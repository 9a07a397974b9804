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

//! Distributed operators: local kernels composed with table collectives.
//! Local stages run under [`ExecEnv::compute`], collectives under the
//! communicator's timed sections, so the two never overlap.

use bspf_core::kernels::hash::bucket;
use bspf_core::kernels::sort::merge_sorted;
use bspf_core::kernels::{
    final_combine, hash_keys, local_groupby, local_hash_join, local_sort, partial_aggregate,
    range_partition, select_splitter_candidates,
};
use bspf_core::{AggSpec, JoinType, KeySpec, Table};

use crate::env::ExecEnv;
use crate::error::Result;
use crate::table_comm::{allgather_table, shuffle_parts, shuffle_table};

fn hash_assign(t: &Table, keys: &KeySpec, p: usize) -> Result<Vec<usize>> {
    Ok(hash_keys(t, keys)?
        .into_iter()
        .map(|h| bucket(h, p))
        .collect())
}

fn hash_shuffle(env: &mut ExecEnv<'_>, t: &Table, keys: &KeySpec) -> Result<Table> {
    let p = env.world_size();
    let assign = env.compute(|| hash_assign(t, keys, p))?;
    shuffle_table(env.comm(), t, &assign)
}

/// Hash-shuffles both sides on their keys, then joins locally.
pub fn dist_join(
    env: &mut ExecEnv<'_>,
    left: &Table,
    right: &Table,
    left_keys: &KeySpec,
    right_keys: &KeySpec,
    jt: JoinType,
) -> Result<Table> {
    if env.world_size() == 1 {
        return Ok(env.compute(|| local_hash_join(left, right, left_keys, right_keys, jt))?);
    }
    let l = hash_shuffle(env, left, left_keys)?;
    let r = hash_shuffle(env, right, right_keys)?;
    Ok(env.compute(|| local_hash_join(&l, &r, left_keys, right_keys, jt))?)
}

/// Combine, shuffle, reduce: partial aggregates are shuffled on the group
/// keys and merged.
pub fn dist_groupby(
    env: &mut ExecEnv<'_>,
    t: &Table,
    keys: &KeySpec,
    aggs: &AggSpec,
) -> Result<Table> {
    if env.world_size() == 1 {
        return Ok(env.compute(|| local_groupby(t, keys, aggs))?);
    }
    let partial = env.compute(|| partial_aggregate(t, keys, aggs))?;
    let lead = KeySpec::leading(keys.len());
    let moved = hash_shuffle(env, &partial, &lead)?;
    Ok(env.compute(|| final_combine(&moved, &lead, aggs))?)
}

/// Sorts `candidates` and keeps rows `ceil(i * C / p)` for `i in 1..p`,
/// clamped to the last row. Candidates hold only key columns.
pub fn splitter_select(candidates: &Table, p: usize, ascending: &[bool]) -> Result<Table> {
    let c = candidates.num_rows();
    if p <= 1 || c == 0 {
        return Ok(candidates.slice(0, 0)?);
    }
    let keys = KeySpec::leading(candidates.num_columns());
    let sorted = local_sort(candidates, &keys, ascending)?;
    let idx: Vec<usize> = (1..p).map(|i| (i * c).div_ceil(p).min(c - 1)).collect();
    Ok(sorted.take(&idx)?)
}

/// Sample sort: local sort, regular sampling of `p` candidates per rank,
/// global splitters, range shuffle and a p-way merge of the sorted runs.
pub fn dist_sort(
    env: &mut ExecEnv<'_>,
    t: &Table,
    keys: &KeySpec,
    ascending: &[bool],
) -> Result<Table> {
    let p = env.world_size();
    let sorted = env.compute(|| local_sort(t, keys, ascending))?;
    if p == 1 {
        return Ok(sorted);
    }
    let cand = env.compute(|| select_splitter_candidates(&sorted, keys, p))?;
    let all = allgather_table(env.comm(), &cand)?;
    let assign = env.compute(|| -> Result<Vec<usize>> {
        let splitters = splitter_select(&all, p, ascending)?;
        Ok(range_partition(&sorted, keys, &splitters, ascending)?)
    })?;
    let runs = shuffle_parts(env.comm(), &sorted, &assign)?;
    Ok(env.compute(|| merge_sorted(&runs, keys, ascending))?)
}

/// Applies a local transform. No communication happens here.
pub fn dist_map<F>(env: &mut ExecEnv<'_>, t: &Table, op: F) -> Result<Table>
where
    F: FnOnce(&Table) -> bspf_core::Result<Table>,
{
    Ok(env.compute(|| op(t))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bspf_core::{Column, Domain, Schema};

    #[test]
    fn splitter_indices() {
        let vals: Vec<i64> = (0..16).rev().collect();
        let t = Table::try_new(
            Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
            vec![Column::from_i64(vals)],
        )
        .unwrap();
        let s = splitter_select(&t, 4, &[true]).unwrap();
        assert_eq!(s.column(0).i64_values().unwrap(), &[4, 8, 12]);
        assert_eq!(splitter_select(&t, 1, &[true]).unwrap().num_rows(), 0);
        let s = splitter_select(&t.slice(0, 2).unwrap(), 4, &[true]).unwrap();
        assert_eq!(s.column(0).i64_values().unwrap(), &[15, 15, 15]);
    }
}
