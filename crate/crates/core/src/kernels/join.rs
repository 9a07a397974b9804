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

//! Hash join of two partitions.
//!
//! Output schema: every left column, then the right non-key columns. Right
//! names that clash get a `_r` suffix. For right rows without a partner the
//! left key columns take the right key values. Null keys never match.
//! Rows come out in left-row order, partners in right-row order, followed
//! by unmatched right rows (Right/FullOuter) in right-row order.

use std::collections::HashMap;
use std::sync::Arc;

use crate::column::{Column, ColumnBuilder};
use crate::error::{Error, Result};
use crate::kernels::hash::{hash_keys, HashBuild};
use crate::kernels::{JoinType, KeySpec};
use crate::table::Table;
use crate::types::{Field, Schema};

const NONE: u32 = u32::MAX;

/// Output schema of a join, see module docs.
pub fn join_schema(left: &Schema, right: &Schema, right_keys: &KeySpec) -> Result<Schema> {
    let mut fields: Vec<Field> = left.fields().to_vec();
    for (j, f) in right.fields().iter().enumerate() {
        if right_keys.columns().contains(&j) {
            continue;
        }
        let mut name = f.name.clone();
        while fields.iter().any(|g| g.name == name) {
            name.push_str("_r");
        }
        fields.push(Field::new(name, f.domain));
    }
    Schema::new(fields)
}

fn check_keys(left: &Table, right: &Table, lk: &KeySpec, rk: &KeySpec) -> Result<()> {
    lk.check(left.schema())?;
    rk.check(right.schema())?;
    if lk.len() != rk.len() {
        return Err(Error::InvalidArgument(format!(
            "{} left keys vs {} right keys",
            lk.len(),
            rk.len()
        )));
    }
    for (a, b) in lk.domains(left.schema()).zip(rk.domains(right.schema())) {
        if a != b {
            return Err(Error::DomainMismatch(format!("join key {a} vs {b}")));
        }
    }
    Ok(())
}

#[inline]
fn has_null_key(t: &Table, keys: &[usize], row: usize) -> bool {
    keys.iter().any(|&c| !t.column(c).is_valid(row))
}

#[inline]
fn keys_equal(l: &Table, i: usize, lk: &[usize], r: &Table, j: usize, rk: &[usize]) -> bool {
    lk.iter()
        .zip(rk)
        .all(|(&a, &b)| l.column(a).cmp_present(i, r.column(b), j).is_eq())
}

pub fn local_hash_join(
    left: &Table,
    right: &Table,
    left_keys: &KeySpec,
    right_keys: &KeySpec,
    join_type: JoinType,
) -> Result<Table> {
    check_keys(left, right, left_keys, right_keys)?;
    let schema = Arc::new(join_schema(left.schema(), right.schema(), right_keys)?);
    let lk = left_keys.columns();
    let rk = right_keys.columns();

    let right_hashes = hash_keys(right, right_keys)?;
    let mut heads: HashMap<u64, u32, HashBuild> =
        HashMap::with_capacity_and_hasher(right.num_rows(), HashBuild::default());
    let mut next = vec![NONE; right.num_rows()];
    for j in (0..right.num_rows()).rev() {
        if has_null_key(right, rk, j) {
            continue;
        }
        let head = heads.entry(right_hashes[j]).or_insert(NONE);
        next[j] = *head;
        *head = j as u32;
    }

    let left_hashes = hash_keys(left, left_keys)?;
    let keep_left = matches!(join_type, JoinType::Left | JoinType::FullOuter);
    let keep_right = matches!(join_type, JoinType::Right | JoinType::FullOuter);
    let mut right_matched = vec![false; if keep_right { right.num_rows() } else { 0 }];
    let mut li: Vec<Option<usize>> = Vec::with_capacity(left.num_rows());
    let mut ri: Vec<Option<usize>> = Vec::with_capacity(left.num_rows());

    for (i, h) in left_hashes.iter().enumerate() {
        let mut matched = false;
        if !has_null_key(left, lk, i) {
            let mut j = heads.get(h).copied().unwrap_or(NONE);
            while j != NONE {
                let ju = j as usize;
                if keys_equal(left, i, lk, right, ju, rk) {
                    li.push(Some(i));
                    ri.push(Some(ju));
                    matched = true;
                    if keep_right {
                        right_matched[ju] = true;
                    }
                }
                j = next[ju];
            }
        }
        if !matched && keep_left {
            li.push(Some(i));
            ri.push(None);
        }
    }
    let mut unmatched_right = false;
    if keep_right {
        for (j, m) in right_matched.iter().enumerate() {
            if !m {
                li.push(None);
                ri.push(Some(j));
                unmatched_right = true;
            }
        }
    }

    let mut columns: Vec<Arc<Column>> = Vec::with_capacity(schema.len());
    for c in 0..left.num_columns() {
        let col = match lk.iter().position(|&k| k == c) {
            Some(pos) if unmatched_right => {
                let src_l = left.column(c);
                let src_r = right.column(rk[pos]);
                let mut b = ColumnBuilder::new(src_l.domain(), li.len());
                for (l, r) in li.iter().zip(&ri) {
                    match (l, r) {
                        (Some(l), _) => b.push_from(src_l, *l),
                        (None, Some(r)) => b.push_from(src_r, *r),
                        (None, None) => b.push_null(),
                    }
                }
                b.finish()
            }
            _ => left.column(c).take_opt(&li)?,
        };
        columns.push(Arc::new(col));
    }
    for c in 0..right.num_columns() {
        if rk.contains(&c) {
            continue;
        }
        columns.push(Arc::new(right.column(c).take_opt(&ri)?));
    }
    Table::from_arcs(schema, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::canonicalize;
    use crate::types::{Domain, Value};

    fn lr() -> (Table, Table) {
        let l = Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("x", Domain::Utf8)]).unwrap(),
            vec![vec![1i64.into(), 2i64.into()], vec!["a".into(), "b".into()]],
        )
        .unwrap();
        let r = Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("y", Domain::Utf8)]).unwrap(),
            vec![vec![2i64.into(), 3i64.into()], vec!["c".into(), "d".into()]],
        )
        .unwrap();
        (l, r)
    }

    #[test]
    fn inner_hand_checked() {
        let (l, r) = lr();
        let out = local_hash_join(
            &l,
            &r,
            &KeySpec::single(0),
            &KeySpec::single(0),
            JoinType::Inner,
        )
        .unwrap();
        assert_eq!(
            out.to_rows(),
            vec![vec![Value::Int64(2), "b".into(), "c".into()]]
        );
        let names: Vec<&str> = out.schema().names().collect();
        assert_eq!(names, ["k", "x", "y"]);
    }

    #[test]
    fn full_outer_coalesces_keys() {
        let (l, r) = lr();
        let out = local_hash_join(
            &l,
            &r,
            &KeySpec::single(0),
            &KeySpec::single(0),
            JoinType::FullOuter,
        )
        .unwrap();
        let rows = canonicalize(&out).to_rows();
        assert_eq!(
            rows,
            vec![
                vec![Value::Int64(1), "a".into(), Value::Null],
                vec![Value::Int64(2), "b".into(), "c".into()],
                vec![Value::Int64(3), Value::Null, "d".into()],
            ]
        );
    }

    #[test]
    fn inner_with_empty_right() {
        let (l, r) = lr();
        let out = local_hash_join(
            &l,
            &r.slice(0, 0).unwrap(),
            &KeySpec::single(0),
            &KeySpec::single(0),
            JoinType::Inner,
        )
        .unwrap();
        assert_eq!(out.num_rows(), 0);
        assert_eq!(out.num_columns(), 3);
    }

    #[test]
    fn name_clash_gets_suffix() {
        let l = Table::build(
            Schema::from_pairs([("k", Domain::Int64), ("v", Domain::Int64)]).unwrap(),
            vec![vec![1i64.into()], vec![10i64.into()]],
        )
        .unwrap();
        let out = local_hash_join(
            &l,
            &l,
            &KeySpec::single(0),
            &KeySpec::single(0),
            JoinType::Inner,
        )
        .unwrap();
        let names: Vec<&str> = out.schema().names().collect();
        assert_eq!(names, ["k", "v", "v_r"]);
    }

    #[test]
    fn null_keys_never_match() {
        let t = Table::build(
            Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
            vec![vec![Value::Null, 1i64.into()]],
        )
        .unwrap();
        let inner = local_hash_join(
            &t,
            &t,
            &KeySpec::single(0),
            &KeySpec::single(0),
            JoinType::Inner,
        )
        .unwrap();
        assert_eq!(inner.num_rows(), 1);
        let full = local_hash_join(
            &t,
            &t,
            &KeySpec::single(0),
            &KeySpec::single(0),
            JoinType::FullOuter,
        )
        .unwrap();
        assert_eq!(full.num_rows(), 3);
    }

    #[test]
    fn key_domain_mismatch() {
        let (l, _) = lr();
        let err = local_hash_join(
            &l,
            &l,
            &KeySpec::single(0),
            &KeySpec::single(1),
            JoinType::Inner,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DomainMismatch(_)));
    }
}
