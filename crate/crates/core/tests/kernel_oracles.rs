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

//! Kernels checked against brute-force references on random tables.

use bspf_core::compare::{diff_tables, diff_unordered};
use bspf_core::kernels::hash::bucket;
use bspf_core::kernels::{
    final_combine, hash_keys, local_groupby, local_hash_join, local_sort, partial_aggregate,
    range_partition, select_splitter_candidates,
};
use bspf_core::{canonicalize, AggKind, AggSpec, Domain, JoinType, KeySpec, Table};
use bspf_testkit::oracle::{oracle_groupby, oracle_join, oracle_sort};
use bspf_testkit::random::{random_split, random_table, random_table_with, TableGen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 300;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn numeric_domain(r: &mut ChaCha8Rng) -> Domain {
    if r.gen_bool(0.5) {
        Domain::Int64
    } else {
        Domain::Float64
    }
}

#[test]
fn join_matches_nested_loop() {
    let mut r = rng(1);
    for case in 0..CASES {
        let key_domain = bspf_testkit::random::random_domain(&mut r);
        let rows_l = r.gen_range(0..=64);
        let rows_r = r.gen_range(0..=64);
        let range = r.gen_range(1..12);
        let l = random_table_with(
            &mut r,
            &[key_domain, Domain::Utf8, Domain::Int64],
            rows_l,
            range,
            0.1,
        );
        let rt = random_table_with(&mut r, &[Domain::Float64, key_domain], rows_r, range, 0.1);
        for jt in JoinType::ALL {
            let got =
                local_hash_join(&l, &rt, &KeySpec::single(0), &KeySpec::single(1), jt).unwrap();
            let want = oracle_join(&l, &rt, &[0], &[1], jt);
            // Same deterministic order as the nested loop.
            assert_eq!(diff_tables(&got, &want, 0.0), None, "case {case} {jt}");
        }
    }
}

#[test]
fn two_column_join_matches_nested_loop() {
    let mut r = rng(2);
    for case in 0..CASES / 3 {
        let g0 = r.gen_range(0..40);
        let l = random_table_with(
            &mut r,
            &[Domain::Int64, Domain::Boolean, Domain::Utf8],
            g0,
            4,
            0.1,
        );
        let g0 = r.gen_range(0..40);
        let rt = random_table_with(&mut r, &[Domain::Boolean, Domain::Int64], g0, 4, 0.1);
        let lk = KeySpec::new(vec![0, 1]).unwrap();
        let rk = KeySpec::new(vec![1, 0]).unwrap();
        for jt in JoinType::ALL {
            let got = local_hash_join(&l, &rt, &lk, &rk, jt).unwrap();
            let want = oracle_join(&l, &rt, &[0, 1], &[1, 0], jt);
            assert_eq!(diff_unordered(&got, &want, 0.0), None, "case {case} {jt}");
        }
    }
}

fn all_aggs(value_col: usize, value_domain: Domain) -> (AggSpec, Vec<(usize, AggKind, String)>) {
    let mut spec = AggSpec::default();
    let mut plain = Vec::new();
    for kind in AggKind::ALL {
        if kind != AggKind::Count && !value_domain.is_numeric() {
            continue;
        }
        let name = format!("out_{kind}");
        spec = spec.push(value_col, kind, name.clone());
        plain.push((value_col, kind, name));
    }
    (spec, plain)
}

#[test]
fn groupby_matches_map_reference() {
    let mut r = rng(3);
    for case in 0..CASES {
        let kd = bspf_testkit::random::random_domain(&mut r);
        let vd = numeric_domain(&mut r);
        let g0 = r.gen_range(0..=128);
        let g1 = r.gen_range(1..20);
        let t = random_table_with(&mut r, &[kd, vd], g0, g1, 0.15);
        let (spec, plain) = all_aggs(1, vd);
        let got = local_groupby(&t, &KeySpec::single(0), &spec).unwrap();
        let want = oracle_groupby(&t, &[0], &plain);
        assert_eq!(diff_tables(&got, &want, 1e-12), None, "case {case}");
    }
}

#[test]
fn decomposition_law_over_random_splits() {
    let mut r = rng(4);
    for case in 0..CASES {
        let vd = numeric_domain(&mut r);
        let g0 = r.gen_range(0..=128);
        let g1 = r.gen_range(1..10);
        let t = random_table_with(&mut r, &[Domain::Int64, vd, Domain::Utf8], g0, g1, 0.1);
        let keys = KeySpec::new(vec![0, 2]).unwrap();
        let (spec, _) = all_aggs(1, vd);
        let g0 = r.gen_range(1..6);
        let parts = random_split(&mut r, &t, g0);
        let partials: Vec<Table> = parts
            .iter()
            .map(|p| partial_aggregate(p, &keys, &spec).unwrap())
            .collect();
        let mut merged = Table::concat(&partials).unwrap();
        let mut order: Vec<usize> = (0..merged.num_rows()).collect();
        order.shuffle(&mut r);
        merged = merged.take(&order).unwrap();
        let got = final_combine(&merged, &KeySpec::leading(2), &spec).unwrap();
        let want = local_groupby(&t, &keys, &spec).unwrap();
        assert_eq!(diff_unordered(&got, &want, 1e-12), None, "case {case}");
    }
}

#[test]
fn sort_matches_reference_and_is_stable() {
    let mut r = rng(5);
    for case in 0..CASES {
        let t = random_table(
            &mut r,
            &TableGen {
                max_rows: 128,
                null_prob: 0.1,
                key_range: 6,
            },
        );
        let m = t.num_columns();
        let nkeys = r.gen_range(1..=m);
        let mut cols: Vec<usize> = (0..m).collect();
        cols.shuffle(&mut r);
        cols.truncate(nkeys);
        let asc: Vec<bool> = (0..nkeys).map(|_| r.gen()).collect();
        let got = local_sort(&t, &KeySpec::new(cols.clone()).unwrap(), &asc).unwrap();
        let want = oracle_sort(&t, &cols, &asc);
        assert_eq!(diff_tables(&got, &want, 0.0), None, "case {case}");
    }
}

#[test]
fn canonical_form_is_permutation_invariant() {
    let mut r = rng(6);
    for _ in 0..40 {
        let t = random_table(
            &mut r,
            &TableGen {
                max_rows: 6,
                null_prob: 0.2,
                key_range: 3,
            },
        );
        let base = canonicalize(&t);
        let n = t.num_rows();
        for perm in permutations(n) {
            assert_eq!(canonicalize(&t.take(&perm).unwrap()), base);
        }
        assert_eq!(canonicalize(&base), base);
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn hash_partitions_are_balanced() {
    let mut r = rng(7);
    let t = random_table_with(&mut r, &[Domain::Int64], 10_000, i64::MAX / 2, 0.0);
    let h = hash_keys(&t, &KeySpec::single(0)).unwrap();
    let mut counts = [0usize; 8];
    for x in h {
        counts[bucket(x, 8)] += 1;
    }
    let max = *counts.iter().max().unwrap() as f64 / 10_000.0;
    assert!(max < 0.20, "max bucket fraction {max}");
}

#[test]
fn splitter_candidates_track_quantiles() {
    let mut r = rng(8);
    const RANGE: i64 = 1_000_000;
    let vals: Vec<i64> = (0..10_000).map(|_| r.gen_range(0..RANGE)).collect();
    let t = Table::try_new(
        bspf_core::Schema::from_pairs([("k", Domain::Int64)]).unwrap(),
        vec![bspf_core::Column::from_i64(vals)],
    )
    .unwrap();
    let sorted = local_sort(&t, &KeySpec::single(0), &[true]).unwrap();
    for p in [4usize, 8, 16] {
        let c = select_splitter_candidates(&sorted, &KeySpec::single(0), p).unwrap();
        for (i, v) in c.column(0).i64_values().unwrap().iter().enumerate() {
            let q = i as f64 / p as f64 * RANGE as f64;
            assert!(
                (*v as f64 - q).abs() <= 0.1 * RANGE as f64,
                "p={p} i={i} v={v}"
            );
        }
    }
}

#[test]
fn range_partition_is_monotone() {
    let mut r = rng(9);
    for _ in 0..100 {
        let g0 = r.gen_range(0..100);
        let t = random_table_with(&mut r, &[Domain::Int64, Domain::Utf8], g0, 20, 0.1);
        let asc = [r.gen(), r.gen()];
        let keys = KeySpec::new(vec![0, 1]).unwrap();
        let sorted = local_sort(&t, &keys, &asc).unwrap();
        let p = r.gen_range(1..6);
        let cand = select_splitter_candidates(&sorted, &keys, p - 1).unwrap();
        let target = range_partition(&sorted, &keys, &cand, &asc).unwrap();
        assert!(target.windows(2).all(|w| w[0] <= w[1]));
        assert!(target.iter().all(|&x| x < p));
    }
}

mod props {
    use super::*;
    use bspf_core::ipc::{deserialize_table, serialize_table};
    use proptest::prelude::*;

    fn arb_table() -> impl Strategy<Value = Table> {
        any::<u64>().prop_map(|seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            random_table(
                &mut r,
                &TableGen {
                    max_rows: 40,
                    null_prob: 0.2,
                    key_range: 50,
                },
            )
        })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(t in arb_table()) {
            let back = deserialize_table(&serialize_table(&t)).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn take_identity_and_split_concat(t in arb_table(), cut in 0usize..=40) {
            let n = t.num_rows();
            let ident: Vec<usize> = (0..n).collect();
            prop_assert_eq!(&t.take(&ident).unwrap(), &t);
            let cut = cut.min(n);
            let parts = [t.slice(0, cut).unwrap(), t.slice(cut, n - cut).unwrap()];
            prop_assert_eq!(&Table::concat(&parts).unwrap(), &t);
            t.validate().unwrap();
        }
    }
}
