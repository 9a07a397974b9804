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

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use bspf_comm::Backend;
use bspf_core::{Column, Domain, Schema, Table};
use bspf_runtime::{
    gather_table, store_get, store_put, Executor, ExecutorConfig, RuntimeError, Store,
};
use bspf_testkit::random::{random_split, random_table_with};
use common::{concat, on_parts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ints(v: &[i64]) -> Table {
    Table::try_new(
        Schema::from_pairs([("x", Domain::Int64)]).unwrap(),
        vec![Column::from_i64(v.to_vec())],
    )
    .unwrap()
}

fn stores() -> Vec<(Store, Option<tempfile::TempDir>)> {
    let dir = tempfile::tempdir().unwrap();
    vec![
        (Store::memory(), None),
        (Store::spill(dir.path(), "ns").unwrap(), Some(dir)),
    ]
}

fn exec(p: usize, store: &Store, backend: Backend) -> Executor {
    Executor::start(
        p,
        ExecutorConfig::default()
            .with_backend(backend)
            .with_store(store.clone()),
    )
    .unwrap()
}

fn put(ex: &Executor, name: &'static str, parts: Vec<Table>) {
    on_parts(ex, parts, move |env, t| store_put(env, name, t));
}

fn get(ex: &Executor, name: &'static str) -> Vec<Table> {
    ex.run(move |env| store_get(env, name, Duration::from_secs(10)))
        .wait()
        .unwrap()
}

#[test]
fn put_get_overwrite_list_drop() {
    for (store, _dir) in stores() {
        let ex = exec(2, &store, Backend::InProcess);
        put(&ex, "aux", vec![ints(&[1, 2, 3]), ints(&[4])]);
        let e = store.fetch("aux", Duration::ZERO).unwrap();
        assert_eq!(e.world_size(), 2);
        assert_eq!(get(&ex, "aux"), vec![ints(&[1, 2, 3]), ints(&[4])]);

        put(&ex, "aux", vec![ints(&[9]), ints(&[])]);
        assert_eq!(
            store
                .fetch("aux", Duration::ZERO)
                .unwrap()
                .gathered()
                .unwrap(),
            ints(&[9])
        );
        put(&ex, "other", vec![ints(&[]), ints(&[])]);
        assert_eq!(
            store.list().unwrap(),
            vec!["aux".to_string(), "other".to_string()]
        );
        store.drop_entry("aux").unwrap();
        store.drop_entry("aux").unwrap();
        assert_eq!(store.list().unwrap(), vec!["other".to_string()]);
        assert!(matches!(
            store.fetch("aux", Duration::from_millis(50)),
            Err(RuntimeError::Timeout(..))
        ));
    }
}

#[test]
fn mismatched_schemas_leave_no_entry() {
    for (store, _dir) in stores() {
        let ex = exec(2, &store, Backend::InProcess);
        let e = ex
            .run(|env| {
                let t = if env.rank() == 0 {
                    ints(&[1])
                } else {
                    Table::try_new(
                        Schema::from_pairs([("y", Domain::Int64)]).unwrap(),
                        vec![Column::from_i64(vec![2])],
                    )
                    .unwrap()
                };
                store_put(env, "bad", &t)
            })
            .wait()
            .unwrap_err();
        assert!(matches!(e.root(), RuntimeError::SchemaMismatch(_)), "{e}");
        assert!(store.list().unwrap().is_empty());
    }
}

#[test]
fn consumer_parallelism_may_differ() {
    for (store, _dir) in stores() {
        let producer = exec(2, &store, Backend::InProcess);
        put(&producer, "four", vec![ints(&[1, 2, 3]), ints(&[4])]);
        let consumer = exec(4, &store, Backend::InProcess);
        assert_eq!(
            get(&consumer, "four"),
            vec![ints(&[1]), ints(&[2]), ints(&[3]), ints(&[4])]
        );

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for round in 0..4 {
            let rows = rng.gen_range(0..80);
            let t = random_table_with(&mut rng, &[Domain::Int64, Domain::Utf8], rows, 20, 0.1);
            let parts = random_split(&mut rng, &t, 2);
            put(&producer, "rnd", parts.clone());
            for q in [1usize, 2, 4] {
                let consumer = exec(
                    q,
                    &store,
                    if round % 2 == 0 {
                        Backend::InProcess
                    } else {
                        Backend::Tcp
                    },
                );
                let got = consumer
                    .run(|env| {
                        let mine = store_get(env, "rnd", Duration::from_secs(5))?;
                        gather_table(env.comm(), &mine, 0)
                    })
                    .wait()
                    .unwrap();
                assert_eq!(got[0], t, "q={q}");
                if q == 2 {
                    assert_eq!(get(&consumer, "rnd"), parts);
                }
            }
        }
    }
}

#[test]
fn get_blocks_until_a_concurrent_put() {
    for (store, _dir) in stores() {
        let producer = exec(2, &store, Backend::InProcess);
        let consumer = exec(3, &store, Backend::InProcess);
        let t0 = Instant::now();
        let pending = consumer.run(|env| {
            let mine = store_get(env, "late", Duration::from_secs(20))?;
            gather_table(env.comm(), &mine, 0)
        });
        std::thread::sleep(Duration::from_secs(1));
        assert!(!pending.is_done());
        let parts = Arc::new(vec![ints(&[5, 6]), ints(&[7])]);
        producer
            .run(move |env| store_put(env, "late", &parts[env.rank()]))
            .wait()
            .unwrap();
        let got = pending.wait().unwrap();
        assert!(t0.elapsed() >= Duration::from_secs(1));
        assert_eq!(got[0], concat(&[ints(&[5, 6]), ints(&[7])]));
    }
}

#[test]
fn names_are_validated() {
    let s = Store::memory();
    assert!(s.drop_entry("../x").is_err());
    assert!(s.fetch("", Duration::ZERO).is_err());
}
