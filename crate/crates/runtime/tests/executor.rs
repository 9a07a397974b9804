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

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use bspf_comm::{Backend, CommError, ReduceOp};
use bspf_core::csv_io::read_csv_file;
use bspf_runtime::{Executor, ExecutorConfig, ExecutorState, RuntimeError};
use common::{executor, BACKENDS};

#[test]
fn start_and_ranks() {
    for b in BACKENDS {
        let ex = executor(1, b);
        assert_eq!(ex.state(), ExecutorState::Ready);
        assert_eq!(ex.run(|env| Ok(env.rank())).wait().unwrap(), vec![0]);
        let ex = executor(4, b);
        assert_eq!(
            ex.run(|env| Ok((env.rank(), env.world_size())))
                .wait()
                .unwrap(),
            vec![(0, 4), (1, 4), (2, 4), (3, 4)]
        );
        assert_eq!(ex.run(|_| Ok(())).wait().unwrap().len(), 4);
        let sums = ex
            .run(|env| {
                let r = env.rank() as i64;
                Ok(env.comm().allreduce_i64(r, ReduceOp::Sum)?)
            })
            .wait()
            .unwrap();
        assert_eq!(sums, vec![6; 4]);
    }
}

#[test]
fn second_start_on_same_namespace_is_rejected() {
    for b in BACKENDS {
        let first = executor(2, b);
        let mut cfg = ExecutorConfig::default()
            .with_backend(b)
            .with_namespace(first.namespace());
        cfg.rendezvous = first.rendezvous().map(str::to_string);
        cfg.timeout = Duration::from_millis(500);
        let e = Executor::start(2, cfg)
            .err()
            .expect("second start must fail");
        assert!(
            matches!(e, RuntimeError::Comm(CommError::DuplicateRank { .. })),
            "{e}"
        );
        assert_eq!(first.run(|env| Ok(env.rank())).wait().unwrap(), vec![0, 1]);
    }
}

fn wait_running(ex: &Executor) {
    let t0 = std::time::Instant::now();
    while ex.state() != ExecutorState::Running {
        assert!(t0.elapsed() < Duration::from_secs(10));
        std::thread::sleep(Duration::from_millis(1));
    }
}

struct Counter {
    count: usize,
}

#[test]
fn executable_state_persists_and_communicator_is_reused() {
    for b in BACKENDS {
        let ex = executor(3, b);
        assert!(matches!(
            ex.execute(|c: &mut Counter, _| Ok(c.count)).wait(),
            Err(RuntimeError::NoExecutable)
        ));
        ex.start_executable(|_| Ok(Counter { count: 0 })).unwrap();
        let mut ids = Vec::new();
        for k in 1..=3 {
            let out = ex
                .execute(|c: &mut Counter, env| {
                    c.count += 1;
                    env.comm().barrier()?;
                    Ok((c.count, env.comm_id()))
                })
                .wait()
                .unwrap();
            assert!(out.iter().all(|(c, _)| *c == k));
            ids.push(out.iter().map(|(_, id)| *id).collect::<Vec<_>>());
        }
        assert!(ids.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(ex.init_count(), 3);
        assert!(matches!(
            ex.execute(|c: &mut String, _| Ok(c.len())).wait(),
            Err(RuntimeError::ExecutableType)
        ));

        ex.start_executable(|_| Ok(Counter { count: 100 })).unwrap();
        let out = ex.execute(|c: &mut Counter, _| Ok(c.count)).wait().unwrap();
        assert_eq!(out, vec![100; 3]);
        let mixed = ex.run(|env| Ok(env.rank())).wait().unwrap();
        assert_eq!(mixed, vec![0, 1, 2]);
        assert_eq!(
            ex.execute(|c: &mut Counter, _| Ok(c.count)).wait().unwrap(),
            vec![100; 3]
        );
    }
}

#[test]
fn constructor_failure_names_the_rank() {
    let ex = executor(3, Backend::InProcess);
    let e = ex
        .start_executable(|env| {
            if env.rank() == 1 {
                Err(RuntimeError::User("boom".into()))
            } else {
                Ok(Counter { count: 0 })
            }
        })
        .unwrap_err();
    assert!(
        matches!(e, RuntimeError::Construction { rank: 1, .. }),
        "{e}"
    );
}

#[test]
fn rank_failure_is_reported_and_handle_recovers() {
    for b in BACKENDS {
        let ex = executor(4, b);
        let e = ex
            .run(|env| {
                if env.rank() == 2 {
                    return Err(RuntimeError::User("bad input".into()));
                }
                env.comm().barrier()?;
                Ok(())
            })
            .wait()
            .unwrap_err();
        assert!(matches!(e, RuntimeError::RankFailed { rank: 2, .. }), "{e}");
        assert_eq!(ex.state(), ExecutorState::Ready);
        let e = ex
            .run(|env| {
                if env.rank() == 3 {
                    panic!("worker bug");
                }
                Ok(env.comm().allreduce_i64(1, ReduceOp::Sum)?)
            })
            .wait()
            .unwrap_err();
        match e {
            RuntimeError::RankFailed { rank: 3, source } => {
                assert!(matches!(*source, RuntimeError::Panic(ref m) if m.contains("worker bug")))
            }
            other => panic!("unexpected {other}"),
        }
        let sums = ex
            .run(|env| Ok(env.comm().allreduce_i64(1, ReduceOp::Sum)?))
            .wait()
            .unwrap();
        assert_eq!(sums, vec![4; 4]);
    }
}

#[test]
fn wait_timeout_and_fifo() {
    let ex = executor(2, Backend::InProcess);
    let gate = Arc::new(AtomicBool::new(false));
    let g = gate.clone();
    let slow = ex.run(move |_| {
        while !g.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(5));
        }
        Ok(1)
    });
    let next = ex.run(|_| Ok(2));
    assert!(matches!(
        slow.wait_timeout(Duration::ZERO),
        Err(RuntimeError::Timeout(..))
    ));
    assert!(!next.is_done());
    wait_running(&ex);
    gate.store(true, Ordering::SeqCst);
    assert_eq!(
        slow.wait_timeout(Duration::from_secs(10)).unwrap(),
        vec![1, 1]
    );
    assert!(matches!(
        slow.wait_timeout(Duration::ZERO),
        Err(RuntimeError::AlreadyTaken)
    ));
    assert_eq!(next.wait().unwrap(), vec![2, 2]);
}

#[test]
fn stop_is_idempotent_and_cancels_pending() {
    let ex = executor(2, Backend::InProcess);
    let gate = Arc::new(AtomicBool::new(false));
    let g = gate.clone();
    let running = ex.run(move |_| {
        while !g.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(5));
        }
        Ok(())
    });
    let pending = ex.run(|_| Ok(()));
    wait_running(&ex);
    std::thread::scope(|s| {
        s.spawn(|| {
            std::thread::sleep(Duration::from_millis(50));
            gate.store(true, Ordering::SeqCst);
        });
        ex.stop();
    });
    assert!(running.wait().is_ok());
    assert!(matches!(pending.wait(), Err(RuntimeError::ExecutorStopped)));
    assert_eq!(ex.state(), ExecutorState::Stopped);
    ex.stop();
    assert_eq!(ex.state(), ExecutorState::Stopped);
    assert!(matches!(
        ex.run(|_| Ok(())).wait(),
        Err(RuntimeError::ExecutorStopped)
    ));
}

#[test]
fn independent_executors_run_concurrently() {
    let a = executor(2, Backend::InProcess);
    let b = executor(2, Backend::Tcp);
    let sa = a.run(|env| {
        for _ in 0..50 {
            env.comm().barrier()?;
        }
        Ok(env.comm().allreduce_i64(10, ReduceOp::Sum)?)
    });
    let sb = b.run(|env| {
        for _ in 0..50 {
            env.comm().barrier()?;
        }
        Ok(env.comm().allreduce_i64(1, ReduceOp::Sum)?)
    });
    assert_eq!(sa.wait().unwrap(), vec![20, 20]);
    assert_eq!(sb.wait().unwrap(), vec![2, 2]);
}

#[test]
fn shard_lengths_sum_to_file_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = 0;
    for r in 0..3 {
        let mut f = std::fs::File::create(dir.path().join(format!("part-{r}.csv"))).unwrap();
        writeln!(f, "k,v").unwrap();
        for i in 0..(10 + r * 7) {
            writeln!(f, "{i},{}", i * 2).unwrap();
            lines += 1;
        }
    }
    let ex = executor(3, Backend::InProcess);
    let path = dir.path().to_path_buf();
    let totals = ex
        .run(move |env| {
            let t = read_csv_file(path.join(format!("part-{}.csv", env.rank())), None)?;
            Ok(env
                .comm()
                .allreduce_i64(t.num_rows() as i64, ReduceOp::Sum)?)
        })
        .wait()
        .unwrap();
    assert_eq!(totals, vec![lines as i64; 3]);
}
