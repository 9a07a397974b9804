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

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;

use bspf_cli::datagen::{expected_distinct, generate, GenSpec};
use bspf_cli::driver::{bench, executor_config, verify};
use bspf_cli::ops::{Op, Workload};
use bspf_cli::report::{comm_fraction, read_records, render_markdown, summarize};
use bspf_cli::tasks::{prepare, time_rank, Prepared};
use bspf_cli::worker::{launch, LaunchOptions, Task, TaskOutput};
use bspf_cli::CliError;
use bspf_comm::Backend;
use bspf_core::ipc::serialize_table;
use bspf_core::JoinType;

const EXE: &str = env!("CARGO_BIN_EXE_bspf");

fn inproc() -> bspf_runtime::ExecutorConfig {
    executor_config(Backend::InProcess, None, None)
}

#[test]
fn distinct_keys_match_coupon_collector() {
    let spec = GenSpec::new(1_000_000, 0.9, 7);
    let t = generate(&spec).unwrap();
    let keys: HashSet<i64> = t.column(0).i64_values().unwrap().iter().copied().collect();
    let want = expected_distinct(spec.key_space(), 1_000_000);
    let rel = (keys.len() as f64 - want).abs() / want;
    assert!(rel < 0.01, "distinct {} expected {want:.0}", keys.len());
}

#[test]
fn full_cardinality_keys_stay_in_range() {
    let t = generate(&GenSpec::new(1000, 1.0, 3)).unwrap();
    assert!(t
        .column(0)
        .i64_values()
        .unwrap()
        .iter()
        .all(|&k| (0..1000).contains(&k)));
}

#[test]
fn generation_is_byte_identical() {
    let spec = GenSpec::new(5000, 0.3, 11);
    assert_eq!(
        serialize_table(&generate(&spec).unwrap()),
        serialize_table(&generate(&spec).unwrap())
    );
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = Command::new(EXE)
            .args([
                "generate",
                "--rows",
                "5000",
                "--cardinality",
                "0.3",
                "--seed",
                "11",
                "--parallelism",
                "3",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        (0..3)
            .map(|r| std::fs::read(out.join(format!("part-{r}.bspf"))).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn verify_examples() {
    let v = verify(
        4,
        inproc(),
        &Workload::new(Op::Join(JoinType::Inner), 100_000, 0.9, 1),
        false,
    )
    .unwrap();
    assert!(v.passed, "{v:?}");
    let v = verify(
        8,
        inproc(),
        &Workload::new(Op::Sort, 100_000, 0.001, 1),
        false,
    )
    .unwrap();
    assert!(v.passed, "{v:?}");
    let v = verify(
        1,
        inproc(),
        &Workload::new(Op::Pipeline, 10_000, 0.5, 1),
        false,
    )
    .unwrap();
    assert!(v.passed, "{v:?}");
}

#[test]
fn corrupted_comparison_fails_with_row() {
    let v = verify(2, inproc(), &Workload::new(Op::GroupBy, 1000, 0.5, 1), true).unwrap();
    assert!(!v.passed);
    assert!(v.mismatch.unwrap().contains("row"));
    let out = Command::new(EXE)
        .args([
            "verify",
            "--op",
            "sort",
            "--rows",
            "500",
            "--parallelism",
            "2",
            "--corrupt",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("differs"));
}

#[test]
fn worker_processes_verify_over_tcp() {
    let opts = LaunchOptions {
        rendezvous: None,
        namespace: None,
        timeout: Some(std::time::Duration::from_secs(30)),
    };
    let w = Workload::new(Op::Join(JoinType::FullOuter), 20_000, 0.1, 5);
    let task = Task::Verify {
        workload: w.clone(),
        corrupt: false,
    };
    match launch(Path::new(EXE), 3, &task, &opts).unwrap() {
        TaskOutput::Verify(v) => {
            assert!(v.passed, "{v:?}");
            let local = verify(3, inproc(), &w, false).unwrap();
            assert_eq!(v, local);
        }
        other => panic!("unexpected {other:?}"),
    }
    let out = Command::new(EXE)
        .args([
            "verify",
            "--op",
            "groupby",
            "--rows",
            "5000",
            "--parallelism",
            "2",
            "--backend",
            "tcp",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn worker_processes_bench_over_tcp() {
    let task = Task::Bench {
        workload: Workload::new(Op::Pipeline, 5000, 0.5, 2),
        repeats: 2,
    };
    let opts = LaunchOptions {
        rendezvous: None,
        namespace: Some("bench-tcp-test".into()),
        timeout: None,
    };
    let TaskOutput::Bench(r) = launch(Path::new(EXE), 2, &task, &opts).unwrap() else {
        panic!("expected bench records")
    };
    assert_eq!(r.len(), 2 * 5);
    assert!(r.iter().all(|x| x.backend == "tcp" && x.p == 2));
}

#[test]
fn bench_shape_and_map_has_no_comm() {
    let recs = bench(
        &[1, 2, 4],
        &inproc(),
        &Workload::new(Op::Map, 20_000, 0.9, 1),
        2,
    )
    .unwrap();
    assert_eq!(recs.len(), 3 * 2);
    assert!(recs.iter().all(|r| r.comm_ms_max == 0.0));
    let rows = summarize(&recs);
    assert_eq!(rows[0].p, 1);
    assert_eq!(rows[0].comm_fraction, 0.0);
    assert_eq!(rows[0].speedup, Some(1.0));
}

#[test]
fn pipeline_bench_reports_four_stages() {
    let recs = bench(
        &[2],
        &inproc(),
        &Workload::new(Op::Pipeline, 20_000, 0.5, 1),
        1,
    )
    .unwrap();
    let ops: Vec<&str> = recs.iter().map(|r| r.op.as_str()).collect();
    assert_eq!(
        ops,
        [
            "pipeline/join",
            "pipeline/groupby",
            "pipeline/sort",
            "pipeline/add_scalar",
            "pipeline"
        ]
    );
    // Per rank, the stages partition the timed region.
    let ex = bspf_runtime::Executor::start(3, inproc()).unwrap();
    let w = Workload::new(Op::Pipeline, 20_000, 0.5, 1);
    ex.start_executable(move |env| prepare(env, &w).map_err(CliError::into_runtime))
        .unwrap();
    let ranks = ex
        .execute(|prep: &mut Prepared, env| time_rank(env, prep).map_err(CliError::into_runtime))
        .wait()
        .unwrap();
    for r in ranks {
        let stages: f64 = r.stages.iter().map(|s| s.wall_ms).sum();
        assert_eq!(r.stages.len(), 4);
        assert!(
            stages <= r.wall_ms,
            "rank {}: stages {stages} wall {}",
            r.rank,
            r.wall_ms
        );
    }
}

#[test]
fn report_arithmetic_and_cli() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    std::fs::write(
        &csv,
        "op,backend,p,repeat,wall_ms,comm_ms_max,comp_ms_max,rows_in,rows_out,seed\njoin,inproc,1,0,10,3,6,5,5,1\n",
    )
    .unwrap();
    let recs = read_records(std::fs::File::open(&csv).unwrap()).unwrap();
    let rows = summarize(&recs);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].comm_fraction, comm_fraction(3.0, 6.0));
    assert_eq!(render_markdown(&rows).lines().count(), 3);

    let plot = dir.path().join("plot.txt");
    let out = Command::new(EXE)
        .arg("report")
        .arg(&csv)
        .arg("--plot-data")
        .arg(&plot)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
    assert_eq!(std::fs::read_to_string(&plot).unwrap().lines().count(), 2);

    std::fs::write(&csv, "op,backend\njoin\n").unwrap();
    let out = Command::new(EXE).arg("report").arg(&csv).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
}
