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

//! Per-rank bodies for verification and timing. The same bodies run on an
//! executor gang and in stand-alone worker processes.

use std::time::{Duration, Instant};

use bspf_comm::{Backend, CommTimer};
use bspf_core::Table;
use bspf_runtime::{gather_table, ExecEnv};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::ops::{compare, perturb, run_distributed, run_serial, Inputs, Op, Workload};

/// Result of checking one distributed run against the serial oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub op: Op,
    pub p: usize,
    pub rows: usize,
    pub cardinality: f64,
    pub rows_in: usize,
    pub rows_out: usize,
    pub passed: bool,
    pub mismatch: Option<String>,
}

/// Runs the workload, gathers inputs and output to rank 0 and compares
/// there. Only rank 0 returns an outcome. With `corrupt` the expected
/// table is altered first, so the comparison must fail.
pub fn verify_rank(
    env: &mut ExecEnv<'_>,
    w: &Workload,
    corrupt: bool,
) -> Result<Option<VerifyOutcome>> {
    let (rank, p) = (env.rank(), env.world_size());
    let inputs = w.shard(rank, p)?;
    let out = run_distributed(env, w.op, &inputs, |_, _, _| {})?;
    let comm = env.comm();
    let got = gather_table(comm, &out, 0)?;
    let left = gather_table(comm, &inputs.left, 0)?;
    let right = match &inputs.right {
        Some(r) => Some(gather_table(comm, r, 0)?),
        None => None,
    };
    if rank != 0 {
        return Ok(None);
    }
    let whole = Inputs { left, right };
    let mut want = run_serial(w.op, &whole)?;
    if corrupt {
        want = perturb(&want)?;
    }
    let mismatch = compare(w.op, &got, &want);
    Ok(Some(VerifyOutcome {
        op: w.op,
        p,
        rows: w.rows,
        cardinality: w.cardinality,
        rows_in: whole.num_rows(),
        rows_out: got.num_rows(),
        passed: mismatch.is_none(),
        mismatch,
    }))
}

/// Generated inputs held across timed repeats.
pub struct Prepared {
    pub workload: Workload,
    pub inputs: Inputs,
    pub ingest_done: Instant,
}

pub fn prepare(env: &mut ExecEnv<'_>, w: &Workload) -> Result<Prepared> {
    let (rank, p) = (env.rank(), env.world_size());
    let inputs = env.compute(|| w.shard(rank, p))?;
    Ok(Prepared {
        workload: w.clone(),
        inputs,
        ingest_done: Instant::now(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub wall_ms: f64,
    pub comm_ms: f64,
    pub comp_ms: f64,
    pub rows_out: usize,
}

/// One rank's view of one timed run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankTiming {
    pub rank: usize,
    pub wall_ms: f64,
    pub comm_ms: f64,
    pub comp_ms: f64,
    pub rows_in: usize,
    pub rows_out: usize,
    pub stages: Vec<StageTiming>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Times one run of the prepared workload. Ranks line up on a barrier
/// first; input generation is already done and is not part of the timing.
pub fn time_rank(env: &mut ExecEnv<'_>, prep: &Prepared) -> Result<RankTiming> {
    env.comm().barrier()?;
    env.reset_timer();
    env.mark("timing_start");
    let start = env.marker("timing_start").expect("marker just set");
    if prep.ingest_done > start {
        return Err(CliError::Worker(
            "input generation overlaps the timed region".into(),
        ));
    }
    let mut stages = Vec::new();
    let mut last = (start, CommTimer::default());
    let out: Table = run_distributed(env, prep.workload.op, &prep.inputs, |env, name, t| {
        let (now, timer) = (Instant::now(), env.timer());
        let d = timer.since(&last.1);
        stages.push(StageTiming {
            name: name.to_string(),
            wall_ms: ms(now - last.0),
            comm_ms: ms(d.comm()),
            comp_ms: ms(d.comp()),
            rows_out: t.num_rows(),
        });
        last = (now, timer);
    })?;
    let wall = start.elapsed();
    let timer = env.timer();
    Ok(RankTiming {
        rank: env.rank(),
        wall_ms: ms(wall),
        comm_ms: ms(timer.comm()),
        comp_ms: ms(timer.comp()),
        rows_in: prep.inputs.num_rows(),
        rows_out: out.num_rows(),
        stages,
    })
}

/// One line of the benchmark CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub op: String,
    pub backend: String,
    pub p: usize,
    pub repeat: usize,
    pub wall_ms: f64,
    pub comm_ms_max: f64,
    pub comp_ms_max: f64,
    pub rows_in: usize,
    pub rows_out: usize,
    pub seed: u64,
}

fn max_by(ts: impl Iterator<Item = f64>) -> f64 {
    ts.fold(0.0, f64::max)
}

/// Folds per-rank timings into records: wall and component times are the
/// maximum over ranks, row counts the sum. Pipelines get one record per
/// stage followed by the total.
pub fn summarize(
    w: &Workload,
    backend: Backend,
    repeat: usize,
    ranks: &[RankTiming],
) -> Vec<BenchRecord> {
    let p = ranks.len();
    let rows_in = ranks.iter().map(|r| r.rows_in).sum();
    let rec = |op: String, wall, comm, comp, rows_out| BenchRecord {
        op,
        backend: backend.to_string(),
        p,
        repeat,
        wall_ms: wall,
        comm_ms_max: comm,
        comp_ms_max: comp,
        rows_in,
        rows_out,
        seed: w.seed,
    };
    let nstages = ranks.first().map_or(0, |r| r.stages.len());
    let mut out: Vec<BenchRecord> = (0..nstages)
        .map(|i| {
            let st = |f: fn(&StageTiming) -> f64| max_by(ranks.iter().map(|r| f(&r.stages[i])));
            rec(
                format!("{}/{}", w.op, ranks[0].stages[i].name),
                st(|s| s.wall_ms),
                st(|s| s.comm_ms),
                st(|s| s.comp_ms),
                ranks.iter().map(|r| r.stages[i].rows_out).sum(),
            )
        })
        .collect();
    out.push(rec(
        w.op.to_string(),
        max_by(ranks.iter().map(|r| r.wall_ms)),
        max_by(ranks.iter().map(|r| r.comm_ms)),
        max_by(ranks.iter().map(|r| r.comp_ms)),
        ranks.iter().map(|r| r.rows_out).sum(),
    ));
    out
}
