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

//! Runs verification and benchmarks on an executor gang.

use bspf_comm::Backend;
use bspf_runtime::{Executor, ExecutorConfig};

use crate::error::{CliError, Result};
use crate::ops::{Op, Workload};
use crate::tasks::{
    prepare, summarize, time_rank, verify_rank, BenchRecord, Prepared, VerifyOutcome,
};

/// Verifies `w` on an already running executor.
pub fn verify_on(ex: &Executor, w: &Workload, corrupt: bool) -> Result<VerifyOutcome> {
    let w = w.clone();
    let outs = ex
        .run(move |env| verify_rank(env, &w, corrupt).map_err(CliError::into_runtime))
        .wait()?;
    outs.into_iter()
        .next()
        .flatten()
        .ok_or_else(|| CliError::Worker("rank 0 returned no verification outcome".into()))
}

pub fn verify(p: usize, cfg: ExecutorConfig, w: &Workload, corrupt: bool) -> Result<VerifyOutcome> {
    let ex = Executor::start(p, cfg)?;
    let r = verify_on(&ex, w, corrupt);
    ex.stop();
    r
}

/// Generates the inputs on every worker, then times `repeats` runs. A
/// pipeline is verified against the serial composition before timing.
pub fn bench_on(ex: &Executor, w: &Workload, repeats: usize) -> Result<Vec<BenchRecord>> {
    if w.op == Op::Pipeline {
        let v = verify_on(ex, w, false)?;
        if let Some(m) = v.mismatch {
            return Err(CliError::VerifyFailed(m));
        }
    }
    let wc = w.clone();
    ex.start_executable(move |env| prepare(env, &wc).map_err(CliError::into_runtime))?;
    let mut out = Vec::new();
    for repeat in 0..repeats {
        let ranks = ex
            .execute(|prep: &mut Prepared, env| {
                time_rank(env, prep).map_err(CliError::into_runtime)
            })
            .wait()?;
        out.extend(summarize(w, ex.backend(), repeat, &ranks));
    }
    Ok(out)
}

pub fn bench(
    p_list: &[usize],
    cfg: &ExecutorConfig,
    w: &Workload,
    repeats: usize,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &p in p_list {
        let ex = Executor::start(p, cfg.clone())?;
        let r = bench_on(&ex, w, repeats);
        ex.stop();
        out.extend(r?);
    }
    Ok(out)
}

pub fn executor_config(
    backend: Backend,
    rendezvous: Option<String>,
    namespace: Option<String>,
) -> ExecutorConfig {
    let mut cfg = ExecutorConfig::default().with_backend(backend);
    cfg.rendezvous = rendezvous;
    cfg.namespace = namespace;
    cfg
}
