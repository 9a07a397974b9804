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

//! Stand-alone worker processes for the TCP backend: the task format, the
//! per-process entry point and a launcher that spawns one process per rank.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use bspf_comm::{Backend, Communicator, RendezvousServer, WorldConfig};
use bspf_runtime::{ExecEnv, Store};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::ops::Op;
use crate::ops::Workload;
use crate::tasks::{
    prepare, summarize, time_rank, verify_rank, BenchRecord, RankTiming, VerifyOutcome,
};

/// Largest result rank 0 may hand back through stdout.
pub const RESULT_CAP: usize = 64 << 20;

pub const ENV_RANK: &str = "BSPF_RANK";
pub const ENV_WORLD: &str = "BSPF_WORLD";
pub const ENV_RENDEZVOUS: &str = "BSPF_RENDEZVOUS";
pub const ENV_NAMESPACE: &str = "BSPF_NAMESPACE";
pub const ENV_TASK: &str = "BSPF_TASK";
pub const ENV_TIMEOUT_MS: &str = "BSPF_TIMEOUT_MS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Task {
    Verify { workload: Workload, corrupt: bool },
    Bench { workload: Workload, repeats: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "lowercase")]
pub enum TaskOutput {
    Verify(VerifyOutcome),
    Bench(Vec<BenchRecord>),
}

/// Runs one rank of `task`. Rank 0 returns the result.
pub fn run_rank(cfg: &WorldConfig, task: &Task) -> Result<Option<TaskOutput>> {
    let mut comm = Communicator::init(cfg)?;
    let mut env = ExecEnv::new(&mut comm, Store::memory(), 0);
    match task {
        Task::Verify { workload, corrupt } => {
            Ok(verify_rank(&mut env, workload, *corrupt)?.map(TaskOutput::Verify))
        }
        Task::Bench { workload, repeats } => {
            if workload.op == Op::Pipeline {
                if let Some(v) = verify_rank(&mut env, workload, false)? {
                    if let Some(m) = v.mismatch {
                        return Err(CliError::VerifyFailed(m));
                    }
                }
            }
            let prep = prepare(&mut env, workload)?;
            let mut records = Vec::new();
            for repeat in 0..*repeats {
                let mine = time_rank(&mut env, &prep)?;
                let all = env.comm().gather(serde_json::to_vec(&mine)?, 0)?;
                if env.rank() == 0 {
                    let ranks = all
                        .iter()
                        .map(|b| serde_json::from_slice::<RankTiming>(b))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    records.extend(summarize(workload, Backend::Tcp, repeat, &ranks));
                }
            }
            Ok((env.rank() == 0).then_some(TaskOutput::Bench(records)))
        }
    }
}

fn env_var(name: &str) -> Result<String> {
    std::env::var(name).map_err(|_| CliError::Usage(format!("{name} is not set")))
}

fn env_num(name: &str) -> Result<usize> {
    env_var(name)?
        .parse()
        .map_err(|_| CliError::Usage(format!("{name} is not a number")))
}

/// Entry point of the `worker` subcommand: configuration comes from the
/// environment, and rank 0 writes the result as JSON to stdout.
pub fn worker_main() -> Result<()> {
    let rank = env_num(ENV_RANK)?;
    let world = env_num(ENV_WORLD)?;
    let task: Task = serde_json::from_str(&env_var(ENV_TASK)?)?;
    let mut cfg = WorldConfig::new(world, rank, Backend::Tcp)
        .with_rendezvous(env_var(ENV_RENDEZVOUS)?)
        .with_namespace(env_var(ENV_NAMESPACE)?);
    if let Ok(ms) = env_num(ENV_TIMEOUT_MS) {
        cfg = cfg.with_timeout(Duration::from_millis(ms as u64));
    }
    if let Some(out) = run_rank(&cfg, &task)? {
        let json = serde_json::to_string(&out)?;
        if json.len() > RESULT_CAP {
            return Err(CliError::Worker(format!(
                "result of {} bytes exceeds the cap",
                json.len()
            )));
        }
        println!("{json}");
    }
    Ok(())
}

/// Where the launched workers meet.
pub struct LaunchOptions {
    pub rendezvous: Option<String>,
    pub namespace: Option<String>,
    pub timeout: Option<Duration>,
}

/// Spawns `p` worker processes of `exe` for `task` and returns rank 0's
/// result. Starts a private rendezvous server unless one is given.
pub fn launch(exe: &Path, p: usize, task: &Task, opts: &LaunchOptions) -> Result<TaskOutput> {
    if p == 0 {
        return Err(CliError::Usage("parallelism must be at least 1".into()));
    }
    let mut server = None;
    let addr = match &opts.rendezvous {
        Some(a) => a.clone(),
        None => {
            let s = RendezvousServer::start("127.0.0.1:0")?;
            let a = s.addr().to_string();
            server = Some(s);
            a
        }
    };
    let ns = opts
        .namespace
        .clone()
        .unwrap_or_else(|| format!("bspf-{}-{:x}", std::process::id(), rand::random::<u64>()));
    let task_json = serde_json::to_string(task)?;
    let mut children = Vec::with_capacity(p);
    for rank in 0..p {
        let mut cmd = Command::new(exe);
        cmd.arg("worker")
            .env(ENV_RANK, rank.to_string())
            .env(ENV_WORLD, p.to_string())
            .env(ENV_RENDEZVOUS, &addr)
            .env(ENV_NAMESPACE, &ns)
            .env(ENV_TASK, &task_json)
            .stdin(Stdio::null())
            .stdout(if rank == 0 {
                Stdio::piped()
            } else {
                Stdio::null()
            })
            .stderr(Stdio::inherit());
        if let Some(t) = opts.timeout {
            cmd.env(ENV_TIMEOUT_MS, t.as_millis().to_string());
        }
        match cmd.spawn() {
            Ok(c) => children.push(c),
            Err(e) => {
                for mut c in children {
                    let _ = c.kill();
                    let _ = c.wait();
                }
                return Err(CliError::Worker(format!("spawning rank {rank}: {e}")));
            }
        }
    }
    let mut out = Vec::new();
    if let Some(stdout) = children[0].stdout.take() {
        stdout.take(RESULT_CAP as u64 + 1).read_to_end(&mut out)?;
    }
    let mut failed = Vec::new();
    for (rank, mut c) in children.into_iter().enumerate() {
        let status = c.wait()?;
        if !status.success() {
            failed.push(rank);
        }
    }
    drop(server);
    if !failed.is_empty() {
        return Err(CliError::Worker(format!(
            "ranks {failed:?} exited with failure"
        )));
    }
    if out.len() > RESULT_CAP {
        return Err(CliError::Worker("rank 0 result exceeds the cap".into()));
    }
    Ok(serde_json::from_slice(&out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_json_round_trip() {
        let t = Task::Bench {
            workload: Workload::new(Op::Join(bspf_core::JoinType::Left), 10, 0.5, 3),
            repeats: 2,
        };
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"join-left\""));
        assert_eq!(serde_json::from_str::<Task>(&s).unwrap(), t);
    }
}
