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

#![allow(dead_code)]

use std::sync::Arc;

use bspf_comm::Backend;
use bspf_core::Table;
use bspf_runtime::{ExecEnv, Executor, ExecutorConfig, Result};

pub const BACKENDS: [Backend; 2] = [Backend::InProcess, Backend::Tcp];

pub fn executor(p: usize, backend: Backend) -> Executor {
    Executor::start(p, ExecutorConfig::default().with_backend(backend)).expect("start executor")
}

/// Runs `f` on every rank with that rank's piece of `parts`.
pub fn on_parts<T, F>(ex: &Executor, parts: Vec<Table>, f: F) -> Vec<T>
where
    T: Send + 'static,
    F: Fn(&mut ExecEnv<'_>, &Table) -> Result<T> + Send + Sync + 'static,
{
    assert_eq!(parts.len(), ex.parallelism());
    let parts = Arc::new(parts);
    ex.run(move |env| {
        let mine = parts[env.rank()].clone();
        f(env, &mine)
    })
    .wait()
    .expect("submission")
}

pub fn concat(parts: &[Table]) -> Table {
    Table::concat(parts).unwrap()
}
