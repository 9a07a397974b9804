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

use std::time::Duration;

use bspf_comm::CommError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Core(#[from] bspf_core::Error),
    #[error("schema mismatch across ranks: {0}")]
    SchemaMismatch(String),
    #[error("invalid partition assignment: {0}")]
    InvalidAssignment(String),
    #[error("timed out after {0:?} waiting for {1}")]
    Timeout(Duration, String),
    #[error("no executable installed")]
    NoExecutable,
    #[error("installed executable has a different type")]
    ExecutableType,
    #[error("executable construction failed on rank {rank}: {source}")]
    Construction {
        rank: usize,
        #[source]
        source: Box<RuntimeError>,
    },
    #[error("rank {rank} failed: {source}")]
    RankFailed {
        rank: usize,
        #[source]
        source: Box<RuntimeError>,
    },
    #[error("executor stopped")]
    ExecutorStopped,
    #[error("worker spawn failed: {0}")]
    SpawnFailure(String),
    #[error("result already taken")]
    AlreadyTaken,
    #[error("panic: {0}")]
    Panic(String),
    #[error("store: {0}")]
    Store(String),
    #[error("{0}")]
    User(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RuntimeError {
    /// Errors that are a consequence of another rank failing.
    pub fn is_secondary(&self) -> bool {
        matches!(
            self,
            RuntimeError::Comm(CommError::Aborted)
                | RuntimeError::Comm(CommError::PeerFailure { .. })
                | RuntimeError::Comm(CommError::Timeout { .. })
        )
    }

    /// The innermost error below rank wrappers.
    pub fn root(&self) -> &RuntimeError {
        match self {
            RuntimeError::RankFailed { source, .. } | RuntimeError::Construction { source, .. } => {
                source.root()
            }
            e => e,
        }
    }
}

pub type Result<T, E = RuntimeError> = std::result::Result<T, E>;
