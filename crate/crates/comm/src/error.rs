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

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommError {
    #[error("rendezvous timed out in namespace {namespace}: {joined} of {expected} ranks joined")]
    RendezvousTimeout {
        namespace: String,
        joined: usize,
        expected: usize,
    },
    #[error("rank {rank} already registered in namespace {namespace}")]
    DuplicateRank { namespace: String, rank: usize },
    #[error("world size mismatch: registered {registered}, requested {requested}")]
    WorldSizeMismatch { registered: usize, requested: usize },
    #[error("peer {rank} failed or closed its channel")]
    PeerFailure { rank: usize },
    #[error("rank {rank} is not valid here (world size {world})")]
    InvalidRank { rank: usize, world: usize },
    #[error("timed out waiting for rank {peer} in {op}")]
    Timeout { op: &'static str, peer: usize },
    #[error("collective mismatch: {0}")]
    ProtocolMismatch(String),
    #[error("operation aborted")]
    Aborted,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed frame: {0}")]
    BadFrame(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CommError {
    fn from(e: std::io::Error) -> Self {
        CommError::Io(e.to_string())
    }
}

pub type Result<T, E = CommError> = std::result::Result<T, E>;
