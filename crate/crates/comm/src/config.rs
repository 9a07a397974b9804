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

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::error::CommError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Mailboxes shared between threads of one process.
    InProcess,
    /// Full mesh of sockets, bootstrapped through a rendezvous server.
    Tcp,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::InProcess => "inproc",
            Backend::Tcp => "tcp",
        })
    }
}

impl FromStr for Backend {
    type Err = CommError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inproc" | "inprocess" | "in-process" => Ok(Backend::InProcess),
            "tcp" => Ok(Backend::Tcp),
            other => Err(CommError::InvalidConfig(format!(
                "unknown backend {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldConfig {
    pub world_size: usize,
    pub rank: usize,
    pub backend: Backend,
    /// `host:port` of the rendezvous server. Required for [`Backend::Tcp`].
    pub rendezvous: Option<String>,
    /// Separates independent worlds sharing one registry or server.
    pub namespace: String,
    pub timeout: Duration,
    /// Host the TCP listener binds to and advertises.
    pub host: String,
}

impl WorldConfig {
    pub fn new(world_size: usize, rank: usize, backend: Backend) -> Self {
        WorldConfig {
            world_size,
            rank,
            backend,
            rendezvous: None,
            namespace: "default".to_string(),
            timeout: DEFAULT_TIMEOUT,
            host: "127.0.0.1".to_string(),
        }
    }

    pub fn with_namespace(mut self, ns: impl Into<String>) -> Self {
        self.namespace = ns.into();
        self
    }

    pub fn with_rendezvous(mut self, addr: impl Into<String>) -> Self {
        self.rendezvous = Some(addr.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn validate(&self) -> Result<(), CommError> {
        if self.world_size == 0 {
            return Err(CommError::InvalidConfig(
                "world size must be at least 1".into(),
            ));
        }
        if self.rank >= self.world_size {
            return Err(CommError::InvalidRank {
                rank: self.rank,
                world: self.world_size,
            });
        }
        if self.namespace.is_empty() || self.namespace.chars().any(char::is_whitespace) {
            return Err(CommError::InvalidConfig(format!(
                "namespace {:?} must be nonempty without whitespace",
                self.namespace
            )));
        }
        if self.backend == Backend::Tcp && self.world_size > 1 && self.rendezvous.is_none() {
            return Err(CommError::InvalidConfig(
                "tcp backend needs a rendezvous address".into(),
            ));
        }
        Ok(())
    }
}
