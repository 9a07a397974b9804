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

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Runtime(#[from] bspf_runtime::RuntimeError),
    #[error(transparent)]
    Core(#[from] bspf_core::Error),
    #[error(transparent)]
    Comm(#[from] bspf_comm::CommError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed bench csv: {0}")]
    MalformedCsv(String),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error("worker: {0}")]
    Worker(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// Converts for use inside executor jobs, keeping comm and core errors
    /// distinguishable.
    pub fn into_runtime(self) -> bspf_runtime::RuntimeError {
        use bspf_runtime::RuntimeError as R;
        match self {
            CliError::Runtime(e) => e,
            CliError::Core(e) => R::Core(e),
            CliError::Comm(e) => R::Comm(e),
            CliError::Io(e) => R::Io(e),
            e => R::User(e.to_string()),
        }
    }
}
