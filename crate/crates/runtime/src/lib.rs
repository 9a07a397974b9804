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

//! Distributed execution on top of the communicator: table collectives,
//! distributed operators, a persistent worker gang and a partitioned store.

pub mod dist;
mod env;
mod error;
pub mod executor;
pub mod store;
pub mod table_comm;

pub use dist::{dist_groupby, dist_join, dist_map, dist_sort, splitter_select};
pub use env::ExecEnv;
pub use error::{Result, RuntimeError};
pub use executor::{Executor, ExecutorConfig, ExecutorState, Submission};
pub use store::{store_get, store_put, Store, StoreEntry};
pub use table_comm::{
    allgather_table, broadcast_table, gather_table, repartition_even, shuffle_table,
};
