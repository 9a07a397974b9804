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

//! Immutable columnar tables and the single-partition kernels that
//! distributed operators are composed from.

pub mod bitmap;
pub mod column;
pub mod compare;
pub mod csv_io;
pub mod error;
pub mod ipc;
pub mod kernels;
pub mod order;
pub mod table;
pub mod types;

pub use column::{Column, ColumnBuilder, ColumnData};
pub use error::{Error, Result};
pub use kernels::{AggKind, AggSpec, Aggregate, JoinType, KeySpec};
pub use order::canonicalize;
pub use table::{RowRef, Table};
pub use types::{Domain, Field, Scalar, Schema, Value};
