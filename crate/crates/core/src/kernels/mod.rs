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

//! Single-partition kernels from which the distributed operators are built.

pub mod groupby;
pub mod hash;
pub mod join;
pub mod map;
pub mod sample;
pub mod sort;

use std::fmt;

use crate::error::{Error, Result};
use crate::types::{Domain, Schema};

pub use groupby::{final_combine, local_groupby, partial_aggregate};
pub use hash::hash_keys;
pub use join::local_hash_join;
pub use map::add_scalar;
pub use sample::{range_partition, select_splitter_candidates};
pub use sort::local_sort;

/// Ordered, nonempty, duplicate-free list of key column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySpec(Vec<usize>);

impl KeySpec {
    pub fn new(columns: impl Into<Vec<usize>>) -> Result<Self> {
        let columns = columns.into();
        if columns.is_empty() {
            return Err(Error::InvalidArgument(
                "key spec needs at least one column".into(),
            ));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(Error::InvalidArgument(format!("key column {c} repeated")));
            }
        }
        Ok(KeySpec(columns))
    }

    /// Single key column.
    pub fn single(column: usize) -> Self {
        KeySpec(vec![column])
    }

    /// Keys `0..n`, used for tables whose key columns come first.
    pub fn leading(n: usize) -> Self {
        KeySpec((0..n.max(1)).collect())
    }

    pub fn columns(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Check every index against a schema.
    pub fn check(&self, schema: &Schema) -> Result<()> {
        match self.0.iter().find(|&&c| c >= schema.len()) {
            Some(&c) => Err(Error::OutOfBounds {
                index: c,
                len: schema.len(),
            }),
            None => Ok(()),
        }
    }

    pub fn domains<'a>(&'a self, schema: &'a Schema) -> impl Iterator<Item = Domain> + 'a {
        self.0.iter().map(|&c| schema.field(c).domain)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggKind {
    Sum,
    Count,
    Min,
    Max,
    Mean,
}

impl AggKind {
    pub const ALL: [AggKind; 5] = [
        AggKind::Sum,
        AggKind::Count,
        AggKind::Min,
        AggKind::Max,
        AggKind::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggKind::Sum => "sum",
            AggKind::Count => "count",
            AggKind::Min => "min",
            AggKind::Max => "max",
            AggKind::Mean => "mean",
        }
    }
}

impl fmt::Display for AggKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregate {
    pub column: usize,
    pub kind: AggKind,
    pub output: String,
}

/// List of aggregates applied per group.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AggSpec(Vec<Aggregate>);

impl AggSpec {
    pub fn new(aggs: Vec<Aggregate>) -> Self {
        AggSpec(aggs)
    }

    /// Append an aggregate producing column `output`.
    pub fn push(mut self, column: usize, kind: AggKind, output: impl Into<String>) -> Self {
        self.0.push(Aggregate {
            column,
            kind,
            output: output.into(),
        });
        self
    }

    pub fn aggregates(&self) -> &[Aggregate] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Check column indices and domains against the input schema.
    pub fn check(&self, schema: &Schema) -> Result<()> {
        for a in &self.0 {
            if a.column >= schema.len() {
                return Err(Error::OutOfBounds {
                    index: a.column,
                    len: schema.len(),
                });
            }
            let d = schema.field(a.column).domain;
            if a.kind != AggKind::Count && !d.is_numeric() {
                return Err(Error::DomainMismatch(format!(
                    "{} needs a numeric column, '{}' is {d}",
                    a.kind,
                    schema.field(a.column).name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JoinType {
    Inner,
    Left,
    Right,
    FullOuter,
}

impl JoinType {
    pub const ALL: [JoinType; 4] = [
        JoinType::Inner,
        JoinType::Left,
        JoinType::Right,
        JoinType::FullOuter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JoinType::Inner => "inner",
            JoinType::Left => "left",
            JoinType::Right => "right",
            JoinType::FullOuter => "full",
        }
    }
}

impl std::str::FromStr for JoinType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(JoinType::Inner),
            "left" => Ok(JoinType::Left),
            "right" => Ok(JoinType::Right),
            "full" | "outer" | "full_outer" => Ok(JoinType::FullOuter),
            _ => Err(Error::InvalidArgument(format!("unknown join type '{s}'"))),
        }
    }
}

impl fmt::Display for JoinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
