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

//! The benchmark operators, their distributed and serial forms, and how
//! their results are compared.

use std::fmt;
use std::str::FromStr;

use bspf_core::compare::{diff_sorted, diff_unordered};
use bspf_core::kernels::{add_scalar, local_groupby, local_hash_join, local_sort};
use bspf_core::{AggKind, AggSpec, Column, ColumnData, Domain, JoinType, KeySpec, Scalar, Table};
use bspf_runtime::{dist_groupby, dist_join, dist_map, dist_sort, ExecEnv};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datagen::{generate_shard, GenSpec};
use crate::error::{CliError, Result};

/// Relative tolerance for floating aggregates.
pub const MEAN_TOLERANCE: f64 = 1e-12;

const RIGHT_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Join(JoinType),
    GroupBy,
    Sort,
    Pipeline,
    Map,
}

impl Op {
    pub const VERIFIABLE: [Op; 7] = [
        Op::Join(JoinType::Inner),
        Op::Join(JoinType::Left),
        Op::Join(JoinType::Right),
        Op::Join(JoinType::FullOuter),
        Op::GroupBy,
        Op::Sort,
        Op::Pipeline,
    ];

    pub fn needs_right(self) -> bool {
        matches!(self, Op::Join(_) | Op::Pipeline)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Join(JoinType::Inner) => f.write_str("join"),
            Op::Join(jt) => write!(f, "join-{}", jt.name()),
            Op::GroupBy => f.write_str("groupby"),
            Op::Sort => f.write_str("sort"),
            Op::Pipeline => f.write_str("pipeline"),
            Op::Map => f.write_str("map"),
        }
    }
}

impl FromStr for Op {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Ok(match s.as_str() {
            "join" => Op::Join(JoinType::Inner),
            "groupby" => Op::GroupBy,
            "sort" => Op::Sort,
            "pipeline" => Op::Pipeline,
            "map" => Op::Map,
            _ => match s.strip_prefix("join-") {
                Some(jt) => Op::Join(
                    jt.parse()
                        .map_err(|e: bspf_core::Error| CliError::Usage(e.to_string()))?,
                ),
                None => return Err(CliError::Usage(format!("unknown operator {s:?}"))),
            },
        })
    }
}

impl Serialize for Op {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Op {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An operator applied to generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub op: Op,
    pub rows: usize,
    pub cardinality: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inputs {
    pub left: Table,
    pub right: Option<Table>,
}

impl Inputs {
    pub fn num_rows(&self) -> usize {
        self.left.num_rows() + self.right.as_ref().map_or(0, Table::num_rows)
    }
}

impl Workload {
    pub fn new(op: Op, rows: usize, cardinality: f64, seed: u64) -> Self {
        Workload {
            op,
            rows,
            cardinality,
            seed,
        }
    }

    /// Left input: `(k, v)` with keys from `ceil(c * rows)` values.
    pub fn left_spec(&self) -> GenSpec {
        GenSpec::new(self.rows, self.cardinality, self.seed)
    }

    /// Right input: `(k, w)` with as many rows as there are distinct key
    /// values, drawn from the same key space, so an inner join yields about
    /// `rows` rows at every cardinality.
    pub fn right_spec(&self) -> GenSpec {
        let m = self.left_spec().key_space() as usize;
        GenSpec::new(m, 1.0, self.seed ^ RIGHT_SALT)
            .with_columns(&[("k", Domain::Int64), ("w", Domain::Int64)])
    }

    pub fn shard(&self, rank: usize, p: usize) -> Result<Inputs> {
        self.left_spec().validate()?;
        let left = generate_shard(&self.left_spec(), rank, p)?;
        let right = if self.op.needs_right() {
            Some(generate_shard(&self.right_spec(), rank, p)?)
        } else {
            None
        };
        Ok(Inputs { left, right })
    }
}

pub fn groupby_aggs() -> AggSpec {
    AggKind::ALL.into_iter().fold(AggSpec::default(), |s, k| {
        s.push(1, k, format!("v_{}", k.name()))
    })
}

fn pipeline_aggs() -> AggSpec {
    AggSpec::default()
        .push(1, AggKind::Sum, "v_sum")
        .push(2, AggKind::Mean, "w_mean")
}

const PIPELINE_SORT: [usize; 2] = [1, 0];
const PIPELINE_ASC: [bool; 2] = [false, true];

fn right(inputs: &Inputs) -> Result<&Table> {
    inputs
        .right
        .as_ref()
        .ok_or_else(|| CliError::Usage("operator needs a right input".into()))
}

pub const PIPELINE_STAGES: [&str; 4] = ["join", "groupby", "sort", "add_scalar"];

/// Runs the operator on this rank's inputs. `stage` is called after each
/// pipeline stage, for per-stage timing.
pub fn run_distributed(
    env: &mut ExecEnv<'_>,
    op: Op,
    inputs: &Inputs,
    mut stage: impl FnMut(&mut ExecEnv<'_>, &'static str, &Table),
) -> Result<Table> {
    let k = KeySpec::single(0);
    Ok(match op {
        Op::Join(jt) => dist_join(env, &inputs.left, right(inputs)?, &k, &k, jt)?,
        Op::GroupBy => dist_groupby(env, &inputs.left, &k, &groupby_aggs())?,
        Op::Sort => dist_sort(env, &inputs.left, &k, &[true])?,
        Op::Map => dist_map(env, &inputs.left, |t| add_scalar(t, 1, Scalar::Int64(1)))?,
        Op::Pipeline => {
            let j = dist_join(env, &inputs.left, right(inputs)?, &k, &k, JoinType::Inner)?;
            stage(env, "join", &j);
            let g = dist_groupby(env, &j, &k, &pipeline_aggs())?;
            stage(env, "groupby", &g);
            let s = dist_sort(
                env,
                &g,
                &KeySpec::new(PIPELINE_SORT.to_vec())?,
                &PIPELINE_ASC,
            )?;
            stage(env, "sort", &s);
            let out = dist_map(env, &s, |t| add_scalar(t, 1, Scalar::Int64(1)))?;
            stage(env, "add_scalar", &out);
            out
        }
    })
}

/// The same operator on the whole input in one partition.
pub fn run_serial(op: Op, inputs: &Inputs) -> Result<Table> {
    let k = KeySpec::single(0);
    Ok(match op {
        Op::Join(jt) => local_hash_join(&inputs.left, right(inputs)?, &k, &k, jt)?,
        Op::GroupBy => local_groupby(&inputs.left, &k, &groupby_aggs())?,
        Op::Sort => local_sort(&inputs.left, &k, &[true])?,
        Op::Map => add_scalar(&inputs.left, 1, Scalar::Int64(1))?,
        Op::Pipeline => {
            let j = local_hash_join(&inputs.left, right(inputs)?, &k, &k, JoinType::Inner)?;
            let g = local_groupby(&j, &k, &pipeline_aggs())?;
            let s = local_sort(&g, &KeySpec::new(PIPELINE_SORT.to_vec())?, &PIPELINE_ASC)?;
            add_scalar(&s, 1, Scalar::Int64(1))?
        }
    })
}

/// `None` when the gathered distributed result matches the serial one.
pub fn compare(op: Op, got: &Table, want: &Table) -> Option<String> {
    let m = match op {
        Op::Join(_) | Op::GroupBy => diff_unordered(got, want, MEAN_TOLERANCE),
        Op::Sort => diff_sorted(got, want, &[0], &[true]),
        Op::Pipeline => diff_sorted(got, want, &PIPELINE_SORT, &PIPELINE_ASC),
        Op::Map => diff_unordered(got, want, 0.0),
    };
    m.map(|m| m.to_string())
}

/// Changes the first value of the last column, to check that a comparison
/// can fail.
pub fn perturb(t: &Table) -> Result<Table> {
    if t.num_rows() == 0 {
        return Ok(t.clone());
    }
    let last = t.num_columns() - 1;
    let col = t.column(last);
    let data = match col.data() {
        ColumnData::Int64(v) => {
            let mut v = v.clone();
            v[0] = v[0].wrapping_add(1);
            ColumnData::Int64(v)
        }
        ColumnData::Float64(v) => {
            let mut v = v.clone();
            v[0] += 1.0;
            ColumnData::Float64(v)
        }
        ColumnData::Boolean(v) => {
            let mut v = v.clone();
            v[0] ^= 1;
            ColumnData::Boolean(v)
        }
        other => other.clone(),
    };
    Ok(t.with_column(last, Column::from_parts(col.validity().clone(), data)?)?)
}
