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

//! Whole-table collectives. Tables travel as one serialized payload per
//! (source, destination) pair; each shuffle first exchanges payload sizes and
//! schema digests, then the payloads.

use std::sync::Arc;

use bspf_comm::Communicator;
use bspf_core::ipc::{deserialize_table, schema_digest, serialize_table};
use bspf_core::{Schema, Table};

use crate::error::{Result, RuntimeError};

fn encode_u64s(v: &[u64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn decode_u64s(b: &[u8]) -> Result<Vec<u64>> {
    if !b.len().is_multiple_of(8) {
        return Err(RuntimeError::Comm(bspf_comm::CommError::BadFrame(
            "u64 payload length not a multiple of 8".into(),
        )));
    }
    Ok(b.chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn check_digests(own: u64, digests: impl IntoIterator<Item = (usize, u64)>) -> Result<()> {
    for (rank, d) in digests {
        if d != own {
            return Err(RuntimeError::SchemaMismatch(format!(
                "rank {rank} digest {d:#018x} differs from local {own:#018x}"
            )));
        }
    }
    Ok(())
}

/// Row ranges per rank when `total` rows are split into `p` contiguous
/// chunks whose sizes differ by at most one, larger chunks first.
pub fn chunk_bounds(total: usize, p: usize) -> Vec<(usize, usize)> {
    let base = total / p;
    let extra = total % p;
    let mut start = 0;
    (0..p)
        .map(|r| {
            let len = base + usize::from(r < extra);
            let b = (start, start + len);
            start += len;
            b
        })
        .collect()
}

/// Splits `t` by destination, keeping row order within each destination.
pub fn partition_by(t: &Table, assign: &[usize], p: usize) -> Result<Vec<Table>> {
    if assign.len() != t.num_rows() {
        return Err(RuntimeError::InvalidAssignment(format!(
            "{} targets for {} rows",
            assign.len(),
            t.num_rows()
        )));
    }
    let mut idx: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (row, &dest) in assign.iter().enumerate() {
        if dest >= p {
            return Err(RuntimeError::InvalidAssignment(format!(
                "row {row} targets rank {dest} of {p}"
            )));
        }
        idx[dest].push(row);
    }
    let n = t.num_rows();
    idx.into_iter()
        .map(|rows| {
            if rows.len() == n {
                Ok(t.clone())
            } else {
                Ok(t.take(&rows)?)
            }
        })
        .collect()
}

/// Moves every row to its assigned rank and returns the received pieces in
/// source-rank order.
pub fn shuffle_parts(comm: &mut Communicator, t: &Table, assign: &[usize]) -> Result<Vec<Table>> {
    let p = comm.world_size();
    let me = comm.rank();
    comm.timed(|comm| {
        let mut parts = partition_by(t, assign, p)?;
        let digest = schema_digest(t.schema());
        let payloads: Vec<Vec<u8>> = parts
            .iter()
            .enumerate()
            .map(|(d, part)| {
                if d == me {
                    Vec::new()
                } else {
                    serialize_table(part)
                }
            })
            .collect();
        let counts: Vec<Vec<u8>> = payloads
            .iter()
            .map(|b| encode_u64s(&[b.len() as u64, digest]))
            .collect();
        let got = comm.all_to_all(counts)?;
        let mut expected = vec![0u64; p];
        let mut digests = Vec::with_capacity(p);
        for (s, b) in got.iter().enumerate() {
            let v = decode_u64s(b)?;
            if v.len() != 2 {
                return Err(RuntimeError::Comm(bspf_comm::CommError::BadFrame(
                    "counts payload".into(),
                )));
            }
            expected[s] = v[0];
            digests.push((s, v[1]));
        }
        check_digests(digest, digests)?;
        let received = comm.all_to_all(payloads)?;
        let own = std::mem::replace(&mut parts[me], Table::empty(t.schema_ref().clone()));
        let mut out = Vec::with_capacity(p);
        let mut own = Some(own);
        for (s, bytes) in received.into_iter().enumerate() {
            if s == me {
                out.push(own.take().unwrap());
                continue;
            }
            if bytes.len() as u64 != expected[s] {
                return Err(RuntimeError::Comm(bspf_comm::CommError::BadFrame(format!(
                    "rank {s} announced {} bytes, sent {}",
                    expected[s],
                    bytes.len()
                ))));
            }
            out.push(deserialize_table(&bytes)?);
        }
        Ok(out)
    })
}

/// Rows from every source rank destined here, concatenated in source-rank
/// order with within-source order preserved.
pub fn shuffle_table(comm: &mut Communicator, t: &Table, assign: &[usize]) -> Result<Table> {
    let parts = shuffle_parts(comm, t, assign)?;
    Ok(concat_parts(t.schema_ref().clone(), parts)?)
}

fn concat_parts(schema: Arc<Schema>, mut parts: Vec<Table>) -> bspf_core::Result<Table> {
    if parts.len() == 1 {
        return Ok(parts.pop().unwrap());
    }
    Table::concat_with_schema(schema, &parts)
}

/// Rank-order concatenation at `root`; an empty table with the local schema
/// elsewhere.
pub fn gather_table(comm: &mut Communicator, t: &Table, root: usize) -> Result<Table> {
    comm.timed(|comm| {
        let me = comm.rank();
        let digest = schema_digest(t.schema());
        let payload = if me == root {
            Vec::new()
        } else {
            serialize_table(t)
        };
        let got = comm.gather(payload, root)?;
        if me != root {
            return Ok(Table::empty(t.schema_ref().clone()));
        }
        let mut parts = Vec::with_capacity(got.len());
        for (s, bytes) in got.into_iter().enumerate() {
            if s == me {
                parts.push(t.clone());
                continue;
            }
            let part = deserialize_table(&bytes)?;
            check_digests(digest, [(s, schema_digest(part.schema()))])?;
            parts.push(part);
        }
        Ok(concat_parts(t.schema_ref().clone(), parts)?)
    })
}

/// Every rank receives the concatenation of all ranks' tables.
pub fn allgather_table(comm: &mut Communicator, t: &Table) -> Result<Table> {
    comm.timed(|comm| {
        let me = comm.rank();
        let digest = schema_digest(t.schema());
        let got = comm.allgather(serialize_table(t))?;
        let mut parts = Vec::with_capacity(got.len());
        for (s, bytes) in got.into_iter().enumerate() {
            if s == me {
                parts.push(t.clone());
                continue;
            }
            let part = deserialize_table(&bytes)?;
            check_digests(digest, [(s, schema_digest(part.schema()))])?;
            parts.push(part);
        }
        Ok(concat_parts(t.schema_ref().clone(), parts)?)
    })
}

/// The root's table on every rank. Non-root inputs are ignored.
pub fn broadcast_table(comm: &mut Communicator, t: &Table, root: usize) -> Result<Table> {
    comm.timed(|comm| {
        let me = comm.rank();
        let payload = if me == root {
            serialize_table(t)
        } else {
            Vec::new()
        };
        let bytes = comm.broadcast(payload, root)?;
        if me == root {
            Ok(t.clone())
        } else {
            Ok(deserialize_table(&bytes)?)
        }
    })
}

/// Allgathered row counts, in rank order.
pub fn allgather_lengths(comm: &mut Communicator, n: usize) -> Result<Vec<usize>> {
    let got = comm.allgather((n as u64).to_le_bytes().to_vec())?;
    got.iter()
        .map(|b| Ok(decode_u64s(b)?.first().copied().unwrap_or(0) as usize))
        .collect()
}

/// Rebalances so rank `r` holds the `r`-th contiguous chunk of the global
/// rank-major row sequence, with chunk sizes differing by at most one.
pub fn repartition_even(comm: &mut Communicator, t: &Table) -> Result<Table> {
    comm.timed(|comm| {
        let p = comm.world_size();
        let lens = allgather_lengths(comm, t.num_rows())?;
        let total: usize = lens.iter().sum();
        let offset: usize = lens[..comm.rank()].iter().sum();
        let bounds = chunk_bounds(total, p);
        let mut assign = Vec::with_capacity(t.num_rows());
        let mut dest = 0;
        for g in offset..offset + t.num_rows() {
            while g >= bounds[dest].1 {
                dest += 1;
            }
            assign.push(dest);
        }
        shuffle_table(comm, t, &assign)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceiling_split() {
        let lens: Vec<usize> = chunk_bounds(10, 4).iter().map(|(a, b)| b - a).collect();
        assert_eq!(lens, vec![3, 3, 2, 2]);
        assert_eq!(chunk_bounds(0, 3), vec![(0, 0); 3]);
        assert_eq!(chunk_bounds(5, 1), vec![(0, 5)]);
    }

    #[test]
    fn partition_rejects_bad_targets() {
        let t = Table::try_new(
            Schema::from_pairs([("a", bspf_core::Domain::Int64)]).unwrap(),
            vec![bspf_core::Column::from_i64(vec![1, 2])],
        )
        .unwrap();
        assert!(partition_by(&t, &[0], 2).is_err());
        assert!(partition_by(&t, &[0, 2], 2).is_err());
        let parts = partition_by(&t, &[1, 0], 2).unwrap();
        assert_eq!(parts[0].column(0).i64_values().unwrap(), &[2]);
        assert_eq!(parts[1].column(0).i64_values().unwrap(), &[1]);
    }
}
