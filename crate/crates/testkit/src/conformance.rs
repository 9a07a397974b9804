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

//! Randomized comparison of every communicator operation with the mailbox
//! reference. All ranks derive the same plan and inputs from one seed, so no
//! coordination beyond the communicator itself is needed.

use std::time::Duration;

use bspf_comm::{Backend, Communicator, ReduceOp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::mailbox::{self, Bytes, Fold};
use crate::world::run_world;

#[derive(Clone, Copy, Debug)]
enum Op {
    SendRecv,
    Barrier,
    AllToAll,
    Gather,
    AllGather,
    Broadcast,
    AllReduce,
}

const OPS: [Op; 7] = [
    Op::SendRecv,
    Op::Barrier,
    Op::AllToAll,
    Op::Gather,
    Op::AllGather,
    Op::Broadcast,
    Op::AllReduce,
];

fn payload(seed: u64, case: usize, src: usize, dest: usize) -> Bytes {
    let mut r =
        StdRng::seed_from_u64(seed ^ ((case as u64) << 20) ^ ((src as u64) << 10) ^ dest as u64);
    let len = if r.gen_bool(0.05) {
        r.gen_range(0..70_000)
    } else {
        r.gen_range(0..48)
    };
    (0..len).map(|_| r.gen()).collect()
}

/// Runs `cases` random operations on one world of size `p` and returns the
/// number of operations checked, or the first discrepancy.
pub fn run_conformance(
    backend: Backend,
    p: usize,
    cases: usize,
    seed: u64,
) -> Result<usize, String> {
    let results = run_world(backend, p, Duration::from_secs(30), |mut comm| {
        run_rank(&mut comm, p, cases, seed)
    });
    let mut checked = 0;
    for (rank, r) in results.into_iter().enumerate() {
        checked = r.map_err(|e| format!("{backend} p={p} rank {rank}: {e}"))?;
    }
    Ok(checked)
}

fn run_rank(comm: &mut Communicator, p: usize, cases: usize, seed: u64) -> Result<usize, String> {
    let me = comm.rank();
    let mut plan = StdRng::seed_from_u64(seed);
    for case in 0..cases {
        let op = OPS[plan.gen_range(0..OPS.len())];
        let root = plan.gen_range(0..p);
        let err = |e: bspf_comm::CommError| format!("case {case} {op:?}: {e}");
        let fail = |what: &str| Err(format!("case {case} {op:?} root {root}: {what}"));
        match op {
            Op::SendRecv => {
                if p == 1 {
                    continue;
                }
                let shift = plan.gen_range(1..p);
                let count = plan.gen_range(1..4);
                let tag = plan.gen_range(0..3u32);
                let dest = (me + shift) % p;
                let src = (me + p - shift) % p;
                for k in 0..count {
                    comm.send(dest, tag, &payload(seed, case * 8 + k, me, dest))
                        .map_err(err)?;
                }
                for k in 0..count {
                    let got = comm.recv(src, tag).map_err(err)?;
                    if got != payload(seed, case * 8 + k, src, me) {
                        return fail("p2p payload differs or arrived out of order");
                    }
                }
            }
            Op::Barrier => comm.barrier().map_err(err)?,
            Op::AllToAll => {
                let inputs: Vec<Vec<Bytes>> = (0..p)
                    .map(|s| (0..p).map(|d| payload(seed, case, s, d)).collect())
                    .collect();
                let want = mailbox::all_to_all(&inputs);
                let got = comm.all_to_all(inputs[me].clone()).map_err(err)?;
                if got != want[me] {
                    return fail("all_to_all differs from mailbox");
                }
            }
            Op::Gather => {
                let inputs: Vec<Bytes> = (0..p).map(|s| payload(seed, case, s, 0)).collect();
                let want = mailbox::gather(&inputs, root);
                if comm.gather(inputs[me].clone(), root).map_err(err)? != want[me] {
                    return fail("gather differs from mailbox");
                }
            }
            Op::AllGather => {
                let inputs: Vec<Bytes> = (0..p).map(|s| payload(seed, case, s, 0)).collect();
                let want = mailbox::allgather(&inputs);
                if comm.allgather(inputs[me].clone()).map_err(err)? != want[me] {
                    return fail("allgather differs from mailbox");
                }
            }
            Op::Broadcast => {
                let inputs: Vec<Bytes> = (0..p).map(|s| payload(seed, case, s, 0)).collect();
                let want = mailbox::broadcast(&inputs, root);
                if comm.broadcast(inputs[me].clone(), root).map_err(err)? != want[me] {
                    return fail("broadcast differs from mailbox");
                }
            }
            Op::AllReduce => {
                let (op, fold) = [
                    (ReduceOp::Sum, Fold::Sum),
                    (ReduceOp::Min, Fold::Min),
                    (ReduceOp::Max, Fold::Max),
                ][plan.gen_range(0..3)];
                let inputs: Vec<i64> = (0..p)
                    .map(|s| {
                        let mut r = StdRng::seed_from_u64(seed ^ case as u64 ^ ((s as u64) << 32));
                        if r.gen_bool(0.1) {
                            r.gen()
                        } else {
                            r.gen_range(-1000..1000)
                        }
                    })
                    .collect();
                let want = mailbox::allreduce(&inputs, fold);
                if comm.allreduce_i64(inputs[me], op).map_err(err)? != want[me] {
                    return fail("allreduce differs from mailbox");
                }
            }
        }
    }
    Ok(cases)
}
