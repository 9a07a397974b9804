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

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::config::{Backend, WorldConfig};
use crate::error::{CommError, Result};
use crate::frame::{Frame, Opcode};
use crate::inproc;
use crate::tcp;
use crate::timer::CommTimer;
use crate::transport::{Event, Transport};

const SLICE: Duration = Duration::from_millis(20);
const EPOCH_SHIFT: u32 = 24;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Min,
    Max,
}

impl ReduceOp {
    fn tag(self) -> u32 {
        self as u32
    }

    pub fn fold(self, values: impl IntoIterator<Item = i64>) -> Option<i64> {
        values.into_iter().reduce(|a, b| match self {
            ReduceOp::Sum => a.wrapping_add(b),
            ReduceOp::Min => a.min(b),
            ReduceOp::Max => a.max(b),
        })
    }
}

enum Want {
    P2P { tag: u32 },
    Coll { op: Opcode, seq: u32, tag: u32 },
}

/// A connected member of a world. Confined to one thread; every call blocks
/// until it completes, fails, or times out.
///
/// Collectives are matched across ranks by a sequence number carried in each
/// frame together with the opcode, so ranks disagreeing about which
/// collective comes next get [`CommError::ProtocolMismatch`].
pub struct Communicator {
    rank: usize,
    world: usize,
    backend: Backend,
    namespace: String,
    timeout: Duration,
    id: u64,
    transport: Box<dyn Transport>,
    epoch: u32,
    seq: u32,
    pending: Vec<Frame>,
    closed: Vec<bool>,
    timer: CommTimer,
    depth: u32,
    abort: Option<Arc<AtomicBool>>,
}

impl std::fmt::Debug for Communicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Communicator")
            .field("rank", &self.rank)
            .field("world", &self.world)
            .field("backend", &self.backend)
            .field("namespace", &self.namespace)
            .field("id", &self.id)
            .finish()
    }
}

impl Communicator {
    /// Joins the world described by `cfg`. Returns only once every rank has
    /// registered.
    pub fn init(cfg: &WorldConfig) -> Result<Communicator> {
        cfg.validate()?;
        let transport: Box<dyn Transport> = match cfg.backend {
            Backend::InProcess => Box::new(inproc::connect(cfg)?),
            Backend::Tcp => Box::new(tcp::connect(cfg)?),
        };
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        log::debug!(
            "rank {}/{} joined {} via {} (id {id})",
            cfg.rank,
            cfg.world_size,
            cfg.namespace,
            cfg.backend
        );
        Ok(Communicator {
            rank: cfg.rank,
            world: cfg.world_size,
            backend: cfg.backend,
            namespace: cfg.namespace.clone(),
            timeout: cfg.timeout,
            id,
            transport,
            epoch: 0,
            seq: 0,
            pending: Vec::new(),
            closed: vec![false; cfg.world_size],
            timer: CommTimer::default(),
            depth: 0,
            abort: None,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn world_size(&self) -> usize {
        self.world
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    /// Process-unique identity of this handle.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    /// Installs a flag that makes blocked receives fail with
    /// [`CommError::Aborted`] once set.
    pub fn set_abort_flag(&mut self, flag: Option<Arc<AtomicBool>>) {
        self.abort = flag;
    }

    pub fn timer(&self) -> &CommTimer {
        &self.timer
    }

    pub fn timer_mut(&mut self) -> &mut CommTimer {
        &mut self.timer
    }

    /// Runs `f` as one communication section. Nested sections count once.
    pub fn timed<T>(&mut self, f: impl FnOnce(&mut Self) -> T) -> T {
        self.depth += 1;
        let t0 = Instant::now();
        let r = f(self);
        self.depth -= 1;
        if self.depth == 0 {
            self.timer.add_comm(t0.elapsed());
        }
        r
    }

    fn check_peer(&self, peer: usize) -> Result<()> {
        if peer >= self.world || peer == self.rank {
            return Err(CommError::InvalidRank {
                rank: peer,
                world: self.world,
            });
        }
        Ok(())
    }

    fn next_seq(&mut self) -> u32 {
        self.seq = self.seq.wrapping_add(1);
        (self.epoch << EPOCH_SHIFT) | (self.seq & ((1 << EPOCH_SHIFT) - 1))
    }

    fn frame_epoch(seq: u32) -> u32 {
        seq >> EPOCH_SHIFT
    }

    fn emit(
        &mut self,
        dest: usize,
        opcode: Opcode,
        seq: u32,
        tag: u32,
        payload: Vec<u8>,
    ) -> Result<()> {
        let frame = Frame {
            opcode,
            seq,
            src: self.rank as u32,
            tag,
            payload,
        };
        self.transport.send(dest, frame)
    }

    /// Finds the wanted frame among buffered ones. Frames from an older epoch
    /// are dropped on the way.
    fn take_pending(&mut self, src: usize, want: &Want) -> Result<Option<Vec<u8>>> {
        let epoch = self.epoch & 0xFF;
        let mut i = 0;
        while i < self.pending.len() {
            let f = &self.pending[i];
            if f.src as usize != src {
                i += 1;
                continue;
            }
            let fe = Self::frame_epoch(f.seq);
            if fe != epoch {
                // A peer that already recovered may be one epoch ahead.
                if fe == (epoch + 1) & 0xFF {
                    i += 1;
                } else {
                    self.pending.remove(i);
                }
                continue;
            }
            match *want {
                Want::P2P { tag } => {
                    if f.opcode == Opcode::P2P && f.tag == tag {
                        return Ok(Some(self.pending.remove(i).payload));
                    }
                }
                Want::Coll { op, seq, tag } => {
                    if f.opcode != Opcode::P2P && f.seq <= seq {
                        if f.seq == seq && f.opcode == op && f.tag == tag {
                            return Ok(Some(self.pending.remove(i).payload));
                        }
                        return Err(CommError::ProtocolMismatch(format!(
                            "rank {} expected {}#{} (arg {}) from rank {src}, got {}#{} (arg {})",
                            self.rank,
                            op.name(),
                            seq,
                            tag,
                            f.opcode.name(),
                            f.seq,
                            f.tag
                        )));
                    }
                }
            }
            i += 1;
        }
        Ok(None)
    }

    fn wait_for(&mut self, src: usize, want: Want, op: &'static str) -> Result<Vec<u8>> {
        self.wait_for_with(src, want, op, self.timeout, true)
    }

    fn wait_for_with(
        &mut self,
        src: usize,
        want: Want,
        op: &'static str,
        timeout: Duration,
        abortable: bool,
    ) -> Result<Vec<u8>> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(p) = self.take_pending(src, &want)? {
                return Ok(p);
            }
            if self.closed[src] {
                return Err(CommError::PeerFailure { rank: src });
            }
            if abortable
                && self
                    .abort
                    .as_ref()
                    .is_some_and(|a| a.load(Ordering::SeqCst))
            {
                return Err(CommError::Aborted);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(CommError::Timeout { op, peer: src });
            }
            let mut next = self.transport.poll(SLICE.min(deadline - now));
            while let Some(ev) = next {
                match ev {
                    Event::Frame(f) => self.pending.push(f),
                    Event::Closed(r) => self.closed[r] = true,
                }
                next = self.transport.poll(Duration::ZERO);
            }
        }
    }

    /// Sends `payload` to `dest`. Messages with the same `(dest, tag)` arrive
    /// in send order.
    pub fn send(&mut self, dest: usize, tag: u32, payload: &[u8]) -> Result<()> {
        self.check_peer(dest)?;
        let seq = (self.epoch & 0xFF) << EPOCH_SHIFT;
        self.timed(|c| c.emit(dest, Opcode::P2P, seq, tag, payload.to_vec()))
    }

    pub fn recv(&mut self, src: usize, tag: u32) -> Result<Vec<u8>> {
        self.check_peer(src)?;
        self.timed(|c| c.wait_for(src, Want::P2P { tag }, "recv"))
    }

    pub fn barrier(&mut self) -> Result<()> {
        let t = self.timeout;
        self.timed(|c| c.barrier_with(t, true))
    }

    fn barrier_with(&mut self, timeout: Duration, abortable: bool) -> Result<()> {
        if self.world == 1 {
            return Ok(());
        }
        let seq = self.next_seq();
        let want = || Want::Coll {
            op: Opcode::Barrier,
            seq,
            tag: 0,
        };
        if self.rank == 0 {
            for r in 1..self.world {
                self.wait_for_with(r, want(), "barrier", timeout, abortable)?;
            }
            for r in 1..self.world {
                self.emit(r, Opcode::Barrier, seq, 0, Vec::new())?;
            }
        } else {
            self.emit(0, Opcode::Barrier, seq, 0, Vec::new())?;
            self.wait_for_with(0, want(), "barrier", timeout, abortable)?;
        }
        Ok(())
    }

    /// `outgoing[d]` goes to rank `d`; slot `s` of the result came from rank
    /// `s`. The own slot is moved, not sent.
    pub fn all_to_all(&mut self, outgoing: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>> {
        if outgoing.len() != self.world {
            return Err(CommError::InvalidConfig(format!(
                "all_to_all needs {} slots, got {}",
                self.world,
                outgoing.len()
            )));
        }
        self.timed(|c| c.exchange(Opcode::AllToAll, 0, outgoing))
    }

    fn exchange(&mut self, op: Opcode, tag: u32, outgoing: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>> {
        let seq = self.next_seq();
        let mut result: Vec<Vec<u8>> = vec![Vec::new(); self.world];
        for (d, payload) in outgoing.into_iter().enumerate() {
            if d == self.rank {
                result[d] = payload;
            } else {
                self.emit(d, op, seq, tag, payload)?;
            }
        }
        for (s, slot) in result.iter_mut().enumerate() {
            if s != self.rank {
                *slot = self.wait_for(s, Want::Coll { op, seq, tag }, op.name())?;
            }
        }
        Ok(result)
    }

    /// Root receives every payload in rank order; other ranks get an empty
    /// vector.
    pub fn gather(&mut self, payload: Vec<u8>, root: usize) -> Result<Vec<Vec<u8>>> {
        self.check_root(root)?;
        self.timed(|c| {
            let seq = c.next_seq();
            let tag = root as u32;
            if c.rank != root {
                c.emit(root, Opcode::Gather, seq, tag, payload)?;
                return Ok(Vec::new());
            }
            let mut out = Vec::with_capacity(c.world);
            let mut own = Some(payload);
            for s in 0..c.world {
                if s == root {
                    out.push(own.take().unwrap());
                } else {
                    let op = Opcode::Gather;
                    out.push(c.wait_for(s, Want::Coll { op, seq, tag }, "gather")?);
                }
            }
            Ok(out)
        })
    }

    pub fn allgather(&mut self, payload: Vec<u8>) -> Result<Vec<Vec<u8>>> {
        self.timed(|c| {
            let outgoing = vec![payload; c.world];
            c.exchange(Opcode::AllGather, 0, outgoing)
        })
    }

    /// Every rank returns the root's payload; non-root inputs are ignored.
    pub fn broadcast(&mut self, payload: Vec<u8>, root: usize) -> Result<Vec<u8>> {
        self.check_root(root)?;
        self.timed(|c| {
            let seq = c.next_seq();
            let tag = root as u32;
            if c.rank == root {
                for d in 0..c.world {
                    if d != root {
                        c.emit(d, Opcode::Broadcast, seq, tag, payload.clone())?;
                    }
                }
                Ok(payload)
            } else {
                let op = Opcode::Broadcast;
                c.wait_for(root, Want::Coll { op, seq, tag }, "broadcast")
            }
        })
    }

    pub fn allreduce_i64(&mut self, value: i64, op: ReduceOp) -> Result<i64> {
        self.timed(|c| {
            let outgoing = vec![value.to_le_bytes().to_vec(); c.world];
            let parts = c.exchange(Opcode::AllReduce, op.tag(), outgoing)?;
            let mut vals = Vec::with_capacity(parts.len());
            for p in parts {
                let b: [u8; 8] = p
                    .as_slice()
                    .try_into()
                    .map_err(|_| CommError::BadFrame("allreduce payload is not 8 bytes".into()))?;
                vals.push(i64::from_le_bytes(b));
            }
            Ok(op.fold(vals).expect("world is nonempty"))
        })
    }

    fn check_root(&self, root: usize) -> Result<()> {
        if root >= self.world {
            return Err(CommError::InvalidRank {
                rank: root,
                world: self.world,
            });
        }
        Ok(())
    }

    /// Resynchronizes after a failed collective. Every rank must call this
    /// the same number of times. Frames from before the call are discarded and
    /// a barrier is attempted within `timeout`.
    pub fn recover(&mut self, timeout: Duration) -> Result<()> {
        self.epoch = self.epoch.wrapping_add(1);
        self.seq = 0;
        let epoch = self.epoch & 0xFF;
        self.pending.retain(|f| Self::frame_epoch(f.seq) == epoch);
        self.depth = 0;
        self.barrier_with(timeout, false)
    }
}
