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

use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use crate::config::WorldConfig;
use crate::error::{CommError, Result};
use crate::frame::Frame;
use crate::transport::{Event, Transport};

struct Group {
    world: usize,
    slots: Vec<Option<Sender<Event>>>,
    complete: bool,
    live: usize,
}

type Registry = (Mutex<HashMap<String, Group>>, Condvar);

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| (Mutex::new(HashMap::new()), Condvar::new()))
}

pub(crate) struct InProcTransport {
    rank: usize,
    namespace: String,
    peers: Vec<Sender<Event>>,
    rx: Receiver<Event>,
}

/// Registers in the process-wide registry and blocks until the whole world
/// has arrived.
pub(crate) fn connect(cfg: &WorldConfig) -> Result<InProcTransport> {
    let (tx, rx) = channel();
    let (lock, cv) = registry();
    let mut reg = lock.lock().unwrap_or_else(|e| e.into_inner());
    let group = reg.entry(cfg.namespace.clone()).or_insert_with(|| Group {
        world: cfg.world_size,
        slots: (0..cfg.world_size).map(|_| None).collect(),
        complete: false,
        live: 0,
    });
    if group.world != cfg.world_size {
        return Err(CommError::WorldSizeMismatch {
            registered: group.world,
            requested: cfg.world_size,
        });
    }
    if group.complete || group.slots[cfg.rank].is_some() {
        return Err(CommError::DuplicateRank {
            namespace: cfg.namespace.clone(),
            rank: cfg.rank,
        });
    }
    group.slots[cfg.rank] = Some(tx);
    if group.slots.iter().all(Option::is_some) {
        group.complete = true;
        group.live = group.world;
        cv.notify_all();
    }
    let deadline = Instant::now() + cfg.timeout;
    loop {
        let group = reg
            .get_mut(&cfg.namespace)
            .expect("group held by a waiting rank");
        if group.complete {
            let peers = group.slots.iter().map(|s| s.clone().unwrap()).collect();
            return Ok(InProcTransport {
                rank: cfg.rank,
                namespace: cfg.namespace.clone(),
                peers,
                rx,
            });
        }
        let now = Instant::now();
        if now >= deadline {
            group.slots[cfg.rank] = None;
            let joined = group.slots.iter().filter(|s| s.is_some()).count();
            if joined == 0 {
                reg.remove(&cfg.namespace);
            }
            return Err(CommError::RendezvousTimeout {
                namespace: cfg.namespace.clone(),
                joined: joined + 1,
                expected: cfg.world_size,
            });
        }
        reg = cv
            .wait_timeout(reg, deadline - now)
            .unwrap_or_else(|e| e.into_inner())
            .0;
    }
}

impl Transport for InProcTransport {
    fn send(&mut self, dest: usize, frame: Frame) -> Result<()> {
        self.peers[dest]
            .send(Event::Frame(frame))
            .map_err(|_| CommError::PeerFailure { rank: dest })
    }

    fn poll(&mut self, wait: Duration) -> Option<Event> {
        match self.rx.recv_timeout(wait) {
            Ok(ev) => Some(ev),
            Err(RecvTimeoutError::Timeout) => None,
            Err(RecvTimeoutError::Disconnected) => {
                std::thread::sleep(wait);
                None
            }
        }
    }
}

impl Drop for InProcTransport {
    fn drop(&mut self) {
        for (r, p) in self.peers.iter().enumerate() {
            if r != self.rank {
                let _ = p.send(Event::Closed(self.rank));
            }
        }
        let (lock, _) = registry();
        let mut reg = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(g) = reg.get_mut(&self.namespace) {
            g.live = g.live.saturating_sub(1);
            if g.live == 0 {
                reg.remove(&self.namespace);
            }
        }
    }
}
