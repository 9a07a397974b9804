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

//! Spawning whole worlds of communicators on threads.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::Duration;

use bspf_comm::{Backend, Communicator, RendezvousServer, WorldConfig};

/// Address of a rendezvous server shared by every test in the process.
pub fn shared_rendezvous() -> String {
    static SERVER: OnceLock<RendezvousServer> = OnceLock::new();
    SERVER
        .get_or_init(|| RendezvousServer::start("127.0.0.1:0").expect("start rendezvous"))
        .addr()
        .to_string()
}

pub fn unique_namespace(prefix: &str) -> String {
    static N: AtomicU64 = AtomicU64::new(0);
    format!(
        "{prefix}-{}-{}",
        std::process::id(),
        N.fetch_add(1, Ordering::Relaxed)
    )
}

pub fn world_configs(backend: Backend, p: usize, ns: &str, timeout: Duration) -> Vec<WorldConfig> {
    (0..p)
        .map(|r| {
            let mut c = WorldConfig::new(p, r, backend)
                .with_namespace(ns)
                .with_timeout(timeout);
            if backend == Backend::Tcp {
                c = c.with_rendezvous(shared_rendezvous());
            }
            c
        })
        .collect()
}

/// Runs `f` on `p` freshly connected ranks, one thread each, and returns the
/// results in rank order.
pub fn run_world<T, F>(backend: Backend, p: usize, timeout: Duration, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Communicator) -> T + Sync,
{
    let ns = unique_namespace("world");
    let cfgs = world_configs(backend, p, &ns, timeout);
    std::thread::scope(|s| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| {
                let f = &f;
                s.spawn(move || f(Communicator::init(cfg).expect("init communicator")))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank panicked"))
            .collect()
    })
}
