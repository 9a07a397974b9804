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

use std::time::Instant;

use bspf_comm::{CommTimer, Communicator};

use crate::store::Store;

/// Per-worker context handed to every submitted function. Valid only for the
/// duration of that call.
pub struct ExecEnv<'a> {
    comm: &'a mut Communicator,
    store: Store,
    seed: u64,
    markers: Vec<(&'static str, Instant)>,
}

impl<'a> ExecEnv<'a> {
    pub fn new(comm: &'a mut Communicator, store: Store, seed: u64) -> Self {
        ExecEnv {
            comm,
            store,
            seed,
            markers: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.comm.rank()
    }

    pub fn world_size(&self) -> usize {
        self.comm.world_size()
    }

    pub fn comm(&mut self) -> &mut Communicator {
        self.comm
    }

    /// Identity of the underlying communicator; stable across submissions on
    /// one executor.
    pub fn comm_id(&self) -> u64 {
        self.comm.id()
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Seed shared by all ranks of the application.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn timer(&self) -> CommTimer {
        *self.comm.timer()
    }

    pub fn reset_timer(&mut self) {
        self.comm.timer_mut().reset();
    }

    /// Runs local work, charging its wall time to computation.
    pub fn compute<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let r = f();
        self.comm.timer_mut().add_comp(t0.elapsed());
        r
    }

    /// Records a named point in time, used to prove what a timing excludes.
    pub fn mark(&mut self, label: &'static str) {
        self.markers.push((label, Instant::now()));
    }

    pub fn markers(&self) -> &[(&'static str, Instant)] {
        &self.markers
    }

    pub fn marker(&self, label: &str) -> Option<Instant> {
        self.markers
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, t)| *t)
    }
}
