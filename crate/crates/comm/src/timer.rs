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

use std::time::{Duration, Instant};

/// Accumulated communication and computation time for one worker.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommTimer {
    comm: Duration,
    comp: Duration,
}

impl CommTimer {
    pub fn comm(&self) -> Duration {
        self.comm
    }

    pub fn comp(&self) -> Duration {
        self.comp
    }

    pub fn add_comm(&mut self, d: Duration) {
        self.comm += d;
    }

    pub fn add_comp(&mut self, d: Duration) {
        self.comp += d;
    }

    pub fn reset(&mut self) {
        *self = CommTimer::default();
    }

    /// Difference `self - earlier`, for per-stage breakdowns.
    pub fn since(&self, earlier: &CommTimer) -> CommTimer {
        CommTimer {
            comm: self.comm.saturating_sub(earlier.comm),
            comp: self.comp.saturating_sub(earlier.comp),
        }
    }
}

/// Runs `f`, adding its wall time to the computation bucket.
pub fn time_comp<T>(timer: &mut CommTimer, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let r = f();
    timer.add_comp(t0.elapsed());
    r
}
