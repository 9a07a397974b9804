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

use std::time::Duration;

use crate::error::Result;
use crate::frame::Frame;

pub(crate) enum Event {
    Frame(Frame),
    /// The peer with this rank will send nothing more.
    Closed(usize),
}

/// Point-to-point byte transport underneath a communicator. Every incoming
/// frame from any peer arrives through one queue.
pub(crate) trait Transport: Send {
    fn send(&mut self, dest: usize, frame: Frame) -> Result<()>;

    /// Waits up to `wait` for the next event.
    fn poll(&mut self, wait: Duration) -> Option<Event>;
}
