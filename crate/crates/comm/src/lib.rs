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

//! Collective communication for a fixed world of ranks.
//!
//! A [`Communicator`] offers point-to-point send/recv and the collectives
//! barrier, all-to-all, gather, allgather, broadcast and allreduce over one
//! of two interchangeable transports: in-process mailboxes or a TCP full mesh
//! bootstrapped through a [`RendezvousServer`].

mod communicator;
mod config;
mod error;
pub mod frame;
mod inproc;
pub mod rendezvous;
mod tcp;
mod timer;
mod transport;

pub use communicator::{Communicator, ReduceOp};
pub use config::{Backend, WorldConfig, DEFAULT_TIMEOUT};
pub use error::{CommError, Result};
pub use rendezvous::{RendezvousClient, RendezvousServer};
pub use timer::{time_comp, CommTimer};
