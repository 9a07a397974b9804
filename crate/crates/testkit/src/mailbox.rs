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

//! Single-threaded reference semantics of the collectives. Each function
//! takes every rank's input and returns every rank's expected output.

pub type Bytes = Vec<u8>;

/// `out[j][i] = inputs[i][j]`.
pub fn all_to_all(inputs: &[Vec<Bytes>]) -> Vec<Vec<Bytes>> {
    let p = inputs.len();
    let mut mailboxes: Vec<Vec<Bytes>> = vec![Vec::with_capacity(p); p];
    for (src, outgoing) in inputs.iter().enumerate() {
        assert_eq!(outgoing.len(), p, "rank {src} supplied wrong slot count");
        for (dest, msg) in outgoing.iter().enumerate() {
            mailboxes[dest].push(msg.clone());
        }
    }
    mailboxes
}

pub fn gather(inputs: &[Bytes], root: usize) -> Vec<Vec<Bytes>> {
    (0..inputs.len())
        .map(|r| {
            if r == root {
                inputs.to_vec()
            } else {
                Vec::new()
            }
        })
        .collect()
}

pub fn allgather(inputs: &[Bytes]) -> Vec<Vec<Bytes>> {
    vec![inputs.to_vec(); inputs.len()]
}

pub fn broadcast(inputs: &[Bytes], root: usize) -> Vec<Bytes> {
    vec![inputs[root].clone(); inputs.len()]
}

#[derive(Clone, Copy, Debug)]
pub enum Fold {
    Sum,
    Min,
    Max,
}

pub fn allreduce(inputs: &[i64], op: Fold) -> Vec<i64> {
    let v = match op {
        Fold::Sum => inputs.iter().fold(0i64, |a, b| a.wrapping_add(*b)),
        Fold::Min => *inputs.iter().min().unwrap(),
        Fold::Max => *inputs.iter().max().unwrap(),
    };
    vec![v; inputs.len()]
}
