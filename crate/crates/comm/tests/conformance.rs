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

use bspf_comm::Backend;
use bspf_testkit::conformance::run_conformance;

const PS: [usize; 5] = [1, 2, 3, 4, 8];

fn suite(backend: Backend) {
    let mut total = 0;
    for (i, p) in PS.into_iter().enumerate() {
        total += run_conformance(backend, p, 60, 0xC0FFEE + i as u64).unwrap();
    }
    assert_eq!(total, 300);
}

#[test]
fn inproc_matches_mailbox() {
    suite(Backend::InProcess);
}

#[test]
fn tcp_matches_mailbox() {
    suite(Backend::Tcp);
}
