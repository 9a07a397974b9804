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

//! Named, partitioned tables retained across applications.
//!
//! Entries are written collectively by a producer and read collectively by a
//! consumer whose parallelism may differ; a consumer with a different world
//! size sees the producer's rows in an even, order-preserving split.

use std::collections::HashMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use bspf_comm::ReduceOp;
use bspf_core::ipc::{deserialize_table, read_file, schema_digest, serialize_table, write_file};
use bspf_core::{Schema, Table};
use serde::{Deserialize, Serialize};

use crate::env::ExecEnv;
use crate::error::{Result, RuntimeError};
use crate::table_comm::chunk_bounds;

#[derive(Clone, Debug)]
pub struct StoreEntry {
    pub name: String,
    pub schema: Arc<Schema>,
    /// One table per producer rank.
    pub partitions: Vec<Table>,
    pub created: SystemTime,
}

impl StoreEntry {
    pub fn world_size(&self) -> usize {
        self.partitions.len()
    }

    pub fn num_rows(&self) -> usize {
        self.partitions.iter().map(Table::num_rows).sum()
    }

    /// Rank `rank`'s share for a consumer of size `p`: the producer's own
    /// partition when sizes match, else the `rank`-th even chunk of the
    /// rank-major row sequence.
    pub fn share(&self, rank: usize, p: usize) -> Result<Table> {
        if p == self.world_size() {
            return Ok(self.partitions[rank].clone());
        }
        let (lo, hi) = chunk_bounds(self.num_rows(), p)[rank];
        let mut pieces = Vec::new();
        let mut offset = 0;
        for part in &self.partitions {
            let n = part.num_rows();
            let (a, b) = (lo.max(offset), hi.min(offset + n));
            if a < b {
                pieces.push(part.slice(a - offset, b - a)?);
            }
            offset += n;
        }
        Ok(Table::concat_with_schema(self.schema.clone(), &pieces)?)
    }

    pub fn gathered(&self) -> Result<Table> {
        Ok(Table::concat_with_schema(
            self.schema.clone(),
            &self.partitions,
        )?)
    }
}

pub trait StoreBackend: Send + Sync {
    /// Makes `entry` visible in one step, replacing any previous version.
    fn commit(&self, entry: StoreEntry) -> Result<()>;
    /// Blocks until `name` exists or `timeout` passes.
    fn fetch(&self, name: &str, timeout: Duration) -> Result<Arc<StoreEntry>>;
    fn remove(&self, name: &str) -> Result<()>;
    fn names(&self) -> Result<Vec<String>>;
}

#[derive(Clone)]
pub struct Store(Arc<dyn StoreBackend>);

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Store")
    }
}

impl Store {
    pub fn new(backend: Arc<dyn StoreBackend>) -> Self {
        Store(backend)
    }

    pub fn memory() -> Self {
        Store(Arc::new(MemoryStore::default()))
    }

    /// Entries spilled under `<dir>/<namespace>/`.
    pub fn spill(dir: impl AsRef<Path>, namespace: &str) -> Result<Self> {
        Ok(Store(Arc::new(SpillStore::open(dir, namespace)?)))
    }

    pub fn backend(&self) -> &dyn StoreBackend {
        &*self.0
    }

    pub fn fetch(&self, name: &str, timeout: Duration) -> Result<Arc<StoreEntry>> {
        check_name(name)?;
        self.0.fetch(name, timeout)
    }

    /// Idempotent.
    pub fn drop_entry(&self, name: &str) -> Result<()> {
        check_name(name)?;
        self.0.remove(name)
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut v = self.0.names()?;
        v.sort();
        Ok(v)
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty()
        || name.starts_with('.')
        || name.contains(['/', '\\'])
        || name.contains(char::is_whitespace)
    {
        return Err(RuntimeError::Store(format!("invalid entry name {name:?}")));
    }
    Ok(())
}

/// Collective put. Every rank contributes its partition; the entry appears
/// once all partitions are in. Schemas must agree on every rank.
pub fn store_put(env: &mut ExecEnv<'_>, name: &str, t: &Table) -> Result<()> {
    check_name(name)?;
    let store = env.store().clone();
    let me = env.rank();
    let digest = schema_digest(t.schema());
    let comm = env.comm();
    comm.timed(|comm| {
        let lo = comm.allreduce_i64(digest as i64, ReduceOp::Min)?;
        let hi = comm.allreduce_i64(digest as i64, ReduceOp::Max)?;
        if lo != hi {
            return Err(RuntimeError::SchemaMismatch(format!(
                "partitions of {name:?} have different schemas"
            )));
        }
        let payload = if me == 0 {
            Vec::new()
        } else {
            serialize_table(t)
        };
        let got = comm.gather(payload, 0)?;
        let mut status = vec![0u8];
        if me == 0 {
            let mut parts = Vec::with_capacity(got.len());
            for (s, b) in got.into_iter().enumerate() {
                parts.push(if s == 0 {
                    t.clone()
                } else {
                    deserialize_table(&b)?
                });
            }
            let entry = StoreEntry {
                name: name.to_string(),
                schema: t.schema_ref().clone(),
                partitions: parts,
                created: SystemTime::now(),
            };
            if let Err(e) = store.backend().commit(entry) {
                log::error!("store commit of {name:?} failed: {e}");
                status[0] = 1;
            }
        }
        let status = comm.broadcast(status, 0)?;
        if status[0] != 0 {
            return Err(RuntimeError::Store(format!("commit of {name:?} failed")));
        }
        Ok(())
    })
}

/// Collective get. Blocks until the entry exists, then returns this rank's
/// share.
pub fn store_get(env: &mut ExecEnv<'_>, name: &str, timeout: Duration) -> Result<Table> {
    let entry = env.store().fetch(name, timeout)?;
    let (rank, p) = (env.rank(), env.world_size());
    env.compute(|| entry.share(rank, p))
}

#[derive(Default)]
pub struct MemoryStore {
    entries: Mutex<HashMap<String, Arc<StoreEntry>>>,
    changed: Condvar,
}

impl StoreBackend for MemoryStore {
    fn commit(&self, entry: StoreEntry) -> Result<()> {
        let mut m = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        m.insert(entry.name.clone(), Arc::new(entry));
        self.changed.notify_all();
        Ok(())
    }

    fn fetch(&self, name: &str, timeout: Duration) -> Result<Arc<StoreEntry>> {
        let deadline = Instant::now() + timeout;
        let mut m = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if let Some(e) = m.get(name) {
                return Ok(e.clone());
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(RuntimeError::Timeout(
                    timeout,
                    format!("store entry {name:?}"),
                ));
            }
            m = self
                .changed
                .wait_timeout(m, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    fn remove(&self, name: &str) -> Result<()> {
        self.entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .remove(name);
        Ok(())
    }

    fn names(&self) -> Result<Vec<String>> {
        Ok(self
            .entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect())
    }
}

const MANIFEST: &str = "manifest.json";
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Manifest {
    name: String,
    world_size: usize,
    schema_digest: u64,
    created_unix_ms: u64,
    /// Distinguishes versions of one name so readers detect a concurrent
    /// overwrite.
    token: u64,
}

/// Directory-backed store: `<dir>/<namespace>/<name>/part-<rank>.bspf` plus
/// a JSON manifest. Usable from several processes on one host.
pub struct SpillStore {
    root: PathBuf,
}

impl SpillStore {
    pub fn open(dir: impl AsRef<Path>, namespace: &str) -> Result<Self> {
        check_name(namespace)?;
        let root = dir.as_ref().join(namespace);
        fs::create_dir_all(&root)?;
        Ok(SpillStore { root })
    }

    fn unique(&self, what: &str, name: &str) -> PathBuf {
        static N: AtomicU64 = AtomicU64::new(0);
        let n = N.fetch_add(1, Ordering::Relaxed);
        self.root
            .join(format!(".{what}-{name}-{}-{n}", std::process::id()))
    }

    fn token(&self) -> u64 {
        static N: AtomicU64 = AtomicU64::new(0);
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_nanos() as u64;
        nanos ^ ((std::process::id() as u64) << 32) ^ N.fetch_add(1, Ordering::Relaxed)
    }

    fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
        match fs::read(dir.join(MANIFEST)) {
            Ok(b) => serde_json::from_slice(&b).map(Some).map_err(|e| {
                RuntimeError::Store(format!("bad manifest in {}: {e}", dir.display()))
            }),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn try_load(&self, name: &str) -> Result<Option<StoreEntry>> {
        let dir = self.root.join(name);
        let Some(m) = Self::read_manifest(&dir)? else {
            return Ok(None);
        };
        let mut parts = Vec::with_capacity(m.world_size);
        for r in 0..m.world_size {
            match read_file(dir.join(format!("part-{r}.bspf"))) {
                Ok(t) => parts.push(t),
                Err(bspf_core::Error::Io(e)) if e.kind() == ErrorKind::NotFound => return Ok(None),
                Err(e) => return Err(e.into()),
            }
        }
        // Overwritten while we were reading: start again.
        if Self::read_manifest(&dir)?.as_ref() != Some(&m) {
            return Ok(None);
        }
        let schema = match parts.first() {
            Some(t) => t.schema_ref().clone(),
            None => {
                return Err(RuntimeError::Store(format!(
                    "entry {name:?} has no partitions"
                )))
            }
        };
        if parts
            .iter()
            .any(|t| schema_digest(t.schema()) != m.schema_digest)
        {
            return Err(RuntimeError::Store(format!(
                "entry {name:?} partitions disagree with manifest"
            )));
        }
        Ok(Some(StoreEntry {
            name: m.name,
            schema,
            partitions: parts,
            created: UNIX_EPOCH + Duration::from_millis(m.created_unix_ms),
        }))
    }
}

impl StoreBackend for SpillStore {
    fn commit(&self, entry: StoreEntry) -> Result<()> {
        let tmp = self.unique("tmp", &entry.name);
        fs::create_dir_all(&tmp)?;
        for (r, t) in entry.partitions.iter().enumerate() {
            write_file(tmp.join(format!("part-{r}.bspf")), t)?;
        }
        let created_unix_ms = entry
            .created
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_millis() as u64;
        let m = Manifest {
            name: entry.name.clone(),
            world_size: entry.partitions.len(),
            schema_digest: schema_digest(&entry.schema),
            created_unix_ms,
            token: self.token(),
        };
        let json = serde_json::to_vec_pretty(&m).map_err(|e| RuntimeError::Store(e.to_string()))?;
        fs::write(tmp.join(MANIFEST), json)?;
        let dest = self.root.join(&entry.name);
        let old = self.unique("old", &entry.name);
        let had_old = match fs::rename(&dest, &old) {
            Ok(()) => true,
            Err(e) if e.kind() == ErrorKind::NotFound => false,
            Err(e) => return Err(e.into()),
        };
        fs::rename(&tmp, &dest)?;
        if had_old {
            let _ = fs::remove_dir_all(&old);
        }
        Ok(())
    }

    fn fetch(&self, name: &str, timeout: Duration) -> Result<Arc<StoreEntry>> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(e) = self.try_load(name)? {
                return Ok(Arc::new(e));
            }
            if Instant::now() >= deadline {
                return Err(RuntimeError::Timeout(
                    timeout,
                    format!("store entry {name:?}"),
                ));
            }
            std::thread::sleep(POLL);
        }
    }

    fn remove(&self, name: &str) -> Result<()> {
        match fs::remove_dir_all(self.root.join(name)) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn names(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for e in fs::read_dir(&self.root)? {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && e.path().join(MANIFEST).exists() {
                out.push(name);
            }
        }
        Ok(out)
    }
}
