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

//! A persistent gang of workers, one per rank, each owning a communicator
//! that is created once at startup and reused by every submission.
//!
//! Submissions are queued and dispatched one at a time to all workers. A
//! failed submission triggers a recovery barrier; if that fails too, the
//! executor stops.

use std::any::Any;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use bspf_comm::{Backend, CommError, Communicator, RendezvousServer, WorldConfig, DEFAULT_TIMEOUT};

use crate::env::ExecEnv;
use crate::error::{Result, RuntimeError};
use crate::store::Store;

type AnyBox = Box<dyn Any + Send>;
type Task = Arc<dyn Fn(&mut ExecEnv<'_>, &mut WorkerState) -> Result<AnyBox> + Send + Sync>;

#[derive(Clone, Debug)]
pub struct ExecutorConfig {
    pub backend: Backend,
    /// Communicator timeout for every blocking call.
    pub timeout: Duration,
    /// Rendezvous server for the TCP backend. One is embedded when absent.
    pub rendezvous: Option<String>,
    /// Generated when absent, so independent executors never collide.
    pub namespace: Option<String>,
    pub store: Store,
    pub seed: u64,
    pub recovery_timeout: Duration,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            backend: Backend::InProcess,
            timeout: DEFAULT_TIMEOUT,
            rendezvous: None,
            namespace: None,
            store: Store::memory(),
            seed: 0,
            recovery_timeout: Duration::from_secs(5),
        }
    }
}

impl ExecutorConfig {
    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_store(mut self, store: Store) -> Self {
        self.store = store;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_namespace(mut self, ns: impl Into<String>) -> Self {
        self.namespace = Some(ns.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecutorState {
    Starting,
    Ready,
    Running,
    Stopped,
}

/// State a worker keeps between submissions.
#[derive(Default)]
pub struct WorkerState {
    executable: Option<AnyBox>,
}

enum Cmd {
    Run { task: Task, abort: Arc<AtomicBool> },
    Recover(Duration),
    Stop,
}

enum Reply {
    Done(usize, Result<AnyBox>),
    Recovered(usize, Result<(), CommError>),
}

type Completion = Box<dyn FnOnce(Result<Vec<AnyBox>>) + Send>;

struct Job {
    task: Task,
    complete: Option<Completion>,
}

impl Job {
    fn finish(mut self, r: Result<Vec<AnyBox>>) {
        if let Some(c) = self.complete.take() {
            c(r);
        }
    }
}

impl Drop for Job {
    // A job dropped unfinished (for example left in the queue of a dead
    // dispatcher) still resolves its submission.
    fn drop(&mut self) {
        if let Some(c) = self.complete.take() {
            c(Err(RuntimeError::ExecutorStopped));
        }
    }
}

struct Shared {
    state: Mutex<ExecutorState>,
    stopping: AtomicBool,
    init_count: AtomicUsize,
}

impl Shared {
    fn set_state(&self, s: ExecutorState) {
        *self.state.lock().unwrap_or_else(|e| e.into_inner()) = s;
    }
}

enum Slot<T> {
    Pending,
    Ready(Result<Vec<T>>),
    Taken,
}

/// Completion handle for one submission; resolves to per-rank results in
/// rank order.
pub struct Submission<T> {
    slot: Arc<(Mutex<Slot<T>>, Condvar)>,
}

impl<T> Submission<T> {
    fn pending() -> Self {
        Submission {
            slot: Arc::new((Mutex::new(Slot::Pending), Condvar::new())),
        }
    }

    fn resolve(slot: &Arc<(Mutex<Slot<T>>, Condvar)>, r: Result<Vec<T>>) {
        let (m, cv) = &**slot;
        *m.lock().unwrap_or_else(|e| e.into_inner()) = Slot::Ready(r);
        cv.notify_all();
    }

    pub fn is_done(&self) -> bool {
        !matches!(
            *self.slot.0.lock().unwrap_or_else(|e| e.into_inner()),
            Slot::Pending
        )
    }

    /// Blocks until the submission finishes.
    pub fn wait(self) -> Result<Vec<T>> {
        self.wait_inner(None)
    }

    /// Like [`Submission::wait`] but gives up after `timeout`. The
    /// submission keeps running and can be waited on again.
    pub fn wait_timeout(&self, timeout: Duration) -> Result<Vec<T>> {
        self.wait_inner(Some(timeout))
    }

    fn wait_inner(&self, timeout: Option<Duration>) -> Result<Vec<T>> {
        let deadline = timeout.map(|t| (Instant::now() + t, t));
        let (m, cv) = &*self.slot;
        let mut g = m.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            match std::mem::replace(&mut *g, Slot::Taken) {
                Slot::Ready(r) => return r,
                Slot::Taken => return Err(RuntimeError::AlreadyTaken),
                Slot::Pending => *g = Slot::Pending,
            }
            match deadline {
                None => g = cv.wait(g).unwrap_or_else(|e| e.into_inner()),
                Some((d, t)) => {
                    let now = Instant::now();
                    if now >= d {
                        return Err(RuntimeError::Timeout(t, "submission".into()));
                    }
                    g = cv
                        .wait_timeout(g, d - now)
                        .unwrap_or_else(|e| e.into_inner())
                        .0;
                }
            }
        }
    }
}

pub struct Executor {
    parallelism: usize,
    backend: Backend,
    namespace: String,
    rendezvous: Option<String>,
    shared: Arc<Shared>,
    jobs: Mutex<Option<Sender<Job>>>,
    dispatcher: Mutex<Option<JoinHandle<()>>>,
    _server: Option<RendezvousServer>,
}

fn fresh_namespace() -> String {
    static N: AtomicU64 = AtomicU64::new(0);
    format!(
        "exec-{}-{}",
        std::process::id(),
        N.fetch_add(1, Ordering::Relaxed)
    )
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic".to_string()
    }
}

impl Executor {
    /// Spawns `parallelism` workers and connects their communicators. Returns
    /// once every rank is connected.
    pub fn start(parallelism: usize, config: ExecutorConfig) -> Result<Executor> {
        if parallelism == 0 {
            return Err(RuntimeError::SpawnFailure(
                "parallelism must be at least 1".into(),
            ));
        }
        let namespace = config.namespace.clone().unwrap_or_else(fresh_namespace);
        let mut server = None;
        let mut rendezvous = config.rendezvous.clone();
        if config.backend == Backend::Tcp && rendezvous.is_none() && parallelism > 1 {
            let s = RendezvousServer::start("127.0.0.1:0")?;
            rendezvous = Some(s.addr().to_string());
            server = Some(s);
        }
        let shared = Arc::new(Shared {
            state: Mutex::new(ExecutorState::Starting),
            stopping: AtomicBool::new(false),
            init_count: AtomicUsize::new(0),
        });

        let (reply_tx, reply_rx) = channel::<Reply>();
        let (init_tx, init_rx) = channel::<(usize, std::result::Result<(), CommError>)>();
        let mut cmd_txs = Vec::with_capacity(parallelism);
        let mut handles = Vec::with_capacity(parallelism);
        for rank in 0..parallelism {
            let mut wc = WorldConfig::new(parallelism, rank, config.backend)
                .with_namespace(namespace.clone())
                .with_timeout(config.timeout);
            wc.rendezvous = rendezvous.clone();
            let (cmd_tx, cmd_rx) = channel::<Cmd>();
            let (reply_tx, init_tx) = (reply_tx.clone(), init_tx.clone());
            let (store, seed, shared) = (config.store.clone(), config.seed, shared.clone());
            let h = std::thread::Builder::new()
                .name(format!("bspf-worker-{rank}"))
                .spawn(move || {
                    let comm = match Communicator::init(&wc) {
                        Ok(c) => {
                            shared.init_count.fetch_add(1, Ordering::SeqCst);
                            let _ = init_tx.send((rank, Ok(())));
                            c
                        }
                        Err(e) => {
                            let _ = init_tx.send((rank, Err(e)));
                            return;
                        }
                    };
                    worker_loop(rank, comm, store, seed, cmd_rx, reply_tx);
                })
                .map_err(|e| RuntimeError::SpawnFailure(e.to_string()))?;
            cmd_txs.push(cmd_tx);
            handles.push(h);
        }
        drop(init_tx);

        let mut failures: Vec<(usize, CommError)> = Vec::new();
        for _ in 0..parallelism {
            match init_rx.recv() {
                Ok((_, Ok(()))) => {}
                Ok((rank, Err(e))) => failures.push((rank, e)),
                Err(_) => failures.push((usize::MAX, CommError::Io("worker vanished".into()))),
            }
        }
        if !failures.is_empty() {
            for tx in &cmd_txs {
                let _ = tx.send(Cmd::Stop);
            }
            drop(cmd_txs);
            for h in handles {
                let _ = h.join();
            }
            failures.sort_by_key(|(r, e)| (matches!(e, CommError::RendezvousTimeout { .. }), *r));
            return Err(RuntimeError::Comm(failures.swap_remove(0).1));
        }

        let (job_tx, job_rx) = channel::<Job>();
        let sh = shared.clone();
        let recovery = config.recovery_timeout;
        let dispatcher = std::thread::Builder::new()
            .name("bspf-dispatch".into())
            .spawn(move || dispatch_loop(job_rx, cmd_txs, reply_rx, handles, sh, recovery))
            .map_err(|e| RuntimeError::SpawnFailure(e.to_string()))?;
        shared.set_state(ExecutorState::Ready);
        log::debug!(
            "executor {namespace} ready with {parallelism} {} workers",
            config.backend
        );
        Ok(Executor {
            parallelism,
            backend: config.backend,
            namespace,
            rendezvous,
            shared,
            jobs: Mutex::new(Some(job_tx)),
            dispatcher: Mutex::new(Some(dispatcher)),
            _server: server,
        })
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn rendezvous(&self) -> Option<&str> {
        self.rendezvous.as_deref()
    }

    pub fn state(&self) -> ExecutorState {
        *self.shared.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Communicators created so far across all workers.
    pub fn init_count(&self) -> usize {
        self.shared.init_count.load(Ordering::SeqCst)
    }

    fn submit<T: Send + 'static>(&self, task: Task) -> Submission<T> {
        let sub = Submission::pending();
        let slot = sub.slot.clone();
        let complete = Box::new(move |r: Result<Vec<AnyBox>>| {
            let r = r.map(|v| {
                v.into_iter()
                    .map(|b| *b.downcast::<T>().expect("task result type"))
                    .collect()
            });
            Submission::resolve(&slot, r);
        });
        let job = Job {
            task,
            complete: Some(complete),
        };
        let guard = self.jobs.lock().unwrap_or_else(|e| e.into_inner());
        match guard.as_ref() {
            Some(tx) if !self.shared.stopping.load(Ordering::SeqCst) => {
                if let Err(e) = tx.send(job) {
                    e.0.finish(Err(RuntimeError::ExecutorStopped));
                }
            }
            _ => job.finish(Err(RuntimeError::ExecutorStopped)),
        }
        sub
    }

    /// Runs `f` on every worker.
    pub fn run<T, F>(&self, f: F) -> Submission<T>
    where
        T: Send + 'static,
        F: Fn(&mut ExecEnv<'_>) -> Result<T> + Send + Sync + 'static,
    {
        self.submit(Arc::new(move |env, _state| {
            f(env).map(|v| Box::new(v) as AnyBox)
        }))
    }

    /// Builds one executable per worker with `ctor`, replacing any previous
    /// one. Blocks until every worker has finished.
    pub fn start_executable<E, C>(&self, ctor: C) -> Result<()>
    where
        E: Send + 'static,
        C: Fn(&mut ExecEnv<'_>) -> Result<E> + Send + Sync + 'static,
    {
        let sub: Submission<()> = self.submit(Arc::new(move |env, state| {
            state.executable = None;
            let e = ctor(env)?;
            state.executable = Some(Box::new(e));
            Ok(Box::new(()) as AnyBox)
        }));
        match sub.wait() {
            Ok(_) => Ok(()),
            Err(RuntimeError::RankFailed { rank, source }) => {
                Err(RuntimeError::Construction { rank, source })
            }
            Err(e) => Err(e),
        }
    }

    /// Calls `f` on each worker's executable.
    pub fn execute<E, T, F>(&self, f: F) -> Submission<T>
    where
        E: Send + 'static,
        T: Send + 'static,
        F: Fn(&mut E, &mut ExecEnv<'_>) -> Result<T> + Send + Sync + 'static,
    {
        self.submit(Arc::new(move |env, state| {
            let exe = state
                .executable
                .as_mut()
                .ok_or(RuntimeError::NoExecutable)?
                .downcast_mut::<E>()
                .ok_or(RuntimeError::ExecutableType)?;
            f(exe, env).map(|v| Box::new(v) as AnyBox)
        }))
    }

    /// Cancels queued submissions, waits for a running one, and joins the
    /// workers. Idempotent.
    pub fn stop(&self) {
        self.shared.stopping.store(true, Ordering::SeqCst);
        drop(self.jobs.lock().unwrap_or_else(|e| e.into_inner()).take());
        let handle = self
            .dispatcher
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .take();
        if let Some(h) = handle {
            let _ = h.join();
        }
        self.shared.set_state(ExecutorState::Stopped);
    }
}

impl Drop for Executor {
    fn drop(&mut self) {
        self.stop();
    }
}

fn worker_loop(
    rank: usize,
    mut comm: Communicator,
    store: Store,
    seed: u64,
    cmds: Receiver<Cmd>,
    replies: Sender<Reply>,
) {
    let mut state = WorkerState::default();
    while let Ok(cmd) = cmds.recv() {
        match cmd {
            Cmd::Run { task, abort } => {
                comm.set_abort_flag(Some(abort));
                comm.timer_mut().reset();
                let r = {
                    let mut env = ExecEnv::new(&mut comm, store.clone(), seed);
                    catch_unwind(AssertUnwindSafe(|| task(&mut env, &mut state)))
                        .unwrap_or_else(|p| Err(RuntimeError::Panic(panic_message(p))))
                };
                comm.set_abort_flag(None);
                if replies.send(Reply::Done(rank, r)).is_err() {
                    break;
                }
            }
            Cmd::Recover(t) => {
                let r = comm.recover(t);
                if replies.send(Reply::Recovered(rank, r)).is_err() {
                    break;
                }
            }
            Cmd::Stop => break,
        }
    }
}

/// Picks the error to report: the lowest rank whose error is not merely a
/// consequence of another rank failing.
fn pick_error(mut errors: Vec<(usize, RuntimeError)>) -> RuntimeError {
    errors.sort_by_key(|(r, e)| (e.is_secondary(), *r));
    let (rank, e) = errors.swap_remove(0);
    match e {
        RuntimeError::NoExecutable | RuntimeError::ExecutableType => e,
        e => RuntimeError::RankFailed {
            rank,
            source: Box::new(e),
        },
    }
}

fn dispatch_loop(
    jobs: Receiver<Job>,
    workers: Vec<Sender<Cmd>>,
    replies: Receiver<Reply>,
    handles: Vec<JoinHandle<()>>,
    shared: Arc<Shared>,
    recovery: Duration,
) {
    let p = workers.len();
    while let Ok(job) = jobs.recv() {
        if shared.stopping.load(Ordering::SeqCst) {
            job.finish(Err(RuntimeError::ExecutorStopped));
            continue;
        }
        shared.set_state(ExecutorState::Running);
        let abort = Arc::new(AtomicBool::new(false));
        let mut results: Vec<Option<AnyBox>> = (0..p).map(|_| None).collect();
        let mut errors = Vec::new();
        let mut outstanding = 0;
        for (rank, w) in workers.iter().enumerate() {
            let cmd = Cmd::Run {
                task: job.task.clone(),
                abort: abort.clone(),
            };
            if w.send(cmd).is_ok() {
                outstanding += 1;
            } else {
                abort.store(true, Ordering::SeqCst);
                errors.push((rank, RuntimeError::SpawnFailure("worker exited".into())));
            }
        }
        let mut lost = !errors.is_empty();
        while outstanding > 0 {
            match replies.recv() {
                Ok(Reply::Done(rank, Ok(v))) => results[rank] = Some(v),
                Ok(Reply::Done(rank, Err(e))) => {
                    abort.store(true, Ordering::SeqCst);
                    errors.push((rank, e));
                }
                Ok(Reply::Recovered(..)) => continue,
                Err(_) => {
                    lost = true;
                    break;
                }
            }
            outstanding -= 1;
        }

        let mut healthy = !lost;
        if !errors.is_empty() && healthy {
            for w in &workers {
                let _ = w.send(Cmd::Recover(recovery));
            }
            for _ in 0..p {
                match replies.recv() {
                    Ok(Reply::Recovered(rank, Err(e))) => {
                        log::warn!("rank {rank} failed to recover: {e}");
                        healthy = false;
                    }
                    Ok(_) => {}
                    Err(_) => {
                        healthy = false;
                        break;
                    }
                }
            }
        }
        if !healthy {
            shared.stopping.store(true, Ordering::SeqCst);
        }
        shared.set_state(if healthy {
            ExecutorState::Ready
        } else {
            ExecutorState::Stopped
        });
        let outcome = if errors.is_empty() {
            Ok(results
                .into_iter()
                .map(|r| r.expect("every rank replied"))
                .collect())
        } else {
            Err(pick_error(errors))
        };
        job.finish(outcome);
        if !healthy {
            break;
        }
    }
    while let Ok(job) = jobs.try_recv() {
        job.finish(Err(RuntimeError::ExecutorStopped));
    }
    for w in &workers {
        let _ = w.send(Cmd::Stop);
    }
    drop(workers);
    for h in handles {
        let _ = h.join();
    }
    shared.set_state(ExecutorState::Stopped);
}
