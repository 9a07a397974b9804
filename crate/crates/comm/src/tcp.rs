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

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use crate::config::WorldConfig;
use crate::error::{CommError, Result};
use crate::frame::{Frame, MAGIC};
use crate::rendezvous::RendezvousClient;
use crate::transport::{Event, Transport};

const POLL: Duration = Duration::from_millis(10);

pub(crate) struct TcpTransport {
    writers: Vec<Option<BufWriter<TcpStream>>>,
    rx: Receiver<Event>,
}

fn handshake(rank: usize, world: usize) -> [u8; 12] {
    let mut b = [0u8; 12];
    b[0..4].copy_from_slice(&MAGIC.to_le_bytes());
    b[4..8].copy_from_slice(&(rank as u32).to_le_bytes());
    b[8..12].copy_from_slice(&(world as u32).to_le_bytes());
    b
}

fn timed_out(cfg: &WorldConfig, joined: usize) -> CommError {
    CommError::RendezvousTimeout {
        namespace: cfg.namespace.clone(),
        joined,
        expected: cfg.world_size,
    }
}

/// Registers with the rendezvous server, waits for every rank, then builds
/// the full mesh: each rank dials lower ranks and accepts higher ones.
pub(crate) fn connect(cfg: &WorldConfig) -> Result<TcpTransport> {
    let deadline = Instant::now() + cfg.timeout;
    let (tx, rx) = channel();
    let world = cfg.world_size;
    if world == 1 {
        return Ok(TcpTransport {
            writers: vec![None],
            rx,
        });
    }
    let rv = cfg.rendezvous.as_deref().expect("validated");
    let mut client = RendezvousClient::connect(rv, cfg.timeout)?;
    let listener = TcpListener::bind((cfg.host.as_str(), 0))?;
    let me = listener.local_addr()?;
    let ns = &cfg.namespace;

    let world_key = format!("{ns}/world");
    if !client.put(&world_key, &world.to_string())? {
        let registered = client
            .get(&world_key)?
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0);
        if registered != world {
            return Err(CommError::WorldSizeMismatch {
                registered,
                requested: world,
            });
        }
    }
    if !client.put(&format!("{ns}/rank/{}", cfg.rank), &me.to_string())? {
        return Err(CommError::DuplicateRank {
            namespace: ns.clone(),
            rank: cfg.rank,
        });
    }

    let mut addrs: Vec<Option<String>> = vec![None; world];
    loop {
        for (r, slot) in addrs.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = client.get(&format!("{ns}/rank/{r}"))?;
            }
        }
        let joined = addrs.iter().filter(|a| a.is_some()).count();
        if joined == world {
            break;
        }
        if Instant::now() >= deadline {
            return Err(timed_out(cfg, joined));
        }
        std::thread::sleep(POLL);
    }

    let mut streams: Vec<Option<TcpStream>> = (0..world).map(|_| None).collect();
    for (r, addr) in addrs.iter().enumerate().take(cfg.rank) {
        let addr = addr.as_deref().unwrap();
        let sa = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| CommError::InvalidConfig(format!("cannot resolve {addr}")))?;
        let left = deadline.saturating_duration_since(Instant::now()).max(POLL);
        let mut s = TcpStream::connect_timeout(&sa, left)?;
        s.write_all(&handshake(cfg.rank, world))?;
        streams[r] = Some(s);
    }

    listener.set_nonblocking(true)?;
    let mut need = world - 1 - cfg.rank;
    while need > 0 {
        match listener.accept() {
            Ok((mut s, _)) => {
                s.set_nonblocking(false)?;
                let left = deadline.saturating_duration_since(Instant::now()).max(POLL);
                s.set_read_timeout(Some(left))?;
                let mut hs = [0u8; 12];
                s.read_exact(&mut hs)?;
                s.set_read_timeout(None)?;
                let field = |i: usize| u32::from_le_bytes(hs[i..i + 4].try_into().unwrap());
                let (magic, peer, peer_world) = (field(0), field(4) as usize, field(8) as usize);
                if magic != MAGIC || peer_world != world || peer <= cfg.rank || peer >= world {
                    return Err(CommError::ProtocolMismatch(format!(
                        "bad handshake from {peer} (world {peer_world})"
                    )));
                }
                if streams[peer].is_some() {
                    return Err(CommError::DuplicateRank {
                        namespace: ns.clone(),
                        rank: peer,
                    });
                }
                streams[peer] = Some(s);
                need -= 1;
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(timed_out(cfg, world - need));
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut writers = Vec::with_capacity(world);
    for (peer, s) in streams.into_iter().enumerate() {
        let Some(s) = s else {
            writers.push(None);
            continue;
        };
        s.set_nodelay(true)?;
        spawn_reader(cfg.rank, peer, s.try_clone()?, tx.clone())?;
        writers.push(Some(BufWriter::with_capacity(1 << 16, s)));
    }
    Ok(TcpTransport { writers, rx })
}

fn spawn_reader(me: usize, peer: usize, s: TcpStream, tx: Sender<Event>) -> Result<()> {
    std::thread::Builder::new()
        .name(format!("bspf-rx-{me}-{peer}"))
        .spawn(move || {
            let mut rd = BufReader::with_capacity(1 << 16, s);
            loop {
                match Frame::read_from(&mut rd) {
                    Ok(Some(f)) if f.src as usize == peer => {
                        if tx.send(Event::Frame(f)).is_err() {
                            return;
                        }
                    }
                    Ok(Some(f)) => {
                        log::error!("rank {me}: frame from {peer} claims source {}", f.src);
                        break;
                    }
                    Ok(None) => break,
                    Err(e) => {
                        log::debug!("rank {me}: channel to {peer} failed: {e}");
                        break;
                    }
                }
            }
            let _ = tx.send(Event::Closed(peer));
        })?;
    Ok(())
}

impl Transport for TcpTransport {
    fn send(&mut self, dest: usize, frame: Frame) -> Result<()> {
        let w = self.writers[dest]
            .as_mut()
            .ok_or(CommError::PeerFailure { rank: dest })?;
        frame
            .write_to(w)
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

impl Drop for TcpTransport {
    fn drop(&mut self) {
        // Half-close only: the reader threads keep draining until the peer
        // closes too, so no unread data turns the close into a reset.
        for w in self.writers.iter_mut().flatten() {
            let _ = w.flush();
            let _ = w.get_ref().shutdown(Shutdown::Write);
        }
    }
}
