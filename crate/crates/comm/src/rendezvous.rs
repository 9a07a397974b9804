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

//! Line-based key-value service used to bootstrap TCP worlds.
//!
//! Requests and responses are single lines:
//!
//! ```text
//! PUT <key> <value>   -> OK | EXISTS
//! GET <key>           -> OK <value> | MISSING
//! DEL <key>           -> OK
//! ```
//!
//! Keys are write-once; a second `PUT` of the same key answers `EXISTS`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::error::{CommError, Result};

type Kv = Arc<Mutex<HashMap<String, String>>>;

pub struct RendezvousServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl RendezvousServer {
    /// Binds `bind` (use port 0 for an ephemeral port) and serves in the
    /// background until shut down or dropped.
    pub fn start(bind: &str) -> Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let kv: Kv = Arc::default();
        let flag = stop.clone();
        let thread = std::thread::Builder::new()
            .name("bspf-rendezvous".into())
            .spawn(move || accept_loop(listener, kv, flag))?;
        log::debug!("rendezvous listening on {addr}");
        Ok(RendezvousServer {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for RendezvousServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, kv: Kv, stop: Arc<AtomicBool>) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(conn) = conn else { continue };
        let kv = kv.clone();
        let _ = std::thread::Builder::new()
            .name("bspf-rendezvous-conn".into())
            .spawn(move || {
                if let Err(e) = serve(conn, &kv) {
                    log::debug!("rendezvous connection ended: {e}");
                }
            });
    }
}

fn serve(conn: TcpStream, kv: &Kv) -> std::io::Result<()> {
    let mut out = conn.try_clone()?;
    let reader = BufReader::new(conn);
    for line in reader.lines() {
        let line = line?;
        let reply = handle(&line, kv);
        out.write_all(reply.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn handle(line: &str, kv: &Kv) -> String {
    let mut parts = line.splitn(3, ' ');
    let cmd = parts.next().unwrap_or("");
    let key = parts.next();
    let rest = parts.next();
    let mut map = kv.lock().unwrap_or_else(|e| e.into_inner());
    match (cmd, key, rest) {
        ("PUT", Some(k), Some(v)) => {
            if map.contains_key(k) {
                "EXISTS".into()
            } else {
                map.insert(k.to_string(), v.to_string());
                "OK".into()
            }
        }
        ("GET", Some(k), None) => match map.get(k) {
            Some(v) => format!("OK {v}"),
            None => "MISSING".into(),
        },
        ("DEL", Some(k), None) => {
            map.remove(k);
            "OK".into()
        }
        _ => format!("ERR bad request {line:?}"),
    }
}

pub struct RendezvousClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl RendezvousClient {
    /// Connects, retrying until `timeout` so workers may start before the
    /// server does.
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self> {
        let deadline = Instant::now() + timeout;
        loop {
            let attempt = addr
                .to_socket_addrs()
                .map_err(CommError::from)
                .and_then(|mut it| {
                    it.next()
                        .ok_or_else(|| CommError::InvalidConfig(format!("cannot resolve {addr}")))
                })
                .and_then(|sa| Ok(TcpStream::connect_timeout(&sa, Duration::from_secs(1))?));
            match attempt {
                Ok(s) => {
                    s.set_nodelay(true)?;
                    let writer = s.try_clone()?;
                    return Ok(RendezvousClient {
                        reader: BufReader::new(s),
                        writer,
                    });
                }
                Err(CommError::InvalidConfig(m)) => return Err(CommError::InvalidConfig(m)),
                Err(e) if Instant::now() >= deadline => {
                    log::warn!("rendezvous {addr} unreachable: {e}");
                    return Err(CommError::RendezvousTimeout {
                        namespace: String::new(),
                        joined: 0,
                        expected: 0,
                    });
                }
                Err(_) => std::thread::sleep(Duration::from_millis(20)),
            }
        }
    }

    fn request(&mut self, line: &str) -> Result<String> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(CommError::Io("rendezvous closed the connection".into()));
        }
        Ok(reply.trim_end_matches(['\r', '\n']).to_string())
    }

    /// Returns `false` when the key already exists.
    pub fn put(&mut self, key: &str, value: &str) -> Result<bool> {
        check_token(key)?;
        if value.contains('\n') {
            return Err(CommError::InvalidConfig("value contains a newline".into()));
        }
        match self.request(&format!("PUT {key} {value}"))?.as_str() {
            "OK" => Ok(true),
            "EXISTS" => Ok(false),
            other => Err(CommError::Io(format!("unexpected reply {other:?}"))),
        }
    }

    pub fn get(&mut self, key: &str) -> Result<Option<String>> {
        check_token(key)?;
        let reply = self.request(&format!("GET {key}"))?;
        if reply == "MISSING" {
            Ok(None)
        } else if let Some(v) = reply.strip_prefix("OK ") {
            Ok(Some(v.to_string()))
        } else {
            Err(CommError::Io(format!("unexpected reply {reply:?}")))
        }
    }

    pub fn del(&mut self, key: &str) -> Result<()> {
        check_token(key)?;
        match self.request(&format!("DEL {key}"))?.as_str() {
            "OK" => Ok(()),
            other => Err(CommError::Io(format!("unexpected reply {other:?}"))),
        }
    }
}

fn check_token(key: &str) -> Result<()> {
    if key.is_empty() || key.chars().any(char::is_whitespace) {
        return Err(CommError::InvalidConfig(format!("bad key {key:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_del() {
        let srv = RendezvousServer::start("127.0.0.1:0").unwrap();
        let addr = srv.addr().to_string();
        let mut a = RendezvousClient::connect(&addr, Duration::from_secs(5)).unwrap();
        let mut b = RendezvousClient::connect(&addr, Duration::from_secs(5)).unwrap();
        assert_eq!(a.get("k").unwrap(), None);
        assert!(a.put("k", "value with spaces").unwrap());
        assert!(!b.put("k", "other").unwrap());
        assert_eq!(b.get("k").unwrap().as_deref(), Some("value with spaces"));
        b.del("k").unwrap();
        assert_eq!(a.get("k").unwrap(), None);
        assert!(a.put("bad key", "v").is_err());
    }

    #[test]
    fn unreachable_server_times_out() {
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let r = RendezvousClient::connect(&format!("127.0.0.1:{port}"), Duration::from_millis(100));
        assert!(matches!(r, Err(CommError::RendezvousTimeout { .. })));
    }
}
