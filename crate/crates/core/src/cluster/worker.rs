use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicI64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use sha2::{Digest, Sha256};

use super::protocol::{
    read_message, write_message, Assign, Broadcast, BroadcastStatus, Heartbeat, Hello, Message,
    PartialReply, ProtocolError, PROTOCOL_VERSION,
};
use super::JobError;
use crate::minilang::{parse_canonical, SourceProgram};
use crate::partitioning::run_subtask;

#[derive(Clone, Debug)]
pub struct WorkerOptions {
    /// Where broadcast artifacts are kept, as `<hash>.mini`.
    pub cache_dir: PathBuf,
    pub heartbeat_interval: Duration,
    /// Fault injection: drop the connection without replying upon receiving
    /// this many-th assignment (1-based), as if the process had died.
    pub crash_on_assignment: Option<u32>,
}

impl WorkerOptions {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        WorkerOptions {
            cache_dir: cache_dir.into(),
            heartbeat_interval: Duration::from_secs(1),
            crash_on_assignment: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkerExit {
    /// A master sent SHUTDOWN.
    Shutdown,
    /// The injected fault fired.
    Crashed,
}

/// Serve masters on `listener`, one connection at a time, until a SHUTDOWN
/// arrives or the injected fault fires.
pub fn worker_serve(
    listener: TcpListener,
    options: &WorkerOptions,
) -> Result<WorkerExit, JobError> {
    fs::create_dir_all(&options.cache_dir)?;
    let mut state = WorkerState {
        options: options.clone(),
        programs: HashMap::new(),
        assignments: 0,
    };
    loop {
        let (stream, peer) = listener.accept()?;
        info!("master connected from {peer}");
        match state.serve_connection(stream) {
            Ok(Some(exit)) => return Ok(exit),
            Ok(None) => info!("master {peer} disconnected"),
            Err(e) => warn!("connection from {peer} failed: {e}"),
        }
    }
}

struct WorkerState {
    options: WorkerOptions,
    programs: HashMap<String, SourceProgram>,
    assignments: u32,
}

type SharedWriter = Arc<Mutex<TcpStream>>;

fn send(writer: &SharedWriter, msg: &Message) -> Result<(), ProtocolError> {
    let mut w = writer.lock().unwrap_or_else(|e| e.into_inner());
    write_message(&mut *w, msg)
}

struct HeartbeatGuard {
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl Drop for HeartbeatGuard {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn start_heartbeat(
    writer: SharedWriter,
    interval: Duration,
    busy: Arc<AtomicI64>,
) -> HeartbeatGuard {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let handle = thread::spawn(move || {
        let mut seq = 0;
        let mut next = Instant::now() + interval;
        while !flag.load(Ordering::Relaxed) {
            if Instant::now() < next {
                thread::sleep(Duration::from_millis(10).min(interval));
                continue;
            }
            next += interval;
            seq += 1;
            let b = busy.load(Ordering::Relaxed);
            let msg = Message::Heartbeat(Heartbeat {
                seq,
                busy_with: (b >= 0).then_some(b as u32),
            });
            if send(&writer, &msg).is_err() {
                break;
            }
        }
    });
    HeartbeatGuard {
        stop,
        handle: Some(handle),
    }
}

impl WorkerState {
    fn serve_connection(&mut self, stream: TcpStream) -> Result<Option<WorkerExit>, ProtocolError> {
        stream.set_nodelay(true)?;
        let writer: SharedWriter = Arc::new(Mutex::new(stream.try_clone()?));
        let mut reader = BufReader::new(stream);

        match read_message(&mut reader)? {
            Message::Hello(h) => debug!("master hello: version {}", h.version),
            other => {
                return Err(ProtocolError::Unexpected {
                    expected: "HELLO",
                    got: other.type_name(),
                })
            }
        }
        send(
            &writer,
            &Message::Hello(Hello {
                role: "worker".into(),
                version: PROTOCOL_VERSION,
                capabilities: vec!["subtask".into(), "heartbeat".into()],
                cached_artifacts: self.cached_hashes(),
                heartbeat_ms: Some(self.options.heartbeat_interval.as_millis() as u64),
            }),
        )?;

        let busy = Arc::new(AtomicI64::new(-1));
        let _heartbeat = start_heartbeat(
            writer.clone(),
            self.options.heartbeat_interval,
            busy.clone(),
        );

        loop {
            let msg = match read_message(&mut reader) {
                Ok(m) => m,
                Err(ProtocolError::Closed) => return Ok(None),
                Err(e) => return Err(e),
            };
            match msg {
                Message::BroadcastArtifact(b) => {
                    let ack = self.store_artifact(b);
                    send(&writer, &Message::BroadcastArtifact(ack))?;
                }
                Message::AssignSubtask(assign) => {
                    self.assignments += 1;
                    if self.options.crash_on_assignment == Some(self.assignments) {
                        warn!(
                            "injected fault: dropping connection on assignment {}",
                            self.assignments
                        );
                        let _ = writer.lock().map(|s| s.shutdown(std::net::Shutdown::Both));
                        return Ok(Some(WorkerExit::Crashed));
                    }
                    busy.store(assign.partition.partition_id as i64, Ordering::Relaxed);
                    let reply = self.run(assign);
                    busy.store(-1, Ordering::Relaxed);
                    send(&writer, &Message::PartialResult(reply))?;
                }
                Message::Shutdown(s) => {
                    info!(
                        "shutdown requested{}",
                        s.reason.map(|r| format!(": {r}")).unwrap_or_default()
                    );
                    return Ok(Some(WorkerExit::Shutdown));
                }
                Message::Heartbeat(_) => {}
                other => {
                    warn!("ignoring unexpected {} message", other.type_name());
                }
            }
        }
    }

    fn cached_hashes(&self) -> Vec<String> {
        let mut hashes: Vec<String> = fs::read_dir(&self.options.cache_dir)
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".mini").map(str::to_string)
            })
            .collect();
        hashes.sort();
        hashes
    }

    fn cache_path(&self, hash: &str) -> PathBuf {
        self.options.cache_dir.join(format!("{hash}.mini"))
    }

    fn store_artifact(&mut self, b: Broadcast) -> Broadcast {
        let reply = |status, error: Option<String>| Broadcast {
            hash: b.hash.clone(),
            artifact: None,
            status: Some(status),
            error,
        };
        if self.programs.contains_key(&b.hash) {
            return reply(BroadcastStatus::AlreadyCached, None);
        }
        let Some(text) = b.artifact.as_deref() else {
            return match self.load_cached(&b.hash) {
                Some(_) => reply(BroadcastStatus::AlreadyCached, None),
                None => reply(BroadcastStatus::Rejected, Some("artifact missing".into())),
            };
        };
        match load_artifact(text, &b.hash) {
            Ok(program) => {
                if let Err(e) = write_atomically(&self.cache_path(&b.hash), text.as_bytes()) {
                    warn!("could not cache artifact {}: {e}", b.hash);
                }
                self.programs.insert(b.hash.clone(), program);
                reply(BroadcastStatus::Stored, None)
            }
            Err(e) => reply(BroadcastStatus::Rejected, Some(e)),
        }
    }

    fn load_cached(&mut self, hash: &str) -> Option<&SourceProgram> {
        if !self.programs.contains_key(hash) {
            let text = fs::read_to_string(self.cache_path(hash)).ok()?;
            match load_artifact(&text, hash) {
                Ok(p) => {
                    self.programs.insert(hash.to_string(), p);
                }
                Err(e) => {
                    warn!("ignoring corrupt cache entry {hash}: {e}");
                    return None;
                }
            }
        }
        self.programs.get(hash)
    }

    fn run(&mut self, assign: Assign) -> PartialReply {
        let pid = assign.partition.partition_id;
        let refuse = |error: String| PartialReply {
            partition_id: pid,
            result: None,
            error: Some(error),
        };
        let Some(program) = self.load_cached(&assign.program_hash) else {
            return refuse("artifact missing".into());
        };
        let started = Instant::now();
        match run_subtask(
            &assign.partition,
            program,
            assign.step_limit,
            &assign.cost_model,
            &assign.options,
        ) {
            Ok(mut result) => {
                result.wall_ms = Some(started.elapsed().as_secs_f64() * 1000.0);
                PartialReply {
                    partition_id: pid,
                    result: Some(result),
                    error: None,
                }
            }
            Err(e) => refuse(e.to_string()),
        }
    }
}

fn load_artifact(text: &str, hash: &str) -> Result<SourceProgram, String> {
    let actual = hex::encode(Sha256::digest(text.as_bytes()));
    if actual != hash {
        return Err(format!(
            "artifact hash mismatch: announced {hash}, content {actual}"
        ));
    }
    let program = parse_canonical(text).map_err(|e| format!("artifact does not parse: {e}"))?;
    if program.content_hash() != hash {
        return Err("artifact is not in canonical form".into());
    }
    Ok(program)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    static COUNTER: AtomicI64 = AtomicI64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("{}-{n}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}
