use std::collections::BTreeSet;
use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::assignment::{Arrival, AssignmentTable};
use super::protocol::{
    read_message, write_message, Assign, Broadcast, BroadcastStatus, Hello, Message, ProtocolError,
    Shutdown, PROTOCOL_VERSION,
};
use super::{check_baseline, CostModel, JobError};
use crate::minilang::SourceProgram;
use crate::partitioning::{
    make_partitions, CombinedResult, DistributionStrategy, DurationUnit, PartialResult, Partition,
    SubtaskOptions, TaskParameters,
};

/// Settings for a job on real worker processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealCluster {
    /// `host:port` of each worker.
    pub endpoints: Vec<String>,
    pub connect_timeout_ms: u64,
    /// A worker silent for this long (no heartbeat, no result) is failed.
    pub failure_timeout_ms: u64,
    /// Abort the whole job after this long; `None` waits indefinitely.
    pub job_timeout_ms: Option<u64>,
    /// Charges reported in partial results; they do not affect scheduling.
    pub cost_model: CostModel,
}

impl Default for RealCluster {
    fn default() -> Self {
        RealCluster {
            endpoints: Vec::new(),
            connect_timeout_ms: 2_000,
            failure_timeout_ms: 5_000,
            job_timeout_ms: Some(600_000),
            cost_model: CostModel::default(),
        }
    }
}

enum Command {
    Assign(Partition),
    Shutdown,
}

enum Event {
    Ready(u32),
    Result(u32, Box<PartialResult>),
    Failed(u32, String),
}

struct Link {
    id: u32,
    endpoint: String,
    hash: String,
    artifact: Arc<String>,
    step_limit: u64,
    cost_model: CostModel,
    options: SubtaskOptions,
    connect_timeout: Duration,
    failure_timeout: Duration,
}

impl Link {
    fn run(self, commands: Receiver<Command>, events: Sender<Event>) {
        let id = self.id;
        if let Err(reason) = self.serve(commands, &events) {
            let _ = events.send(Event::Failed(id, reason));
        }
    }

    fn connect(&self) -> Result<TcpStream, String> {
        let addrs: Vec<_> = self
            .endpoint
            .to_socket_addrs()
            .map_err(|e| format!("cannot resolve {}: {e}", self.endpoint))?
            .collect();
        let mut last = format!("no address for {}", self.endpoint);
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, self.connect_timeout) {
                Ok(s) => return Ok(s),
                Err(e) => last = format!("cannot connect to {}: {e}", self.endpoint),
            }
        }
        Err(last)
    }

    /// Returns `Err(reason)` when the worker must be treated as failed.
    fn serve(&self, commands: Receiver<Command>, events: &Sender<Event>) -> Result<(), String> {
        let stream = self.connect()?;
        let io = |e: std::io::Error| e.to_string();
        stream.set_nodelay(true).map_err(io)?;
        stream
            .set_read_timeout(Some(self.failure_timeout))
            .map_err(io)?;
        let mut writer = stream.try_clone().map_err(io)?;
        let mut reader = BufReader::new(stream);
        let proto = |e: ProtocolError| {
            if e.is_timeout() {
                "worker timed out".to_string()
            } else {
                e.to_string()
            }
        };

        write_message(
            &mut writer,
            &Message::Hello(Hello {
                role: "master".into(),
                version: PROTOCOL_VERSION,
                capabilities: Vec::new(),
                cached_artifacts: Vec::new(),
                heartbeat_ms: None,
            }),
        )
        .map_err(proto)?;
        match next_non_heartbeat(&mut reader).map_err(proto)? {
            Message::Hello(h) if h.version == PROTOCOL_VERSION => {
                debug!("worker {} ready: {:?}", self.id, h.capabilities)
            }
            Message::Hello(h) => return Err(format!("protocol version {} unsupported", h.version)),
            other => return Err(format!("expected HELLO, got {}", other.type_name())),
        }
        let _ = events.send(Event::Ready(self.id));

        let mut broadcast_done = false;
        while let Ok(cmd) = commands.recv() {
            let partition = match cmd {
                Command::Shutdown => {
                    let _ = write_message(
                        &mut writer,
                        &Message::Shutdown(Shutdown {
                            reason: Some("job complete".into()),
                        }),
                    );
                    return Ok(());
                }
                Command::Assign(p) => p,
            };
            if !broadcast_done {
                write_message(
                    &mut writer,
                    &Message::BroadcastArtifact(Broadcast {
                        hash: self.hash.clone(),
                        artifact: Some((*self.artifact).clone()),
                        status: None,
                        error: None,
                    }),
                )
                .map_err(proto)?;
                match next_non_heartbeat(&mut reader).map_err(proto)? {
                    Message::BroadcastArtifact(Broadcast {
                        status: Some(BroadcastStatus::Stored | BroadcastStatus::AlreadyCached),
                        ..
                    }) => broadcast_done = true,
                    Message::BroadcastArtifact(b) => {
                        return Err(format!(
                            "artifact rejected: {}",
                            b.error.unwrap_or_else(|| "no reason given".into())
                        ))
                    }
                    other => {
                        return Err(format!(
                            "expected BROADCAST_ARTIFACT acknowledgement, got {}",
                            other.type_name()
                        ))
                    }
                }
            }
            let pid = partition.partition_id;
            write_message(
                &mut writer,
                &Message::AssignSubtask(Assign {
                    program_hash: self.hash.clone(),
                    partition,
                    step_limit: self.step_limit,
                    cost_model: self.cost_model,
                    options: self.options,
                }),
            )
            .map_err(proto)?;
            loop {
                match next_non_heartbeat(&mut reader).map_err(proto)? {
                    Message::PartialResult(reply) => {
                        if let Some(error) = reply.error {
                            return Err(format!(
                                "partition {} rejected: {error}",
                                reply.partition_id
                            ));
                        }
                        let Some(mut result) = reply.result else {
                            return Err("PARTIAL_RESULT without result or error".into());
                        };
                        result.worker_id = self.id;
                        let done = result.partition_id == pid;
                        let _ = events.send(Event::Result(self.id, Box::new(result)));
                        if done {
                            break;
                        }
                    }
                    other => {
                        return Err(format!(
                            "expected PARTIAL_RESULT, got {}",
                            other.type_name()
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

fn next_non_heartbeat(reader: &mut BufReader<TcpStream>) -> Result<Message, ProtocolError> {
    loop {
        match read_message(reader)? {
            Message::Heartbeat(_) => continue,
            other => return Ok(other),
        }
    }
}

/// Run a job on worker processes: connect to every endpoint, hand out
/// partitions as workers become idle, broadcast the program to each worker
/// before its first subtask, requeue the work of workers that fail, and
/// reduce the partial results. `total_duration` is wall-clock milliseconds.
pub fn run_real_job(
    program: &SourceProgram,
    params: &TaskParameters,
    strategy: DistributionStrategy,
    cluster: &RealCluster,
    options: &SubtaskOptions,
) -> Result<CombinedResult, JobError> {
    if cluster.endpoints.is_empty() {
        return Err(JobError::Config(
            "real mode needs at least one worker endpoint".into(),
        ));
    }
    check_baseline(program, params)?;
    let partitions = make_partitions(params, strategy, program)?;
    let started = Instant::now();
    let artifact =
        Arc::new(String::from_utf8(program.artifact_bytes().to_vec()).expect("artifact is utf-8"));
    let (event_tx, events) = mpsc::channel();
    let mut commands = Vec::new();
    let mut handles = Vec::new();
    for (i, endpoint) in cluster.endpoints.iter().enumerate() {
        let (tx, rx) = mpsc::channel();
        commands.push(tx);
        let link = Link {
            id: i as u32,
            endpoint: endpoint.clone(),
            hash: program.content_hash().to_string(),
            artifact: artifact.clone(),
            step_limit: params.step_limit,
            cost_model: cluster.cost_model,
            options: *options,
            connect_timeout: Duration::from_millis(cluster.connect_timeout_ms),
            failure_timeout: Duration::from_millis(cluster.failure_timeout_ms),
        };
        let events = event_tx.clone();
        handles.push(thread::spawn(move || link.run(rx, events)));
    }
    drop(event_tx);

    let outcome = coordinate(&partitions, cluster, &commands, &events, started);
    for tx in &commands {
        let _ = tx.send(Command::Shutdown);
    }
    drop(commands);
    for h in handles {
        let _ = h.join();
    }
    let table = outcome?;
    let mut combined = table.into_results().finish(partitions.len() as u32)?;
    combined.total_duration = started.elapsed().as_millis() as u64;
    combined.duration_unit = DurationUnit::Milliseconds;
    info!(
        "real job finished: {} partitions, {} mutants, {} ms",
        partitions.len(),
        combined.statuses.len(),
        combined.total_duration
    );
    Ok(combined)
}

/// The single owner of the assignment table.
fn coordinate(
    partitions: &[Partition],
    cluster: &RealCluster,
    commands: &[Sender<Command>],
    events: &Receiver<Event>,
    started: Instant,
) -> Result<AssignmentTable, JobError> {
    let mut table = AssignmentTable::new(partitions.len() as u32, commands.len() as u32);
    let mut idle: BTreeSet<u32> = BTreeSet::new();
    // Hold the first dispatch until every link has finished its handshake
    // or failed, so early work is spread over all reachable workers rather
    // than going to whichever connected first.
    let mut reported: BTreeSet<u32> = BTreeSet::new();
    let deadline = cluster
        .job_timeout_ms
        .map(|ms| started + Duration::from_millis(ms));

    let dispatch = |table: &mut AssignmentTable, idle: &mut BTreeSet<u32>| {
        while let Some(&w) = idle.iter().next() {
            match table.assign_next(w) {
                Some(pid) => {
                    idle.remove(&w);
                    debug!("partition {pid} -> worker {w}");
                    if commands[w as usize]
                        .send(Command::Assign(partitions[pid as usize].clone()))
                        .is_err()
                    {
                        warn!("worker {w} link is gone");
                    }
                }
                None => break,
            }
        }
    };

    while !table.is_complete() {
        let event = match deadline {
            Some(d) => {
                let left = d.saturating_duration_since(Instant::now());
                match events.recv_timeout(left) {
                    Ok(e) => e,
                    Err(RecvTimeoutError::Timeout) => {
                        return Err(JobError::Timeout(table.unfinished()))
                    }
                    Err(RecvTimeoutError::Disconnected) => {
                        return Err(JobError::AllWorkersFailed(table.unfinished()))
                    }
                }
            }
            None => match events.recv() {
                Ok(e) => e,
                Err(_) => return Err(JobError::AllWorkersFailed(table.unfinished())),
            },
        };
        match event {
            Event::Ready(w) => {
                reported.insert(w);
                idle.insert(w);
            }
            Event::Result(w, partial) => {
                let pid = partial.partition_id;
                match table.record_result(w, *partial)? {
                    Arrival::Accepted => debug!("partition {pid} done by worker {w}"),
                    Arrival::Duplicate => info!("discarding duplicate result for partition {pid}"),
                }
                if table.in_flight(w).is_empty() && !table.is_failed(w) {
                    idle.insert(w);
                }
            }
            Event::Failed(w, reason) => {
                reported.insert(w);
                if table.is_failed(w) {
                    continue;
                }
                warn!("worker {w} failed: {reason}");
                idle.remove(&w);
                let requeued = table.reassign_on_failure(w)?;
                if !requeued.is_empty() {
                    info!("requeued partitions {requeued:?}");
                }
            }
        }
        if reported.len() == commands.len() {
            dispatch(&mut table, &mut idle);
        }
    }
    Ok(table)
}
