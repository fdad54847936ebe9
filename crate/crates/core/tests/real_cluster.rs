//! The master/worker runtime over localhost TCP.

mod common;

use std::io::BufReader;
use std::net::TcpStream;
use std::time::Duration;

use common::{small_corpus, spawn_worker};
use mutagrid::cluster::protocol::{
    read_message, write_message, Assign, Broadcast, BroadcastStatus, Hello, Message, Shutdown,
    PROTOCOL_VERSION,
};
use mutagrid::cluster::{run_real_job, run_serial, CostModel, JobError, RealCluster, WorkerExit};
use mutagrid::partitioning::{
    make_partitions, DistributionStrategy, DurationUnit, SubtaskOptions, TaskParameters,
};

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Conn {
    fn open(addr: &str) -> (Conn, Hello) {
        let stream = TcpStream::connect(addr).unwrap();
        stream
            .set_read_timeout(Some(Duration::from_secs(20)))
            .unwrap();
        let mut c = Conn {
            reader: BufReader::new(stream.try_clone().unwrap()),
            writer: stream,
        };
        c.send(Message::Hello(Hello {
            role: "master".into(),
            version: PROTOCOL_VERSION,
            capabilities: vec![],
            cached_artifacts: vec![],
            heartbeat_ms: None,
        }));
        match c.recv() {
            Message::Hello(h) => (c, h),
            other => panic!("expected HELLO, got {}", other.type_name()),
        }
    }

    fn send(&mut self, m: Message) {
        write_message(&mut self.writer, &m).unwrap();
    }

    /// Next message that is not a heartbeat.
    fn recv(&mut self) -> Message {
        loop {
            match read_message(&mut self.reader).unwrap() {
                Message::Heartbeat(_) => continue,
                m => return m,
            }
        }
    }
}

fn artifact(p: &mutagrid::minilang::SourceProgram) -> String {
    String::from_utf8(p.artifact_bytes().to_vec()).unwrap()
}

#[test]
fn broadcast_is_cached_across_connections() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(1, 2);
    let hash = corpus.program.content_hash().to_string();
    let w = spawn_worker(dir.path(), None);

    let (mut c, hello) = Conn::open(&w.addr);
    assert_eq!(hello.role, "worker");
    assert!(hello.cached_artifacts.is_empty());
    c.send(Message::BroadcastArtifact(Broadcast {
        hash: hash.clone(),
        artifact: Some(artifact(&corpus.program)),
        status: None,
        error: None,
    }));
    match c.recv() {
        Message::BroadcastArtifact(b) => assert_eq!(b.status, Some(BroadcastStatus::Stored)),
        other => panic!("{}", other.type_name()),
    }
    drop(c);

    let (mut c, hello) = Conn::open(&w.addr);
    assert_eq!(hello.cached_artifacts, vec![hash.clone()]);
    assert!(dir.path().join(format!("{hash}.mini")).exists());
    c.send(Message::BroadcastArtifact(Broadcast {
        hash,
        artifact: None,
        status: None,
        error: None,
    }));
    match c.recv() {
        Message::BroadcastArtifact(b) => assert_eq!(b.status, Some(BroadcastStatus::AlreadyCached)),
        other => panic!("{}", other.type_name()),
    }
    c.send(Message::Shutdown(Shutdown { reason: None }));
    assert_eq!(w.handle.join().unwrap().unwrap(), WorkerExit::Shutdown);
}

#[test]
fn tampered_artifact_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(2, 1);
    let w = spawn_worker(dir.path(), None);
    let (mut c, _) = Conn::open(&w.addr);
    let mut text = artifact(&corpus.program);
    text.push_str("\n// extra\n");
    c.send(Message::BroadcastArtifact(Broadcast {
        hash: corpus.program.content_hash().to_string(),
        artifact: Some(text),
        status: None,
        error: None,
    }));
    match c.recv() {
        Message::BroadcastArtifact(b) => {
            assert_eq!(b.status, Some(BroadcastStatus::Rejected));
            assert!(b.error.unwrap().contains("mismatch"));
        }
        other => panic!("{}", other.type_name()),
    }
    c.send(Message::Shutdown(Shutdown { reason: None }));
    w.handle.join().unwrap().unwrap();
}

#[test]
fn assignment_without_artifact_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(3, 1);
    let params = TaskParameters::all(&corpus.program);
    let partition = make_partitions(&params, DistributionStrategy::ByClass, &corpus.program)
        .unwrap()
        .remove(0);
    let w = spawn_worker(dir.path(), None);
    let (mut c, _) = Conn::open(&w.addr);
    c.send(Message::AssignSubtask(Assign {
        program_hash: corpus.program.content_hash().to_string(),
        partition,
        step_limit: 10_000,
        cost_model: CostModel::default(),
        options: SubtaskOptions::default(),
    }));
    match c.recv() {
        Message::PartialResult(r) => {
            assert_eq!(r.partition_id, 0);
            assert!(r.result.is_none());
            assert_eq!(r.error.as_deref(), Some("artifact missing"));
        }
        other => panic!("{}", other.type_name()),
    }
    c.send(Message::Shutdown(Shutdown { reason: None }));
    w.handle.join().unwrap().unwrap();
}

#[test]
fn heartbeats_flow_while_idle() {
    let dir = tempfile::tempdir().unwrap();
    let w = spawn_worker(dir.path(), None);
    let (mut c, hello) = Conn::open(&w.addr);
    assert_eq!(hello.heartbeat_ms, Some(100));
    let mut seqs = Vec::new();
    while seqs.len() < 2 {
        if let Message::Heartbeat(h) = read_message(&mut c.reader).unwrap() {
            assert_eq!(h.busy_with, None);
            seqs.push(h.seq);
        }
    }
    assert!(seqs[0] < seqs[1]);
    c.send(Message::Shutdown(Shutdown { reason: None }));
    w.handle.join().unwrap().unwrap();
}

fn cluster(endpoints: Vec<String>) -> RealCluster {
    RealCluster {
        endpoints,
        connect_timeout_ms: 2_000,
        failure_timeout_ms: 5_000,
        job_timeout_ms: Some(120_000),
        cost_model: CostModel::default(),
    }
}

#[test]
fn real_job_matches_serial() {
    let corpus = small_corpus(4, 5);
    let params = TaskParameters {
        step_limit: 20_000,
        ..TaskParameters::all(&corpus.program)
    };
    let serial = run_serial(
        &corpus.program,
        &params,
        &CostModel::default(),
        &SubtaskOptions::default(),
    )
    .unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let workers = [spawn_worker(d1.path(), None), spawn_worker(d2.path(), None)];
    let endpoints = workers.iter().map(|w| w.addr.clone()).collect();
    let real = run_real_job(
        &corpus.program,
        &params,
        DistributionStrategy::ByClass,
        &cluster(endpoints),
        &SubtaskOptions::default(),
    )
    .unwrap();
    assert_eq!(real.verdicts(), serial.verdicts());
    assert_eq!(real.duration_unit, DurationUnit::Milliseconds);
    assert_eq!(real.partials.len(), 5);
    assert!(real.partials.iter().all(|p| p.wall_ms.is_some()));
    for w in workers {
        assert_eq!(w.handle.join().unwrap().unwrap(), WorkerExit::Shutdown);
    }
}

#[test]
fn crashed_worker_work_is_reassigned() {
    let corpus = small_corpus(5, 6);
    let params = TaskParameters {
        step_limit: 20_000,
        ..TaskParameters::all(&corpus.program)
    };
    let serial = run_serial(
        &corpus.program,
        &params,
        &CostModel::default(),
        &SubtaskOptions::default(),
    )
    .unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let healthy = spawn_worker(d1.path(), None);
    let doomed = spawn_worker(d2.path(), Some(2));
    let endpoints = vec![healthy.addr.clone(), doomed.addr.clone()];
    let real = run_real_job(
        &corpus.program,
        &params,
        DistributionStrategy::ByClass,
        &cluster(endpoints),
        &SubtaskOptions::default(),
    )
    .unwrap();
    assert_eq!(real.verdicts(), serial.verdicts());
    assert_eq!(doomed.handle.join().unwrap().unwrap(), WorkerExit::Crashed);
    assert_eq!(
        healthy.handle.join().unwrap().unwrap(),
        WorkerExit::Shutdown
    );
}

#[test]
fn every_worker_lost_aborts_the_job() {
    let corpus = small_corpus(6, 3);
    let params = TaskParameters::all(&corpus.program);
    let d1 = tempfile::tempdir().unwrap();
    let doomed = spawn_worker(d1.path(), Some(1));
    let err = run_real_job(
        &corpus.program,
        &params,
        DistributionStrategy::ByClass,
        &cluster(vec![doomed.addr.clone()]),
        &SubtaskOptions::default(),
    )
    .unwrap_err();
    match &err {
        JobError::AllWorkersFailed(unfinished) => assert_eq!(unfinished, &vec![0, 1, 2]),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 5);
}

#[test]
fn unreachable_workers_are_a_cluster_failure() {
    // Bind then drop, leaving a port nothing listens on.
    let addr = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let corpus = small_corpus(7, 1);
    let params = TaskParameters::all(&corpus.program);
    let mut c = cluster(vec![addr.to_string()]);
    c.connect_timeout_ms = 500;
    let err = run_real_job(
        &corpus.program,
        &params,
        DistributionStrategy::ByOperator,
        &c,
        &SubtaskOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, JobError::AllWorkersFailed(_)), "{err}");
    assert_eq!(err.exit_code(), 5);
}
