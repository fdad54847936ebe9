#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::Path;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use mutagrid::cluster::{worker_serve, JobError, WorkerExit, WorkerOptions};
use mutagrid::metrics::{generate_corpus, Corpus, CorpusSpec};
use mutagrid::mutation::Verdict;

/// A corpus small enough to analyse many times over in a test.
pub fn small_spec(seed: u64, classes: usize) -> CorpusSpec {
    CorpusSpec {
        seed,
        class_count: classes,
        mean_mutable_lines: 24.0,
        sd_mutable_lines: 8.0,
        min_mutable_lines: 8,
        max_mutable_lines: 48,
        tests_per_class: 2,
        ..CorpusSpec::default()
    }
}

pub fn small_corpus(seed: u64, classes: usize) -> Corpus {
    generate_corpus(&small_spec(seed, classes)).expect("corpus generates")
}

pub struct LocalWorker {
    pub addr: String,
    pub handle: JoinHandle<Result<WorkerExit, JobError>>,
}

pub fn spawn_worker(cache: &Path, crash_on_assignment: Option<u32>) -> LocalWorker {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let options = WorkerOptions {
        heartbeat_interval: Duration::from_millis(100),
        crash_on_assignment,
        ..WorkerOptions::new(cache)
    };
    let handle = thread::spawn(move || worker_serve(listener, &options));
    LocalWorker { addr, handle }
}

pub type Verdicts = BTreeMap<u32, Verdict>;
