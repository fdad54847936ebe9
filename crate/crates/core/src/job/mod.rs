//! Whole jobs as the command line runs them: configuration, program
//! loading, dispatch to the simulator or a real cluster, report files.

mod bench;

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::cluster::{
    run_real_job, simulate_job, worker_serve, CostModel, JobError, RealCluster, ScheduleTrace,
    SimulatedCluster, WorkerOptions,
};
use crate::metrics::{generate_corpus, CorpusSpec};
use crate::minilang::{parse_program, SourceProgram, DEFAULT_STEP_LIMIT};
use crate::mutation::{ExecutionMode, MutationOperator};
use crate::partitioning::{CombinedResult, DistributionStrategy, SubtaskOptions, TaskParameters};

pub use bench::{run_bench, BenchConfig, BenchReport, ClassRow, FitRow, ScalingRow, TrialsReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulated,
    Real,
}

impl std::str::FromStr for Mode {
    type Err = JobError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(Mode::Simulated),
            "real" => Ok(Mode::Real),
            other => Err(JobError::Config(format!(
                "unknown mode `{other}` (simulated|real)"
            ))),
        }
    }
}

/// A job file. Absent identifier lists mean "everything in the program";
/// an absent `program_path` means the synthetic corpus generated from
/// `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub program_path: Option<PathBuf>,
    pub classes: Option<Vec<String>>,
    pub tests: Option<Vec<String>>,
    pub operators: Option<Vec<MutationOperator>>,
    pub strategy: String,
    /// Chunk count for by-mutant-equal; defaults to `workers`.
    pub target_partitions: Option<usize>,
    pub step_limit: u64,
    pub seed: u64,
    pub mode: Mode,
    pub workers: usize,
    /// Real mode: `host:port` of running workers. When empty, `workers`
    /// local workers are started inside this process.
    pub endpoints: Vec<String>,
    pub cost_model: CostModel,
    pub skip_redundant_phases: bool,
    pub parallelism: usize,
    pub execution_mode: ExecutionMode,
    pub connect_timeout_ms: u64,
    pub failure_timeout_ms: u64,
    pub job_timeout_ms: Option<u64>,
    pub out: PathBuf,
}

impl Default for JobConfig {
    fn default() -> Self {
        let real = RealCluster::default();
        JobConfig {
            program_path: None,
            classes: None,
            tests: None,
            operators: None,
            strategy: "by-class".into(),
            target_partitions: None,
            step_limit: DEFAULT_STEP_LIMIT,
            seed: 1,
            mode: Mode::Simulated,
            workers: 1,
            endpoints: Vec::new(),
            cost_model: CostModel::default(),
            skip_redundant_phases: false,
            parallelism: 1,
            execution_mode: ExecutionMode::FirstKill,
            connect_timeout_ms: real.connect_timeout_ms,
            failure_timeout_ms: real.failure_timeout_ms,
            job_timeout_ms: real.job_timeout_ms,
            out: PathBuf::from("mutagrid-out"),
        }
    }
}

impl JobConfig {
    /// Parse a job file; a relative `program_path` is taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, JobError> {
        let text = fs::read_to_string(path)
            .map_err(|e| JobError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: JobConfig = serde_json::from_str(&text)
            .map_err(|e| JobError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(p), Some(dir)) = (&config.program_path, path.parent()) {
            if p.is_relative() {
                config.program_path = Some(dir.join(p));
            }
        }
        Ok(config)
    }

    pub fn distribution_strategy(&self) -> Result<DistributionStrategy, JobError> {
        let k = self.target_partitions.unwrap_or(self.workers);
        DistributionStrategy::parse(&self.strategy, k).map_err(|e| JobError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), JobError> {
        let bad = |msg: &str| Err(JobError::Config(msg.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.step_limit == 0 {
            return bad("step_limit must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.target_partitions == Some(0) {
            return bad("target_partitions must be at least 1");
        }
        self.distribution_strategy()?;
        Ok(())
    }

    pub fn subtask_options(&self) -> SubtaskOptions {
        SubtaskOptions {
            skip_redundant_phases: self.skip_redundant_phases,
            parallelism: self.parallelism,
            mode: self.execution_mode,
        }
    }

    pub fn load_program(&self) -> Result<SourceProgram, JobError> {
        match &self.program_path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    JobError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                parse_program(&text).map_err(|error| JobError::Parse {
                    path: path.display().to_string(),
                    error,
                })
            }
            None => {
                let spec = CorpusSpec {
                    seed: self.seed,
                    ..CorpusSpec::default()
                };
                Ok(generate_corpus(&spec)
                    .map_err(|e| JobError::Config(e.to_string()))?
                    .program)
            }
        }
    }

    pub fn task_parameters(&self, program: &SourceProgram) -> TaskParameters {
        let all = TaskParameters::all(program);
        TaskParameters {
            classes: self.classes.clone().unwrap_or(all.classes),
            tests: self.tests.clone().unwrap_or(all.tests),
            operators: self.operators.clone().unwrap_or(all.operators),
            step_limit: self.step_limit,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub combined: CombinedResult,
    /// Simulated mode only.
    pub trace: Option<ScheduleTrace>,
}

impl JobOutcome {
    /// Write `combined.json`, plus `trace.json` and `trace.csv` when
    /// simulated.
    pub fn write(&self, out: &Path) -> Result<(), JobError> {
        fs::create_dir_all(out)?;
        let combined = serde_json::to_string_pretty(&self.combined)
            .map_err(|e| JobError::Config(e.to_string()))?;
        fs::write(out.join("combined.json"), combined + "\n")?;
        if let Some(trace) = &self.trace {
            fs::write(out.join("trace.json"), trace.to_json() + "\n")?;
            fs::write(out.join("trace.csv"), trace.to_csv())?;
        }
        Ok(())
    }
}

pub fn run_job(config: &JobConfig) -> Result<JobOutcome, JobError> {
    config.validate()?;
    let program = config.load_program()?;
    run_job_on(config, &program)
}

/// [`run_job`] on an already loaded program.
pub fn run_job_on(config: &JobConfig, program: &SourceProgram) -> Result<JobOutcome, JobError> {
    config.validate()?;
    let params = config.task_parameters(program);
    let strategy = config.distribution_strategy()?;
    let options = config.subtask_options();
    let workers = match config.mode {
        Mode::Real if !config.endpoints.is_empty() => config.endpoints.len(),
        _ => config.workers,
    };
    log::info!(
        "job: {} classes, {} tests, {} operators, strategy {}, {workers} workers ({:?})",
        params.classes.len(),
        params.tests.len(),
        params.operators.len(),
        strategy.name(),
        config.mode
    );
    match config.mode {
        Mode::Simulated => {
            let cluster = SimulatedCluster {
                workers: config.workers,
                cost_model: config.cost_model,
            };
            let (combined, trace) = simulate_job(program, &params, strategy, &cluster, &options)?;
            Ok(JobOutcome {
                combined,
                trace: Some(trace),
            })
        }
        Mode::Real => {
            let endpoints = if config.endpoints.is_empty() {
                spawn_local_workers(config.workers)?
            } else {
                config.endpoints.clone()
            };
            let cluster = RealCluster {
                endpoints,
                connect_timeout_ms: config.connect_timeout_ms,
                failure_timeout_ms: config.failure_timeout_ms,
                job_timeout_ms: config.job_timeout_ms,
                cost_model: config.cost_model,
            };
            let combined = run_real_job(program, &params, strategy, &cluster, &options)?;
            Ok(JobOutcome {
                combined,
                trace: None,
            })
        }
    }
}

/// Start `n` workers on ephemeral localhost ports, each on its own thread
/// with a private artifact cache. They exit when the master shuts them down.
pub fn spawn_local_workers(n: usize) -> Result<Vec<String>, JobError> {
    let root = std::env::temp_dir().join(format!("mutagrid-workers-{}", std::process::id()));
    (0..n)
        .map(|i| {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?.to_string();
            let options = WorkerOptions::new(root.join(format!("w{i}")));
            thread::Builder::new()
                .name(format!("local-worker-{i}"))
                .spawn(move || {
                    if let Err(e) = worker_serve(listener, &options) {
                        log::warn!("local worker {i}: {e}");
                    }
                })?;
            Ok(addr)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<JobConfig>(r#"{"strategy": "by-class", "bogus": 1}"#);
        assert!(err.is_err());
        let ok: JobConfig =
            serde_json::from_str(r#"{"strategy": "by-operator", "workers": 4}"#).unwrap();
        assert_eq!(ok.workers, 4);
        assert_eq!(ok.step_limit, DEFAULT_STEP_LIMIT);
    }

    #[test]
    fn validation() {
        let c = JobConfig {
            strategy: "by-nothing".into(),
            ..JobConfig::default()
        };
        assert!(matches!(c.validate(), Err(JobError::Config(_))));
        let c = JobConfig {
            workers: 0,
            ..JobConfig::default()
        };
        assert!(c.validate().is_err());
        let c = JobConfig {
            strategy: "by-mutant-equal".into(),
            workers: 3,
            ..JobConfig::default()
        };
        assert_eq!(
            c.distribution_strategy().unwrap(),
            DistributionStrategy::ByMutantEqual {
                target_partitions: 3
            }
        );
    }

    #[test]
    fn parse_failure_is_reported_as_such() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mini");
        fs::write(&path, "class A { fn f( }").unwrap();
        let c = JobConfig {
            program_path: Some(path),
            ..JobConfig::default()
        };
        let err = run_job(&c).unwrap_err();
        assert!(matches!(err, JobError::Parse { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn baseline_failure_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.mini");
        fs::write(
            &path,
            "class A { fn f(a: int) -> int { return a + 1; } test fn t() { assert A.f(1) == 3; } }",
        )
        .unwrap();
        let c = JobConfig {
            program_path: Some(path),
            ..JobConfig::default()
        };
        let err = run_job(&c).unwrap_err();
        assert!(matches!(err, JobError::BaselineFailed(_)));
        assert_eq!(err.exit_code(), 4);
    }
}
