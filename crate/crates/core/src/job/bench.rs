//! Scaling experiments: every strategy at every cluster size, in simulation.
//!
//! A mutant's status depends only on the program, the mutant, the tests and
//! the step limit, never on the partition it travels in. The harness
//! therefore executes each mutant once and lets every partitioning reuse the
//! statuses; partitions still go through the subtask code for their phase
//! charges.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    check_baseline, list_schedule, schedule_partials, subtask_cost, CostModel, JobError,
};
use crate::metrics::{
    generate_corpus, linear_fit, operator_histogram, percent_improvement, trial_stats,
    CorpusManifest, CorpusSpec, TrialSet,
};
use crate::minilang::{parse_program, SourceProgram};
use crate::mutation::{
    execute_mutant_with, generate_mutants, mutable_lines_per_class, resolve_identifiers,
    MutantStatus, MutationOperator,
};
use crate::partitioning::{
    make_partitions, run_subtask_with, DistributionStrategy, PartialResult, SubtaskOptions,
    TaskParameters,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Corpus to generate when `program_path` is absent; its seed also
    /// drives the trial orderings.
    pub corpus: CorpusSpec,
    pub program_path: Option<PathBuf>,
    pub strategies: Vec<String>,
    pub workers: Vec<usize>,
    /// Chunk count for by-mutant-equal; defaults to the cluster size.
    pub target_partitions: Option<usize>,
    pub step_limit: u64,
    pub cost_model: CostModel,
    pub skip_redundant_phases: bool,
    /// Schedules per strategy at the largest cluster size, each with the
    /// partitions queued in a different seeded order.
    pub trials: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            corpus: CorpusSpec::default(),
            program_path: None,
            strategies: vec!["by-operator".into(), "by-class".into()],
            workers: vec![1, 2, 4, 8, 12, 16],
            target_partitions: None,
            step_limit: 50_000,
            cost_model: CostModel::default(),
            skip_redundant_phases: false,
            trials: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub strategy: String,
    #[serde(rename = "P")]
    pub workers: usize,
    pub duration: u64,
}

/// One class, analysed as its own by-class subtask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub mutable_lines: usize,
    pub mutants: usize,
    pub scan: u64,
    pub dependency_analysis: u64,
    pub generation: u64,
    pub execution: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub strategy: String,
    pub durations: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    #[serde(rename = "P")]
    pub workers: usize,
    pub seed: u64,
    pub sets: Vec<TrialRow>,
    /// Fractional reduction of by-class mean duration relative to
    /// by-operator, when both were run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by_class_improvement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub scaling: Vec<ScalingRow>,
    pub classes: Vec<ClassRow>,
    pub fits: Vec<FitRow>,
    pub histogram: BTreeMap<MutationOperator, u64>,
    pub trials: Option<TrialsReport>,
    pub manifest: Option<CorpusManifest>,
    /// Canonical text of the benchmarked program.
    pub program_text: String,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), JobError> {
        let bad = |msg: &str| Err(JobError::Config(msg.to_string()));
        if self.strategies.is_empty() {
            return bad("bench needs at least one strategy");
        }
        if self.workers.is_empty() || self.workers.contains(&0) {
            return bad("cluster sizes must be non-empty and positive");
        }
        if self.step_limit == 0 {
            return bad("step_limit must be at least 1");
        }
        if self.target_partitions == Some(0) {
            return bad("target_partitions must be at least 1");
        }
        for s in &self.strategies {
            DistributionStrategy::parse(s, 1).map_err(|e| JobError::Config(e.to_string()))?;
        }
        self.corpus
            .validate()
            .map_err(|e| JobError::Config(e.to_string()))
    }

    fn strategy(&self, name: &str, workers: usize) -> DistributionStrategy {
        DistributionStrategy::parse(name, self.target_partitions.unwrap_or(workers))
            .expect("validated")
    }
}

/// Statuses of every mutant of the task, computed once.
struct Memo {
    tests: Vec<u32>,
    statuses: HashMap<u32, MutantStatus>,
}

/// The partials of one partitioning, with statuses from the memo.
fn partials_for(
    program: &SourceProgram,
    params: &TaskParameters,
    strategy: DistributionStrategy,
    cost: &CostModel,
    options: &SubtaskOptions,
    memo: &Memo,
) -> Result<Vec<PartialResult>, JobError> {
    let partitions = make_partitions(params, strategy, program)?;
    partitions
        .iter()
        .map(|p| {
            run_subtask_with(
                p,
                program,
                params.step_limit,
                cost,
                options,
                |m, tests| match memo.statuses.get(&m.mutant_id) {
                    Some(s) if tests == memo.tests.as_slice() => Ok(s.clone()),
                    _ => execute_mutant_with(program, m, tests, params.step_limit, options.mode),
                },
            )
            .map_err(JobError::from)
        })
        .collect()
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, JobError> {
    config.validate()?;
    let (program, manifest) = match &config.program_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| JobError::Config(format!("cannot read {}: {e}", path.display())))?;
            let program = parse_program(&text).map_err(|error| JobError::Parse {
                path: path.display().to_string(),
                error,
            })?;
            (program, None)
        }
        None => {
            let corpus =
                generate_corpus(&config.corpus).map_err(|e| JobError::Config(e.to_string()))?;
            (corpus.program, Some(corpus.manifest))
        }
    };
    let mut params = TaskParameters::all(&program);
    params.step_limit = config.step_limit;
    check_baseline(&program, &params)?;
    let options = SubtaskOptions {
        skip_redundant_phases: config.skip_redundant_phases,
        ..SubtaskOptions::default()
    };
    let cost = config.cost_model;

    let resolved = resolve_identifiers(&program, &params)?;
    let mut memo = Memo {
        tests: resolved.tests.clone(),
        statuses: HashMap::new(),
    };
    for m in generate_mutants(&program, &resolved.classes, &resolved.operators) {
        let s = execute_mutant_with(
            &program,
            &m,
            &resolved.tests,
            params.step_limit,
            options.mode,
        )?;
        memo.statuses.insert(m.mutant_id, s);
    }
    log::info!("bench: executed {} mutants", memo.statuses.len());

    let mut scaling = Vec::new();
    let mut histogram = None;
    for name in &config.strategies {
        // Partitions only depend on the cluster size through by-mutant-equal.
        let mut cached: Option<Vec<PartialResult>> = None;
        for &workers in &config.workers {
            let strategy = config.strategy(name, workers);
            let partials = match (&cached, strategy) {
                (Some(p), s) if !matches!(s, DistributionStrategy::ByMutantEqual { .. }) => {
                    p.clone()
                }
                _ => partials_for(&program, &params, strategy, &cost, &options, &memo)?,
            };
            cached = Some(partials.clone());
            let (combined, _) = schedule_partials(partials, workers, &cost)?;
            histogram.get_or_insert_with(|| operator_histogram(&combined));
            scaling.push(ScalingRow {
                strategy: name.clone(),
                workers,
                duration: combined.total_duration,
            });
        }
    }

    let by_class = partials_for(
        &program,
        &params,
        DistributionStrategy::ByClass,
        &cost,
        &options,
        &memo,
    )?;
    let lines = mutable_lines_per_class(&program);
    let classes: Vec<ClassRow> = by_class
        .iter()
        .map(|p| {
            let c = p.partition_id as usize;
            let d = &p.phase_durations;
            ClassRow {
                class: program.classes[resolved.classes[c]].name.clone(),
                mutable_lines: lines[resolved.classes[c]],
                mutants: p.statuses.len(),
                scan: d.scan,
                dependency_analysis: d.dependency_analysis,
                generation: d.generation,
                execution: d.execution,
            }
        })
        .collect();
    let mut fits = Vec::new();
    for (y, value) in [
        (
            "mutants",
            (|r: &ClassRow| r.mutants as f64) as fn(&ClassRow) -> f64,
        ),
        ("execution", |r: &ClassRow| r.execution as f64),
    ] {
        let points: Vec<(f64, f64)> = classes
            .iter()
            .map(|r| (r.mutable_lines as f64, value(r)))
            .collect();
        if let Ok(f) = linear_fit(&points) {
            fits.push(FitRow {
                x: "mutable_lines".into(),
                y: y.into(),
                n: points.len(),
                slope: f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
            });
        }
    }

    let trials = if config.trials >= 2 {
        let workers = *config.workers.iter().max().expect("validated");
        let mut sets = Vec::new();
        for name in &config.strategies {
            let strategy = config.strategy(name, workers);
            let partials = partials_for(&program, &params, strategy, &cost, &options, &memo)?;
            let costs: Vec<u64> = partials.iter().map(|p| subtask_cost(p, &cost)).collect();
            let durations: Vec<f64> = (0..config.trials)
                .map(|t| {
                    let mut order = costs.clone();
                    if t > 0 {
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(config.corpus.seed.wrapping_add(t as u64));
                        order.shuffle(&mut rng);
                    }
                    list_schedule(&order, workers, cost.broadcast_per_worker).makespan as f64
                })
                .collect();
            let set = TrialSet {
                label: name.clone(),
                durations,
            };
            let stats = trial_stats(&set).map_err(|e| JobError::Config(e.to_string()))?;
            sets.push(TrialRow {
                strategy: name.clone(),
                durations: set.durations,
                mean: stats.mean,
                stddev: stats.stddev,
            });
        }
        let mean = |s: &str| sets.iter().find(|r| r.strategy == s).map(|r| r.mean);
        let by_class_improvement = match (mean("by-operator"), mean("by-class")) {
            (Some(base), Some(treat)) => percent_improvement(base, treat).ok(),
            _ => None,
        };
        Some(TrialsReport {
            workers,
            seed: config.corpus.seed,
            sets,
            by_class_improvement,
        })
    } else {
        None
    };

    let histogram = histogram.expect("at least one strategy ran");
    Ok(BenchReport {
        scaling,
        classes,
        fits,
        histogram,
        trials,
        manifest,
        program_text: String::from_utf8_lossy(program.artifact_bytes()).into_owned(),
    })
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, JobError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| JobError::Config(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| JobError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

impl BenchReport {
    pub fn scaling_csv(&self) -> Result<String, JobError> {
        csv_string(&self.scaling)
    }

    pub fn phases_csv(&self) -> Result<String, JobError> {
        csv_string(&self.classes)
    }

    pub fn fit_csv(&self) -> Result<String, JobError> {
        csv_string(&self.fits)
    }

    pub fn histogram_csv(&self) -> Result<String, JobError> {
        #[derive(Serialize)]
        struct Row {
            operator: MutationOperator,
            count: u64,
        }
        csv_string(
            self.histogram
                .iter()
                .map(|(&operator, &count)| Row { operator, count }),
        )
    }

    /// Write scaling.csv, phases.csv, fit.csv, histogram.csv, trials.json
    /// and, for a generated corpus, corpus.json and corpus.mini.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>, JobError> {
        fs::create_dir_all(out)?;
        let mut files = vec![
            ("scaling.csv", self.scaling_csv()?),
            ("phases.csv", self.phases_csv()?),
            ("fit.csv", self.fit_csv()?),
            ("histogram.csv", self.histogram_csv()?),
        ];
        if let Some(t) = &self.trials {
            files.push(("trials.json", pretty(t)));
        }
        if let Some(m) = &self.manifest {
            files.push(("corpus.json", pretty(m)));
            files.push(("corpus.mini", self.program_text.clone()));
        }
        let mut written = Vec::new();
        for (name, content) in files {
            let path = out.join(name);
            fs::write(&path, content)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}
