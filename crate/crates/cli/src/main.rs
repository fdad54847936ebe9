use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mutagrid::cluster::{worker_serve, JobError, WorkerExit, WorkerOptions};
use mutagrid::job::{run_bench, run_job, BenchConfig, JobConfig, Mode};
use mutagrid::mutation::MutationOperator;
use mutagrid::partitioning::CombinedResult;

/// Distributed mutation analysis for MiniLang programs.
#[derive(Parser)]
#[command(name = "mutagrid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mutation-analysis job, simulated or on real workers.
    Run(RunArgs),
    /// Same as `run --mode simulated`.
    Simulate(RunArgs),
    /// Scaling experiments over strategies and cluster sizes.
    Bench(BenchArgs),
    /// Serve subtasks to a master over TCP.
    Worker(WorkerArgs),
    /// Summarise a combined.json report.
    Report {
        /// Path to combined.json.
        file: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Job file (JSON).
    #[arg(long)]
    job: Option<PathBuf>,
    /// MiniLang source; overrides the job file's program_path.
    #[arg(long)]
    program: Option<PathBuf>,
    /// by-operator | by-class | by-mutant-equal
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Chunk count for by-mutant-equal (default: workers).
    #[arg(long)]
    target_partitions: Option<usize>,
    /// simulated | real
    #[arg(long)]
    mode: Option<Mode>,
    /// Real mode: address of a running worker; repeat for more.
    #[arg(long = "endpoint")]
    endpoints: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corpus seed, used when no program is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step_limit: Option<u64>,
    #[arg(long)]
    skip_redundant_phases: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark this program instead of a generated corpus.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Strategy to include; repeat for more.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Cluster sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    workers: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of classes in the generated corpus.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    step_limit: Option<u64>,
    #[arg(long)]
    skip_redundant_phases: bool,
}

#[derive(Args)]
struct WorkerArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    /// Artifact cache directory.
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, default_value_t = 1000)]
    heartbeat_ms: u64,
    /// Fault injection for tests: die upon the N-th assignment.
    #[arg(long, hide = true)]
    crash_on_assignment: Option<u32>,
}

fn job_config(args: RunArgs, forced: Option<Mode>) -> Result<JobConfig> {
    let mut c = match &args.job {
        Some(path) => JobConfig::from_file(path)?,
        None => JobConfig::default(),
    };
    if let Some(p) = args.program {
        c.program_path = Some(p);
    }
    if let Some(s) = args.strategy {
        c.strategy = s;
    }
    if let Some(w) = args.workers {
        c.workers = w;
    }
    if let Some(k) = args.target_partitions {
        c.target_partitions = Some(k);
    }
    if let Some(m) = forced.or(args.mode) {
        c.mode = m;
    }
    if !args.endpoints.is_empty() {
        c.endpoints = args.endpoints;
    }
    if let Some(o) = args.out {
        c.out = o;
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(l) = args.step_limit {
        c.step_limit = l;
    }
    c.skip_redundant_phases |= args.skip_redundant_phases;
    Ok(c)
}

fn cmd_run(args: RunArgs, forced: Option<Mode>) -> Result<()> {
    let config = job_config(args, forced)?;
    let outcome = run_job(&config)?;
    outcome.write(&config.out)?;
    let c = &outcome.combined;
    println!(
        "{} mutants, {} killed, score {:.4}, duration {} {}",
        c.statuses.len(),
        c.score.killed,
        c.score.ratio_killed_to_total,
        c.total_duration,
        unit(c)
    );
    println!("wrote {}", config.out.join("combined.json").display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut c = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<BenchConfig>(&text)
                .map_err(|e| JobError::Config(format!("{}: {e}", path.display())))?
        }
        None => BenchConfig::default(),
    };
    if let Some(p) = args.program {
        c.program_path = Some(p);
    }
    if !args.strategies.is_empty() {
        c.strategies = args.strategies;
    }
    if !args.workers.is_empty() {
        c.workers = args.workers;
    }
    if let Some(s) = args.seed {
        c.corpus.seed = s;
    }
    if let Some(n) = args.classes {
        c.corpus.class_count = n;
    }
    if let Some(t) = args.trials {
        c.trials = t;
    }
    if let Some(l) = args.step_limit {
        c.step_limit = l;
    }
    c.skip_redundant_phases |= args.skip_redundant_phases;
    let out = args.out.unwrap_or_else(|| PathBuf::from("mutagrid-bench"));
    let report = run_bench(&c)?;
    for path in report.write(&out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_worker(args: WorkerArgs) -> Result<()> {
    let listener =
        TcpListener::bind(&args.listen).with_context(|| format!("binding {}", args.listen))?;
    println!("listening on {}", listener.local_addr()?);
    std::io::stdout().flush()?;
    let options = WorkerOptions {
        heartbeat_interval: Duration::from_millis(args.heartbeat_ms.max(1)),
        crash_on_assignment: args.crash_on_assignment,
        ..WorkerOptions::new(args.cache)
    };
    match worker_serve(listener, &options)? {
        WorkerExit::Shutdown => Ok(()),
        WorkerExit::Crashed => {
            // The injected fault: leave as abruptly as a killed process.
            std::process::exit(9);
        }
    }
}

fn unit(c: &CombinedResult) -> &'static str {
    match c.duration_unit {
        mutagrid::partitioning::DurationUnit::Virtual => "virtual",
        mutagrid::partitioning::DurationUnit::Milliseconds => "ms",
    }
}

fn cmd_report(file: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let c: CombinedResult = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a combined result", file.display()))?;
    let s = &c.score;
    println!("mutants     {}", c.statuses.len());
    println!("killed      {}", s.killed);
    println!("survived    {}", s.live);
    println!(
        "score       {:.4} (killed / total)",
        s.ratio_killed_to_total
    );
    match s.ratio_killed_to_live {
        Some(r) => println!("            {r:.4} (killed / survived)"),
        None => println!("            n/a (killed / survived: nothing survived)"),
    }
    println!("duration    {} {}", c.total_duration, unit(&c));
    println!("partials    {}", c.partials.len());
    println!();
    println!("{:<24}{:>8}", "operator", "mutants");
    for op in MutationOperator::ALL {
        println!(
            "{:<24}{:>8}",
            op.name(),
            c.per_operator_counts.get(&op).copied().unwrap_or(0)
        );
    }
    println!();
    println!("{:<24}{:>8}", "class", "mutants");
    for (class, n) in &c.per_class_counts {
        println!("{class:<24}{n:>8}");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<JobError>() {
        Some(e) => e.exit_code() as u8,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MUTAGRID_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, None),
        Command::Simulate(args) => cmd_run(args, Some(Mode::Simulated)),
        Command::Bench(args) => cmd_bench(args),
        Command::Worker(args) => cmd_worker(args),
        Command::Report { file } => cmd_report(file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
