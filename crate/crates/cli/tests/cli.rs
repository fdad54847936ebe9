use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_mutagrid");

const PROGRAM: &str = "\
class Calc {
    fn add(a: int, b: int) -> int { return a + b; }
    fn neg(i: int) -> int { return -i; }
    fn pos(x: int) -> bool { if (x > 0) { return true; } return false; }
    test fn t_add() { assert Calc.add(2, 3) == 5; }
    test fn t_neg() { assert Calc.neg(4) == -4; }
    test fn t_pos() { assert Calc.pos(1); }
}
";

fn mutagrid(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_program(dir: &Path) -> String {
    let path = dir.join("calc.mini");
    fs::write(&path, PROGRAM).unwrap();
    path.to_string_lossy().into_owned()
}

fn combined(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("combined.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let out = dir.path().join("out");
    let o = mutagrid(&[
        "simulate",
        "--program",
        &program,
        "--strategy",
        "by-operator",
        "--workers",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["combined.json", "trace.json", "trace.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let c = combined(&out);
    assert_eq!(c["duration_unit"], "virtual");
    assert!(c["statuses"].as_array().unwrap().len() > 5);

    let o = mutagrid(&["report", out.join("combined.json").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("score") && text.contains("Calc"), "{text}");
}

#[test]
fn strategies_agree_on_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let mut seen = Vec::new();
    for strategy in ["by-operator", "by-class", "by-mutant-equal"] {
        let out = dir.path().join(strategy);
        let o = mutagrid(&[
            "run",
            "--program",
            &program,
            "--strategy",
            strategy,
            "--workers",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        seen.push(combined(&out)["statuses"].clone());
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[1], seen[2]);
}

#[test]
fn job_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    write_program(dir.path());
    let job = dir.path().join("job.json");
    // program_path is relative to the job file.
    fs::write(
        &job,
        r#"{"program_path": "calc.mini", "strategy": "by-class", "workers": 5, "classes": ["Calc"]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = mutagrid(&[
        "run",
        "--job",
        job.to_str().unwrap(),
        "--workers",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["timelines"].as_array().unwrap().len(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = mutagrid(&[
        "run",
        "--program",
        &program,
        "--strategy",
        "by-nothing",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    let job = dir.path().join("bad.json");
    fs::write(&job, r#"{"strategy": "by-class", "wokers": 2}"#).unwrap();
    let o = mutagrid(&["run", "--job", job.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wokers"));

    let o = mutagrid(&["run", "--program", &program, "--workers", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let broken = dir.path().join("broken.mini");
    fs::write(&broken, "class A { fn f( }").unwrap();
    let o = mutagrid(&["run", "--program", broken.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.mini"));

    let failing = dir.path().join("failing.mini");
    fs::write(
        &failing,
        "class A { fn f() -> int { return 1; } test fn t() { assert A.f() == 2; } }",
    )
    .unwrap();
    let o = mutagrid(&["run", "--program", failing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(4));

    // Nothing listens on a port we just released.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let o = mutagrid(&[
        "run",
        "--program",
        &program,
        "--mode",
        "real",
        "--endpoint",
        &port.to_string(),
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn bench_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = mutagrid(&[
            "bench",
            "--seed",
            "3",
            "--classes",
            "6",
            "--workers",
            "1,2,4",
            "--trials",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in [
        "scaling.csv",
        "phases.csv",
        "fit.csv",
        "histogram.csv",
        "trials.json",
        "corpus.mini",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let scaling = fs::read_to_string(a.join("scaling.csv")).unwrap();
    assert_eq!(scaling.lines().count(), 1 + 2 * 3);
}

struct Worker {
    child: Child,
    addr: String,
}

fn start_worker(cache: &Path, extra: &[&str]) -> Worker {
    let mut child = Command::new(BIN)
        .args([
            "worker",
            "--cache",
            cache.to_str().unwrap(),
            "--heartbeat-ms",
            "100",
        ])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect("announces address")
        .to_string();
    Worker { child, addr }
}

#[test]
fn real_job_survives_a_dead_worker_process() {
    let dir = tempfile::tempdir().unwrap();
    let program = write_program(dir.path());
    let serial = dir.path().join("serial");
    let o = mutagrid(&[
        "run",
        "--program",
        &program,
        "--out",
        serial.to_str().unwrap(),
    ]);
    assert!(o.status.success());

    let mut healthy = start_worker(&dir.path().join("c1"), &[]);
    let mut doomed = start_worker(&dir.path().join("c2"), &["--crash-on-assignment", "1"]);
    let out = dir.path().join("real");
    let o = mutagrid(&[
        "run",
        "--program",
        &program,
        "--mode",
        "real",
        "--strategy",
        "by-mutant-equal",
        "--target-partitions",
        "6",
        "--endpoint",
        &healthy.addr,
        "--endpoint",
        &doomed.addr,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(doomed.child.wait().unwrap().code(), Some(9));
    assert!(healthy.child.wait().unwrap().success());
    assert_eq!(combined(&out)["statuses"], combined(&serial)["statuses"]);
    assert_eq!(combined(&out)["duration_unit"], "milliseconds");
}
