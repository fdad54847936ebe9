//! Seeded generator of synthetic MiniLang projects.
//!
//! Each class holds integer functions built from accumulator updates, an
//! optional predicate and a void helper. Functions may call "leaf" functions
//! (those that make no calls) of lower-numbered classes, so the call graph is
//! acyclic and call chains stay short. Every class carries its own tests,
//! whose expected values are obtained by running the generated code.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::minilang::{
    call_function, parse_canonical, run_all_tests, SourceProgram, Value, DEFAULT_STEP_LIMIT,
};
use crate::mutation::MutationOperator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    pub class_count: usize,
    /// Class sizes, in mutable lines, follow a normal distribution
    /// truncated to `[min_mutable_lines, max_mutable_lines]`.
    pub mean_mutable_lines: f64,
    pub sd_mutable_lines: f64,
    pub min_mutable_lines: u32,
    pub max_mutable_lines: u32,
    pub tests_per_class: usize,
    /// Target fraction of function-body statement lines that are mutable.
    pub mutable_density: f64,
    /// Chance that a function contains a counting loop.
    pub loop_probability: f64,
    /// Chance that a statement of a non-leaf function calls another class.
    pub call_probability: f64,
    /// Chance that a class has a boolean predicate function.
    pub predicate_probability: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 1,
            class_count: 44,
            mean_mutable_lines: 110.0,
            sd_mutable_lines: 30.0,
            min_mutable_lines: 25,
            max_mutable_lines: 300,
            tests_per_class: 3,
            mutable_density: 0.8,
            loop_probability: 0.08,
            call_probability: 0.12,
            predicate_probability: 0.5,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |msg: &str| Err(MetricsError::InvalidCorpusSpec(msg.to_string()));
        if self.class_count == 0 {
            return bad("class_count must be at least 1");
        }
        if self.tests_per_class == 0 {
            return bad("tests_per_class must be at least 1: the program would have no tests");
        }
        if self.min_mutable_lines < 4 || self.min_mutable_lines > self.max_mutable_lines {
            return bad("mutable line range must satisfy 4 <= min <= max");
        }
        if !(self.mean_mutable_lines.is_finite() && self.sd_mutable_lines.is_finite())
            || self.sd_mutable_lines < 0.0
        {
            return bad("class size distribution parameters must be finite, sd >= 0");
        }
        if !(self.mutable_density > 0.0 && self.mutable_density <= 1.0) {
            return bad("mutable_density must lie in (0, 1]");
        }
        for (name, p) in [
            ("loop_probability", self.loop_probability),
            ("call_probability", self.call_probability),
            ("predicate_probability", self.predicate_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// What the generator put into each class, counted while generating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassManifest {
    pub name: String,
    pub mutable_lines: u32,
    pub statement_lines: u32,
    pub functions: u32,
    pub tests: u32,
    pub operator_sites: BTreeMap<MutationOperator, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub spec: CorpusSpec,
    pub program_hash: String,
    pub test_count: u32,
    pub classes: Vec<ClassManifest>,
    pub operator_sites: BTreeMap<MutationOperator, u64>,
}

pub struct Corpus {
    pub program: SourceProgram,
    pub manifest: CorpusManifest,
}

impl Corpus {
    /// Canonical source text, as written to `.mini` files.
    pub fn text(&self) -> &str {
        std::str::from_utf8(self.program.artifact_bytes()).expect("artifact is utf-8")
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus, MetricsError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes = Normal::new(spec.mean_mutable_lines, spec.sd_mutable_lines)
        .map_err(|e| MetricsError::InvalidCorpusSpec(e.to_string()))?;

    let names = class_names(&mut rng, spec.class_count);
    let mut classes: Vec<ClassGen> = Vec::with_capacity(spec.class_count);
    for (index, name) in names.into_iter().enumerate() {
        let target = loop {
            let x: f64 = sizes.sample(&mut rng).round();
            if x >= spec.min_mutable_lines as f64 && x <= spec.max_mutable_lines as f64 {
                break x as u32;
            }
        };
        let class = ClassGen::generate(&mut rng, spec, index, name, target, &classes);
        classes.push(class);
    }

    // Run the untested program to learn the values the tests will assert.
    let mut text = String::new();
    for c in &classes {
        c.render(&mut text, &[]);
    }
    let bare = parse_canonical(&text).map_err(|e| MetricsError::Generator(e.to_string()))?;
    let mut final_text = String::new();
    for (ci, c) in classes.iter().enumerate() {
        let tests = c.tests(&mut rng, spec.tests_per_class, &bare, ci);
        c.render(&mut final_text, &tests);
    }
    let program =
        parse_canonical(&final_text).map_err(|e| MetricsError::Generator(e.to_string()))?;
    let all: Vec<u32> = (0..program.tests().len() as u32).collect();
    if let Some((id, o)) = run_all_tests(&program, &all, DEFAULT_STEP_LIMIT)
        .into_iter()
        .find(|(_, o)| !o.passed())
    {
        return Err(MetricsError::Generator(format!(
            "generated test {} does not pass: {}",
            program.test_name(id),
            o.status
        )));
    }

    let mut operator_sites: BTreeMap<MutationOperator, u64> =
        MutationOperator::ALL.iter().map(|&op| (op, 0)).collect();
    let class_manifests: Vec<ClassManifest> = classes
        .iter()
        .map(|c| {
            let sites = c.stats.sites();
            for (op, n) in &sites {
                *operator_sites.entry(*op).or_default() += n;
            }
            ClassManifest {
                name: c.name.clone(),
                mutable_lines: c.stats.mutable_lines,
                statement_lines: c.stats.statement_lines,
                functions: c.functions.len() as u32,
                tests: spec.tests_per_class as u32,
                operator_sites: sites,
            }
        })
        .collect();
    let manifest = CorpusManifest {
        spec: spec.clone(),
        program_hash: program.content_hash().to_string(),
        test_count: program.tests().len() as u32,
        classes: class_manifests,
        operator_sites,
    };
    Ok(Corpus { program, manifest })
}

const STEMS: &[&str] = &[
    "Json",
    "Token",
    "Stream",
    "Type",
    "Field",
    "Element",
    "Primitive",
    "Array",
    "Object",
    "Reader",
    "Writer",
    "Adapter",
    "Factory",
    "Builder",
    "Parser",
    "Scanner",
    "Buffer",
    "Cursor",
    "Node",
    "Tree",
    "Path",
    "Date",
    "Time",
    "Zone",
    "Period",
    "Interval",
    "Chrono",
    "Matrix",
    "Vector",
    "Solver",
    "Series",
    "Sample",
    "Range",
    "Bound",
    "Cache",
    "Index",
    "Entry",
    "Queue",
];
const SUFFIXES: &[&str] = &[
    "Util", "Impl", "Core", "Base", "Helper", "Spec", "Kit", "Ops",
];
const VERBS: &[&str] = &[
    "scale", "merge", "fold", "shift", "mix", "apply", "reduce", "adjust", "limit", "count",
    "blend", "step", "align", "pack", "probe", "sum",
];

fn class_names(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    (0..n)
        .map(|i| {
            let stem = STEMS.choose(rng).expect("non-empty");
            let suffix = SUFFIXES.choose(rng).expect("non-empty");
            let mut name = format!("{stem}{suffix}");
            if !seen.insert(name.clone()) {
                name = format!("{stem}{suffix}{i}");
                seen.insert(name.clone());
            }
            name
        })
        .collect()
}

/// Generated expression, kept structured so operator sites can be counted
/// without parsing.
#[derive(Clone, Debug)]
enum GExpr {
    Lit(i64),
    Var(String),
    Neg(Box<GExpr>),
    Bin(&'static str, Box<GExpr>, Box<GExpr>),
    Call(String, String, Vec<GExpr>),
}

impl GExpr {
    fn bin(op: &'static str, l: GExpr, r: GExpr) -> GExpr {
        GExpr::Bin(op, Box::new(l), Box::new(r))
    }

    fn var(name: &str) -> GExpr {
        GExpr::Var(name.to_string())
    }

    fn render(&self, out: &mut String) {
        match self {
            GExpr::Lit(v) => {
                let _ = write!(out, "{v}");
            }
            GExpr::Var(n) => out.push_str(n),
            GExpr::Neg(e) => {
                out.push_str("-(");
                e.render(out);
                out.push(')');
            }
            GExpr::Bin(op, l, r) => {
                out.push('(');
                l.render(out);
                let _ = write!(out, " {op} ");
                r.render(out);
                out.push(')');
            }
            GExpr::Call(c, f, args) => {
                let _ = write!(out, "{c}.{f}(");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    a.render(out);
                }
                out.push(')');
            }
        }
    }

    fn count(&self, sites: &mut Sites) {
        match self {
            GExpr::Lit(_) | GExpr::Var(_) => {}
            GExpr::Neg(e) => {
                sites.invert_negs += 1;
                e.count(sites);
            }
            GExpr::Bin(op, l, r) => {
                match *op {
                    "+" | "-" | "*" | "/" | "%" => sites.math += 1,
                    "<" | "<=" | ">" | ">=" => {
                        sites.boundary += 1;
                        sites.negate += 1;
                    }
                    "==" | "!=" => sites.negate += 1,
                    _ => {}
                }
                l.count(sites);
                r.count(sites);
            }
            GExpr::Call(_, _, args) => args.iter().for_each(|a| a.count(sites)),
        }
    }
}

#[derive(Clone, Debug)]
enum GStmt {
    Let(String, GExpr),
    Assign(String, GExpr),
    Compound(String, bool, GExpr),
    If(GExpr, Vec<GStmt>, Option<Vec<GStmt>>),
    While(GExpr, Vec<GStmt>),
    Return(GExpr),
    VoidCall(GExpr),
}

impl GStmt {
    fn render(&self, out: &mut String) {
        match self {
            GStmt::Let(n, e) => {
                let _ = write!(out, "let {n} = ");
                e.render(out);
                out.push_str("; ");
            }
            GStmt::Assign(n, e) => {
                let _ = write!(out, "{n} = ");
                e.render(out);
                out.push_str("; ");
            }
            GStmt::Compound(n, add, e) => {
                let _ = write!(out, "{n} {} ", if *add { "+=" } else { "-=" });
                e.render(out);
                out.push_str("; ");
            }
            GStmt::If(c, then, other) => {
                out.push_str("if (");
                c.render(out);
                out.push_str(") { ");
                then.iter().for_each(|s| s.render(out));
                out.push_str("} ");
                if let Some(other) = other {
                    out.push_str("else { ");
                    other.iter().for_each(|s| s.render(out));
                    out.push_str("} ");
                }
            }
            GStmt::While(c, body) => {
                out.push_str("while (");
                c.render(out);
                out.push_str(") { ");
                body.iter().for_each(|s| s.render(out));
                out.push_str("} ");
            }
            GStmt::Return(e) => {
                out.push_str("return ");
                e.render(out);
                out.push_str("; ");
            }
            GStmt::VoidCall(e) => {
                e.render(out);
                out.push_str("; ");
            }
        }
    }

    /// Record sites and line counts; every statement is one canonical line.
    fn count(&self, stats: &mut Stats) {
        stats.statement_lines += 1;
        let mut own = Sites::default();
        match self {
            GStmt::Let(_, e) | GStmt::Assign(_, e) => e.count(&mut own),
            GStmt::Compound(_, _, e) => {
                own.increments += 1;
                e.count(&mut own);
            }
            GStmt::If(c, then, other) => {
                c.count(&mut own);
                then.iter().for_each(|s| s.count(stats));
                other.iter().flatten().for_each(|s| s.count(stats));
            }
            GStmt::While(c, body) => {
                c.count(&mut own);
                body.iter().for_each(|s| s.count(stats));
            }
            GStmt::Return(e) => {
                own.return_vals += 1;
                e.count(&mut own);
            }
            GStmt::VoidCall(e) => {
                own.void_calls += 1;
                e.count(&mut own);
            }
        }
        if own.total() > 0 {
            stats.mutable_lines += 1;
        }
        stats.sites.add(&own);
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Sites {
    math: u64,
    invert_negs: u64,
    return_vals: u64,
    boundary: u64,
    negate: u64,
    increments: u64,
    void_calls: u64,
}

impl Sites {
    fn total(&self) -> u64 {
        self.math
            + self.invert_negs
            + self.return_vals
            + self.boundary
            + self.negate
            + self.increments
            + self.void_calls
    }

    fn add(&mut self, o: &Sites) {
        self.math += o.math;
        self.invert_negs += o.invert_negs;
        self.return_vals += o.return_vals;
        self.boundary += o.boundary;
        self.negate += o.negate;
        self.increments += o.increments;
        self.void_calls += o.void_calls;
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Stats {
    mutable_lines: u32,
    statement_lines: u32,
    sites: Sites,
}

impl Stats {
    fn sites(&self) -> BTreeMap<MutationOperator, u64> {
        let s = &self.sites;
        BTreeMap::from([
            (MutationOperator::Math, s.math),
            (MutationOperator::InvertNegs, s.invert_negs),
            (MutationOperator::ReturnVals, s.return_vals),
            (MutationOperator::ConditionalsBoundary, s.boundary),
            (MutationOperator::NegateConditionals, s.negate),
            (MutationOperator::Increments, s.increments),
            (MutationOperator::VoidMethodCalls, s.void_calls),
        ])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FnKind {
    /// Integer function that makes no calls.
    Leaf,
    /// Integer function that may call leaves and helpers of lower classes.
    Composite,
    Predicate,
    Helper,
}

#[derive(Clone, Debug)]
struct FnGen {
    name: String,
    kind: FnKind,
    params: Vec<&'static str>,
    body: Vec<GStmt>,
}

#[derive(Clone, Debug)]
struct ClassGen {
    name: String,
    functions: Vec<FnGen>,
    stats: Stats,
}

/// Callable targets in already generated classes.
struct Callees<'a> {
    classes: &'a [ClassGen],
}

impl Callees<'_> {
    fn pick(&self, rng: &mut ChaCha8Rng, kind: FnKind) -> Option<(String, &FnGen)> {
        if self.classes.is_empty() {
            return None;
        }
        for _ in 0..4 {
            let c = self.classes.choose(rng)?;
            let candidates: Vec<&FnGen> = c.functions.iter().filter(|f| f.kind == kind).collect();
            if let Some(f) = candidates.choose(rng) {
                return Some((c.name.clone(), f));
            }
        }
        None
    }
}

struct BodyGen<'a> {
    rng: &'a mut ChaCha8Rng,
    spec: &'a CorpusSpec,
    vars: Vec<String>,
    next_local: usize,
    callees: Option<Callees<'a>>,
    own_helper: Option<(String, String)>,
}

impl BodyGen<'_> {
    /// A literal or a variable other than the accumulator, so that updates
    /// like `acc -= acc` never wipe out what came before.
    fn term(&mut self) -> GExpr {
        if self.rng.random_bool(0.6) {
            let names: Vec<&String> = self.vars.iter().filter(|v| *v != "acc").collect();
            GExpr::var(names.choose(self.rng).expect("parameters are never empty"))
        } else {
            GExpr::Lit(self.rng.random_range(1..10))
        }
    }

    fn arith(&mut self, depth: u32) -> GExpr {
        let roll: f64 = self.rng.random();
        if roll < 0.08 {
            let op = if self.rng.random_bool(0.5) { "/" } else { "%" };
            let k = self.rng.random_range(2..10);
            return GExpr::bin(op, self.term(), GExpr::Lit(k));
        }
        let op = *[("+", 4), ("-", 3), ("*", 2)]
            .choose_weighted(self.rng, |w| w.1)
            .map(|(op, _)| op)
            .expect("weights positive");
        let lhs = if depth > 0 && self.rng.random_bool(0.3) {
            self.arith(depth - 1)
        } else {
            self.term()
        };
        GExpr::bin(op, lhs, self.term())
    }

    fn cond(&mut self) -> GExpr {
        if self.rng.random_bool(0.2) {
            let k = self.rng.random_range(2..6);
            let r = self.rng.random_range(0..k);
            let op = if self.rng.random_bool(0.5) {
                "=="
            } else {
                "!="
            };
            return GExpr::bin(
                op,
                GExpr::bin("%", GExpr::var("acc"), GExpr::Lit(k)),
                GExpr::Lit(r),
            );
        }
        let op = *["<", "<=", ">", ">="].choose(self.rng).expect("non-empty");
        let lhs = GExpr::var(self.vars.choose(self.rng).expect("vars non-empty"));
        GExpr::bin(op, lhs, self.term())
    }

    fn fresh(&mut self, prefix: &str) -> String {
        let n = format!("{prefix}{}", self.next_local);
        self.next_local += 1;
        n
    }

    fn plain(&mut self) -> GStmt {
        let n = self.fresh("v");
        let src = self.vars.choose(self.rng).expect("vars non-empty").clone();
        self.vars.push(n.clone());
        GStmt::Let(n, GExpr::Var(src))
    }

    /// One statement group with at most `budget` mutable lines; returns the
    /// statements and the mutable lines they use.
    fn unit(&mut self, budget: u32, allow_loop: &mut bool) -> (Vec<GStmt>, u32) {
        if *allow_loop && budget >= 3 {
            *allow_loop = false;
            let i = self.fresh("i");
            let k = self.rng.random_range(2..6);
            let step = self.arith(0);
            let body = vec![
                GStmt::Compound(i.clone(), true, GExpr::Lit(1)),
                GStmt::Compound("acc".into(), true, GExpr::bin("+", GExpr::var(&i), step)),
            ];
            let stmts = vec![
                GStmt::Let(i.clone(), GExpr::Lit(0)),
                GStmt::While(GExpr::bin("<", GExpr::var(&i), GExpr::Lit(k)), body),
            ];
            return (stmts, 3);
        }
        if let Some(callees) = &self.callees {
            if self.rng.random_bool(self.spec.call_probability) {
                let void = self.rng.random_bool(0.4);
                let kind = if void { FnKind::Helper } else { FnKind::Leaf };
                if let Some((class, f)) = callees.pick(self.rng, kind) {
                    let (fname, arity) = (f.name.clone(), f.params.len());
                    let args: Vec<GExpr> = (0..arity)
                        .map(|i| {
                            if i == 0 {
                                GExpr::var("acc")
                            } else {
                                self.term()
                            }
                        })
                        .collect();
                    let call = GExpr::Call(class, fname, args);
                    let stmt = if void {
                        GStmt::VoidCall(call)
                    } else {
                        GStmt::Assign("acc".into(), GExpr::bin("+", GExpr::var("acc"), call))
                    };
                    return (vec![stmt], 1);
                }
            }
        }
        let roll = self.rng.random_range(0..100);
        match roll {
            0..=24 => {
                let n = self.fresh("v");
                let e = self.arith(1);
                self.vars.push(n.clone());
                (vec![GStmt::Let(n, e)], 1)
            }
            25..=44 => {
                let op = *["+", "-", "*"].choose(self.rng).expect("non-empty");
                let t = self.term();
                (
                    vec![GStmt::Assign(
                        "acc".into(),
                        GExpr::bin(op, GExpr::var("acc"), t),
                    )],
                    1,
                )
            }
            45..=59 => {
                let t = self.term();
                (
                    vec![GStmt::Compound("acc".into(), self.rng.random_bool(0.6), t)],
                    1,
                )
            }
            60..=84 if budget >= 2 => {
                let c = self.cond();
                let t = self.term();
                let then = vec![GStmt::Compound("acc".into(), true, t)];
                if budget >= 3 && self.rng.random_bool(0.3) {
                    let e = self.arith(0);
                    let other = vec![GStmt::Assign("acc".into(), e)];
                    (vec![GStmt::If(c, then, Some(other))], 3)
                } else {
                    (vec![GStmt::If(c, then, None)], 2)
                }
            }
            85..=92 => {
                let n = self.fresh("v");
                let src = self.vars.choose(self.rng).expect("vars non-empty").clone();
                let e = if self.rng.random_bool(0.5) {
                    GExpr::Neg(Box::new(GExpr::Var(src)))
                } else {
                    GExpr::bin(
                        "-",
                        GExpr::var("acc"),
                        GExpr::Neg(Box::new(GExpr::Var(src))),
                    )
                };
                self.vars.push(n.clone());
                (vec![GStmt::Let(n, e)], 1)
            }
            _ => match self.own_helper.clone() {
                Some((class, helper)) => (
                    vec![GStmt::VoidCall(GExpr::Call(
                        class,
                        helper,
                        vec![GExpr::var("acc")],
                    ))],
                    1,
                ),
                None => {
                    let t = self.term();
                    (vec![GStmt::Compound("acc".into(), false, t)], 1)
                }
            },
        }
    }

    /// Statements (before the return) using exactly `budget` mutable lines,
    /// interleaved with plain copies to approach the density target.
    fn body(&mut self, mut budget: u32, mut allow_loop: bool) -> Vec<GStmt> {
        let plain_rate = (1.0 - self.spec.mutable_density) / self.spec.mutable_density;
        let mut out = Vec::new();
        while budget > 0 {
            let (stmts, used) = self.unit(budget, &mut allow_loop);
            debug_assert!(used <= budget);
            budget -= used;
            out.extend(stmts);
            let mut extra = plain_rate * used as f64;
            while extra > 0.0 {
                if self.rng.random_bool(extra.min(1.0)) {
                    out.push(self.plain());
                }
                extra -= 1.0;
            }
        }
        out
    }
}

impl ClassGen {
    fn generate(
        rng: &mut ChaCha8Rng,
        spec: &CorpusSpec,
        index: usize,
        name: String,
        target: u32,
        lower: &[ClassGen],
    ) -> ClassGen {
        let mut functions = Vec::new();
        let mut remaining = target;
        let helper_name = "note".to_string();

        // Void helper: `let t = x * k;` plus an optional guarded update.
        {
            // One line, or three with the guarded update.
            let lines = if rng.random_bool(0.5) { 3 } else { 1 };
            let mut body = vec![GStmt::Let(
                "t".into(),
                GExpr::bin("*", GExpr::var("x"), GExpr::Lit(rng.random_range(2..5))),
            )];
            if lines == 3 {
                body.push(GStmt::If(
                    GExpr::bin(">", GExpr::var("t"), GExpr::Lit(rng.random_range(10..100))),
                    vec![GStmt::Compound("t".into(), false, GExpr::Lit(1))],
                    None,
                ));
            }
            remaining -= lines;
            functions.push(FnGen {
                name: helper_name.clone(),
                kind: FnKind::Helper,
                params: vec!["x"],
                body,
            });
        }

        if remaining >= 2 && rng.random_bool(spec.predicate_probability) {
            let k = rng.random_range(0..20);
            let op = *["<", "<=", ">", ">="].choose(rng).expect("non-empty");
            functions.push(FnGen {
                name: "check".into(),
                kind: FnKind::Predicate,
                params: vec!["a", "b"],
                body: vec![
                    GStmt::Let(
                        "s".into(),
                        GExpr::bin("+", GExpr::var("a"), GExpr::var("b")),
                    ),
                    GStmt::Return(GExpr::bin(op, GExpr::var("s"), GExpr::Lit(k))),
                ],
            });
            remaining -= 2;
        }

        let mut n = 0;
        while remaining > 0 {
            // Each integer function has a first line and a return line.
            let size = rng.random_range(6..=16).min(remaining);
            let size = if remaining - size < 3 {
                remaining
            } else {
                size
            };
            let kind = if n % 2 == 0 || index == 0 {
                FnKind::Leaf
            } else {
                FnKind::Composite
            };
            let arity = rng.random_range(1..=3);
            let params: Vec<&'static str> = ["a", "b", "c"][..arity].to_vec();
            let mut gen = BodyGen {
                rng: &mut *rng,
                spec,
                vars: params.iter().map(|p| p.to_string()).collect(),
                next_local: 0,
                callees: (kind == FnKind::Composite).then_some(Callees { classes: lower }),
                own_helper: (kind == FnKind::Composite)
                    .then(|| (name.clone(), helper_name.clone())),
            };
            let first = GStmt::Let("acc".into(), GExpr::bin("+", GExpr::var("a"), gen.term()));
            gen.vars.push("acc".into());
            let mut body = vec![first];
            if size >= 2 {
                let allow_loop = gen.rng.random_bool(spec.loop_probability);
                body.extend(gen.body(size - 2, allow_loop));
                let ret = if gen.rng.random_bool(0.5) {
                    GExpr::var("acc")
                } else {
                    let t = gen.term();
                    GExpr::bin("+", GExpr::var("acc"), t)
                };
                body.push(GStmt::Return(ret));
            } else {
                body.push(GStmt::Return(GExpr::var("acc")));
                // A one-line budget still needs a return; `return acc;` is
                // itself mutable, so drop the first-line arithmetic.
                body[0] = GStmt::Let("acc".into(), GExpr::var("a"));
            }
            functions.push(FnGen {
                name: format!("{}{n}", VERBS[n % VERBS.len()]),
                kind,
                params,
                body,
            });
            remaining -= size;
            n += 1;
        }

        let mut stats = Stats::default();
        for f in &functions {
            f.body.iter().for_each(|s| s.count(&mut stats));
        }
        debug_assert_eq!(stats.mutable_lines, target);
        ClassGen {
            name,
            functions,
            stats,
        }
    }

    fn render(&self, out: &mut String, tests: &[String]) {
        let _ = writeln!(out, "class {} {{", self.name);
        for f in &self.functions {
            let params: Vec<String> = f.params.iter().map(|p| format!("{p}: int")).collect();
            let ret = match f.kind {
                FnKind::Leaf | FnKind::Composite => " -> int",
                FnKind::Predicate => " -> bool",
                FnKind::Helper => "",
            };
            let _ = write!(out, "  fn {}({}){ret} {{ ", f.name, params.join(", "));
            f.body.iter().for_each(|s| s.render(out));
            out.push_str("}\n");
        }
        for (i, body) in tests.iter().enumerate() {
            let _ = writeln!(out, "  test fn test{i}() {{ {body} }}");
        }
        out.push_str("}\n");
    }

    /// Test bodies asserting values computed on `program`.
    fn tests(
        &self,
        rng: &mut ChaCha8Rng,
        count: usize,
        program: &SourceProgram,
        ci: usize,
    ) -> Vec<String> {
        let testable: Vec<(usize, &FnGen)> = self
            .functions
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind != FnKind::Helper)
            .collect();
        let mut bodies = vec![String::new(); count];
        let slots = testable.len().max(count);
        for slot in 0..slots {
            let body = &mut bodies[slot % count];
            if testable.is_empty() {
                body.push_str("assert true; ");
                continue;
            }
            let (fi, f) = testable[slot % testable.len()];
            let calls = if slot < testable.len() { 2 } else { 1 };
            for _ in 0..calls {
                for _attempt in 0..5 {
                    let args: Vec<i64> =
                        f.params.iter().map(|_| rng.random_range(-5..25)).collect();
                    let values: Vec<Value> = args.iter().map(|&a| Value::Int(a)).collect();
                    let r = crate::minilang::FnRef {
                        class: ci as u32,
                        function: fi as u32,
                    };
                    let (value, outcome) =
                        call_function(program, r, &values, DEFAULT_STEP_LIMIT / 10);
                    if !outcome.passed() {
                        continue;
                    }
                    let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                    let expected = match value {
                        Some(Value::Int(v)) if v == i64::MIN => {
                            "(-9223372036854775807 - 1)".to_string()
                        }
                        Some(Value::Int(v)) => v.to_string(),
                        Some(Value::Bool(b)) => b.to_string(),
                        _ => continue,
                    };
                    let _ = write!(
                        body,
                        "assert {}.{}({}) == {expected}; ",
                        self.name,
                        f.name,
                        args.join(", ")
                    );
                    break;
                }
            }
        }
        for body in &mut bodies {
            if body.is_empty() {
                body.push_str("assert true; ");
            }
        }
        bodies
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> CorpusSpec {
        CorpusSpec {
            seed,
            class_count: 6,
            mean_mutable_lines: 30.0,
            sd_mutable_lines: 10.0,
            min_mutable_lines: 8,
            max_mutable_lines: 60,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn deterministic_from_seed() {
        let a = generate_corpus(&small(3)).unwrap();
        let b = generate_corpus(&small(3)).unwrap();
        assert_eq!(a.text(), b.text());
        assert_eq!(a.manifest, b.manifest);
        let c = generate_corpus(&small(4)).unwrap();
        assert_ne!(a.text(), c.text());
    }

    #[test]
    fn class_count_and_tests_echo_spec() {
        let c = generate_corpus(&small(5)).unwrap();
        assert_eq!(c.program.classes.len(), 6);
        assert_eq!(c.program.tests().len(), 18);
        assert_eq!(c.manifest.test_count, 18);
    }

    #[test]
    fn rejects_untestable_specs() {
        let spec = CorpusSpec {
            tests_per_class: 0,
            ..small(1)
        };
        assert!(matches!(
            generate_corpus(&spec),
            Err(MetricsError::InvalidCorpusSpec(_))
        ));
        let spec = CorpusSpec {
            class_count: 0,
            ..small(1)
        };
        assert!(generate_corpus(&spec).is_err());
    }

    #[test]
    fn sizes_respect_bounds() {
        let c = generate_corpus(&small(9)).unwrap();
        for m in &c.manifest.classes {
            assert!((8..=60).contains(&m.mutable_lines), "{m:?}");
        }
    }

    #[test]
    fn manifest_matches_independent_analysis() {
        use crate::mutation::{generate_mutants, mutable_lines_per_class};
        let c = generate_corpus(&small(11)).unwrap();
        let lines = mutable_lines_per_class(&c.program);
        for (i, m) in c.manifest.classes.iter().enumerate() {
            assert_eq!(lines[i], m.mutable_lines as usize, "{}", m.name);
            for (&op, &n) in &m.operator_sites {
                assert_eq!(
                    generate_mutants(&c.program, &[i], &[op]).len() as u64,
                    n,
                    "{} {op}",
                    m.name
                );
            }
        }
    }
}
