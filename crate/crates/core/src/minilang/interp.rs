//! Tree-walking interpreter with a step budget.

use serde::{Deserialize, Serialize};

use super::ast::*;

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

/// Deepest permitted call nesting; deeper recursion is a runtime error.
pub const MAX_CALL_DEPTH: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Void,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionStatus {
    Passed,
    AssertionFailed,
    RuntimeError,
    StepLimitExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecutionStatus,
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_assertion: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl std::fmt::Display for ExecutionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExecutionStatus::Passed => "passed",
            ExecutionStatus::AssertionFailed => "assertion-failed",
            ExecutionStatus::RuntimeError => "runtime-error",
            ExecutionStatus::StepLimitExceeded => "step-limit-exceeded",
        })
    }
}

impl ExecutionOutcome {
    pub fn passed(&self) -> bool {
        self.status == ExecutionStatus::Passed
    }
}

enum Halt {
    Assertion(Span),
    Runtime(String),
    StepLimit,
}

enum Flow {
    Next,
    Return(Value),
}

struct Machine<'p> {
    program: &'p SourceProgram,
    steps: u64,
    limit: u64,
    depth: u32,
}

/// Run a parameterless function (normally a test).
pub fn run_function(program: &SourceProgram, function: FnRef, step_limit: u64) -> ExecutionOutcome {
    call_function(program, function, &[], step_limit).1
}

/// Call `function` with `args`, returning its value when it completes.
pub fn call_function(
    program: &SourceProgram,
    function: FnRef,
    args: &[Value],
    step_limit: u64,
) -> (Option<Value>, ExecutionOutcome) {
    assert!(step_limit >= 1, "step limit must be at least 1");
    let mut m = Machine {
        program,
        steps: 0,
        limit: step_limit,
        depth: 0,
    };
    let def = program.function(function);
    if def.params.len() != args.len() {
        let outcome = ExecutionOutcome {
            status: ExecutionStatus::RuntimeError,
            steps: 0,
            failed_assertion: None,
            detail: Some(format!(
                "{} expects {} arguments, {} given",
                program.qualified_name(function),
                def.params.len(),
                args.len()
            )),
        };
        return (None, outcome);
    }
    let result = m.call(def, args.to_vec());
    let (value, status, failed_assertion, detail) = match result {
        Ok(v) => (Some(v), ExecutionStatus::Passed, None, None),
        Err(Halt::Assertion(span)) => (None, ExecutionStatus::AssertionFailed, Some(span), None),
        Err(Halt::Runtime(msg)) => (None, ExecutionStatus::RuntimeError, None, Some(msg)),
        Err(Halt::StepLimit) => (None, ExecutionStatus::StepLimitExceeded, None, None),
    };
    (
        value,
        ExecutionOutcome {
            status,
            steps: m.steps,
            failed_assertion,
            detail,
        },
    )
}

/// Run the given tests in ascending id order. Failures are reported, never
/// raised; callers must stop analysis if any outcome is not `Passed`.
pub fn run_all_tests(
    program: &SourceProgram,
    tests: &[TestId],
    step_limit: u64,
) -> Vec<(TestId, ExecutionOutcome)> {
    let mut ids = tests.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let f = program.tests()[id as usize];
            (id, run_function(program, f, step_limit))
        })
        .collect()
}

fn mismatch() -> Halt {
    Halt::Runtime("operand kind mismatch".into())
}

impl Machine<'_> {
    #[inline]
    fn tick(&mut self) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps >= self.limit {
            Err(Halt::StepLimit)
        } else {
            Ok(())
        }
    }

    fn call(&mut self, def: &FunctionDef, args: Vec<Value>) -> Result<Value, Halt> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Runtime(format!(
                "call depth exceeded {MAX_CALL_DEPTH} in {}",
                def.name
            )));
        }
        self.depth += 1;
        let mut frame = args;
        frame.resize(def.slot_count as usize, Value::Void);
        let flow = self.block(&def.body, &mut frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Value::Void),
        }
    }

    fn block(&mut self, body: &[Stmt], frame: &mut [Value]) -> Result<Flow, Halt> {
        for stmt in body {
            if let Flow::Return(v) = self.stmt(stmt, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, stmt: &Stmt, frame: &mut [Value]) -> Result<Flow, Halt> {
        if let StmtKind::Expr { removed: true, .. } = stmt.kind {
            return Ok(Flow::Next);
        }
        self.tick()?;
        match &stmt.kind {
            StmtKind::Let { slot, value, .. } | StmtKind::Assign { slot, value, .. } => {
                frame[*slot as usize] = self.eval(value, frame)?;
            }
            StmtKind::Compound {
                slot, op, value, ..
            } => {
                let rhs = self.int(value, frame)?;
                let Value::Int(cur) = frame[*slot as usize] else {
                    return Err(mismatch());
                };
                frame[*slot as usize] = Value::Int(match op {
                    CompoundOp::AddAssign => cur.wrapping_add(rhs),
                    CompoundOp::SubAssign => cur.wrapping_sub(rhs),
                });
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                if self.bool(cond, frame)? {
                    return self.block(then_body, frame);
                } else if let Some(body) = else_body {
                    return self.block(body, frame);
                }
            }
            StmtKind::While { cond, body } => {
                while self.bool(cond, frame)? {
                    if let Flow::Return(v) = self.block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return { value, perturbed } => {
                let v = match value {
                    None => Value::Void,
                    Some(e) => self.eval(e, frame)?,
                };
                let v = match (v, perturbed) {
                    (Value::Bool(b), true) => Value::Bool(!b),
                    (Value::Int(i), true) => Value::Int(i.wrapping_add(1)),
                    (v, _) => v,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Expr { expr, .. } => {
                self.eval(expr, frame)?;
            }
            StmtKind::Assert { cond } => {
                if !self.bool(cond, frame)? {
                    return Err(Halt::Assertion(stmt.span));
                }
            }
        }
        Ok(Flow::Next)
    }

    fn int(&mut self, e: &Expr, frame: &mut [Value]) -> Result<i64, Halt> {
        match self.eval(e, frame)? {
            Value::Int(v) => Ok(v),
            _ => Err(mismatch()),
        }
    }

    fn bool(&mut self, e: &Expr, frame: &mut [Value]) -> Result<bool, Halt> {
        match self.eval(e, frame)? {
            Value::Bool(v) => Ok(v),
            _ => Err(mismatch()),
        }
    }

    fn eval(&mut self, e: &Expr, frame: &mut [Value]) -> Result<Value, Halt> {
        self.tick()?;
        Ok(match &e.kind {
            ExprKind::Int(v) => Value::Int(*v),
            ExprKind::Bool(v) => Value::Bool(*v),
            ExprKind::Var { slot, .. } => frame[*slot as usize],
            ExprKind::Unary { op, operand } => match op {
                UnaryOp::Neg => Value::Int(self.int(operand, frame)?.wrapping_neg()),
                UnaryOp::Not => Value::Bool(!self.bool(operand, frame)?),
                UnaryOp::Identity => self.eval(operand, frame)?,
            },
            ExprKind::Binary { op, lhs, rhs } => match op {
                BinaryOp::And => Value::Bool(self.bool(lhs, frame)? && self.bool(rhs, frame)?),
                BinaryOp::Or => Value::Bool(self.bool(lhs, frame)? || self.bool(rhs, frame)?),
                BinaryOp::Eq | BinaryOp::Ne => {
                    let l = self.eval(lhs, frame)?;
                    let r = self.eval(rhs, frame)?;
                    Value::Bool((l == r) == (*op == BinaryOp::Eq))
                }
                _ => {
                    let l = self.int(lhs, frame)?;
                    let r = self.int(rhs, frame)?;
                    arith(*op, l, r)?
                }
            },
            ExprKind::Call { target, args, .. } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a, frame)?);
                }
                let program = self.program;
                self.call(program.function(*target), values)?
            }
        })
    }
}

fn arith(op: BinaryOp, l: i64, r: i64) -> Result<Value, Halt> {
    Ok(match op {
        BinaryOp::Add => Value::Int(l.wrapping_add(r)),
        BinaryOp::Sub => Value::Int(l.wrapping_sub(r)),
        BinaryOp::Mul => Value::Int(l.wrapping_mul(r)),
        BinaryOp::Div | BinaryOp::Rem if r == 0 => {
            return Err(Halt::Runtime(format!(
                "{} by zero",
                if op == BinaryOp::Div {
                    "division"
                } else {
                    "modulo"
                }
            )))
        }
        BinaryOp::Div => Value::Int(l.wrapping_div(r)),
        BinaryOp::Rem => Value::Int(l.wrapping_rem(r)),
        BinaryOp::Lt => Value::Bool(l < r),
        BinaryOp::Le => Value::Bool(l <= r),
        BinaryOp::Gt => Value::Bool(l > r),
        BinaryOp::Ge => Value::Bool(l >= r),
        _ => return Err(mismatch()),
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    fn run_body(body: &str, limit: u64) -> ExecutionOutcome {
        let p = parse_program(&format!("class A {{ test fn t() {{ {body} }} }}")).unwrap();
        run_function(&p, FnRef::default(), limit)
    }

    #[test]
    fn arithmetic_identity_passes() {
        let o = run_body("assert 1 + 1 == 2;", DEFAULT_STEP_LIMIT);
        assert_eq!(o.status, ExecutionStatus::Passed);
        // assert, ==, +, 1, 1, 2
        assert_eq!(o.steps, 6);
    }

    #[test]
    fn division_by_zero_is_runtime_error() {
        let o = run_body("assert 1 / 0 == 0;", DEFAULT_STEP_LIMIT);
        assert_eq!(o.status, ExecutionStatus::RuntimeError);
        let o = run_body("assert 1 % 0 == 0;", DEFAULT_STEP_LIMIT);
        assert_eq!(o.status, ExecutionStatus::RuntimeError);
    }

    #[test]
    fn infinite_loop_hits_limit_exactly() {
        let o = run_body("while (true) { }", 1000);
        assert_eq!(o.status, ExecutionStatus::StepLimitExceeded);
        assert_eq!(o.steps, 1000);
    }

    #[test]
    fn failing_assert_reports_span() {
        let o = run_body("assert 2 < 1;", DEFAULT_STEP_LIMIT);
        assert_eq!(o.status, ExecutionStatus::AssertionFailed);
        assert!(o.failed_assertion.is_some());
    }

    #[test]
    fn limit_of_one_stops_first_step() {
        let o = run_body("assert true;", 1);
        assert_eq!(o.status, ExecutionStatus::StepLimitExceeded);
        assert_eq!(o.steps, 1);
    }

    #[test]
    fn wrapping_semantics() {
        let o = run_body(
            "let m = 9223372036854775807; assert m + 1 == -9223372036854775807 - 1; assert (-9223372036854775807 - 1) / -1 < 0;",
            DEFAULT_STEP_LIMIT,
        );
        assert_eq!(o.status, ExecutionStatus::Passed, "{o:?}");
    }

    #[test]
    fn short_circuit_skips_division() {
        let o = run_body(
            "assert false || 1 / 1 == 1; assert !(false && 1 / 0 == 0);",
            DEFAULT_STEP_LIMIT,
        );
        assert_eq!(o.status, ExecutionStatus::Passed);
    }

    #[test]
    fn calls_and_loops() {
        let p = parse_program(
            "class M {
                fn sum(n: int) -> int { let s = 0; let i = 0; while (i < n) { i += 1; s += i; } return s; }
                fn fact(n: int) -> int { if (n <= 1) { return 1; } return n * M.fact(n - 1); }
                test fn t() { assert M.sum(4) == 10; assert M.fact(5) == 120; }
            }",
        )
        .unwrap();
        let t = p.tests()[0];
        assert!(run_function(&p, t, DEFAULT_STEP_LIMIT).passed());
        let (v, o) = call_function(
            &p,
            FnRef {
                class: 0,
                function: 0,
            },
            &[Value::Int(3)],
            1000,
        );
        assert_eq!(v, Some(Value::Int(6)));
        assert!(o.passed());
    }

    #[test]
    fn runaway_recursion_is_runtime_error() {
        let p = parse_program(
            "class R { fn f(n: int) -> int { return R.f(n + 1); } test fn t() { assert R.f(0) == 0; } }",
        )
        .unwrap();
        let o = run_function(&p, p.tests()[0], DEFAULT_STEP_LIMIT);
        assert_eq!(o.status, ExecutionStatus::RuntimeError);
        assert!(o.detail.unwrap().contains("depth"));
    }

    #[test]
    fn run_all_tests_orders_by_id() {
        let p = parse_program(
            "class A { test fn a() { assert true; } test fn b() { assert false; } test fn c() { assert 1 == 1; } }",
        )
        .unwrap();
        let out = run_all_tests(&p, &[2, 0, 1], DEFAULT_STEP_LIMIT);
        let ids: Vec<_> = out.iter().map(|(id, _)| *id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        let statuses: Vec<_> = out.iter().map(|(_, o)| o.status).collect();
        assert_eq!(
            statuses,
            vec![
                ExecutionStatus::Passed,
                ExecutionStatus::AssertionFailed,
                ExecutionStatus::Passed
            ]
        );
    }
}
