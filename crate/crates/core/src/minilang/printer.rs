//! Canonical pretty-printer: one statement per line, braces on their own
//! lines, four-space indentation, minimal parentheses.

use super::ast::*;

const UNARY_PREC: u8 = 7;

/// One line of canonical output and the nodes rendered on it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrintedLine {
    pub text: String,
    /// Index of the enclosing class, `None` for blank separator lines.
    pub class: Option<usize>,
    pub nodes: Vec<NodeId>,
}

pub fn print_program(program: &SourceProgram) -> String {
    let mut out = String::new();
    for line in print_program_lines(program) {
        out.push_str(&line.text);
        out.push('\n');
    }
    out
}

pub fn print_program_lines(program: &SourceProgram) -> Vec<PrintedLine> {
    let mut p = Printer::default();
    for (ci, class) in program.classes.iter().enumerate() {
        if ci > 0 {
            p.blank();
        }
        p.class = Some(ci);
        p.line(0, format!("class {}", class.name), Vec::new());
        p.line(0, "{".into(), Vec::new());
        for (fi, func) in class.functions.iter().enumerate() {
            if fi > 0 {
                p.blank();
            }
            p.function(func);
        }
        p.line(0, "}".into(), Vec::new());
        p.class = None;
    }
    p.lines
}

#[derive(Default)]
struct Printer {
    lines: Vec<PrintedLine>,
    class: Option<usize>,
}

impl Printer {
    fn line(&mut self, depth: usize, text: String, nodes: Vec<NodeId>) {
        self.lines.push(PrintedLine {
            text: format!("{}{}", "    ".repeat(depth), text),
            class: self.class,
            nodes,
        });
    }

    fn blank(&mut self) {
        self.lines.push(PrintedLine::default());
    }

    fn function(&mut self, f: &FunctionDef) {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ty))
            .collect();
        let mut header = format!(
            "{}fn {}({})",
            if f.is_test { "test " } else { "" },
            f.name,
            params.join(", ")
        );
        if f.return_type != Type::Void {
            header.push_str(&format!(" -> {}", f.return_type));
        }
        self.line(1, header, Vec::new());
        self.block(2, &f.body);
    }

    fn block(&mut self, depth: usize, body: &[Stmt]) {
        self.line(depth - 1, "{".into(), Vec::new());
        for stmt in body {
            self.stmt(depth, stmt);
        }
        self.line(depth - 1, "}".into(), Vec::new());
    }

    fn stmt(&mut self, depth: usize, stmt: &Stmt) {
        if let StmtKind::Expr { removed: true, .. } = stmt.kind {
            return;
        }
        let mut nodes = vec![stmt.id];
        let mut collect = |e: &Expr| walk_expr(e, &mut |n| nodes.push(n.id()));
        match &stmt.kind {
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                collect(cond);
                self.line(depth, format!("if ({})", fmt_expr(cond, 0)), nodes);
                self.block(depth + 1, then_body);
                if let Some(else_body) = else_body {
                    self.line(depth, "else".into(), Vec::new());
                    self.block(depth + 1, else_body);
                }
            }
            StmtKind::While { cond, body } => {
                collect(cond);
                self.line(depth, format!("while ({})", fmt_expr(cond, 0)), nodes);
                self.block(depth + 1, body);
            }
            StmtKind::Let { value, .. }
            | StmtKind::Assign { value, .. }
            | StmtKind::Compound { value, .. }
            | StmtKind::Expr { expr: value, .. }
            | StmtKind::Assert { cond: value }
            | StmtKind::Return {
                value: Some(value), ..
            } => {
                collect(value);
                self.line(depth, format!("{};", simple_stmt(stmt)), nodes);
            }
            StmtKind::Return { value: None, .. } => {
                self.line(depth, "return;".into(), nodes);
            }
        }
    }
}

/// Single-line rendering of a simple statement without the trailing `;`.
fn simple_stmt(stmt: &Stmt) -> String {
    match &stmt.kind {
        StmtKind::Let { name, value, .. } => format!("let {name} = {}", fmt_expr(value, 0)),
        StmtKind::Assign { name, value, .. } => format!("{name} = {}", fmt_expr(value, 0)),
        StmtKind::Compound {
            name, op, value, ..
        } => format!("{name} {} {}", op.symbol(), fmt_expr(value, 0)),
        StmtKind::Expr { expr, removed } => {
            if *removed {
                String::new()
            } else {
                fmt_expr(expr, 0)
            }
        }
        StmtKind::Assert { cond } => format!("assert {}", fmt_expr(cond, 0)),
        StmtKind::Return { value: None, .. } => "return".into(),
        StmtKind::Return {
            value: Some(value),
            perturbed,
        } => {
            if !perturbed {
                format!("return {}", fmt_expr(value, 0))
            } else {
                format!("return {}", perturbed_value(value))
            }
        }
        StmtKind::If { cond, .. } => format!("if ({})", fmt_expr(cond, 0)),
        StmtKind::While { cond, .. } => format!("while ({})", fmt_expr(cond, 0)),
    }
}

fn perturbed_value(value: &Expr) -> String {
    match (&value.kind, value.ty) {
        (ExprKind::Bool(b), _) => (!b).to_string(),
        (_, Type::Bool) => format!("!{}", fmt_expr(value, UNARY_PREC)),
        _ => format!("{} + 1", fmt_expr(value, BinaryOp::Add.precedence())),
    }
}

pub fn print_expr(expr: &Expr) -> String {
    fmt_expr(expr, 0)
}

/// Render one node the way it appears in canonical output: expressions in
/// full, simple statements without `;`, compound statements as their header.
pub fn print_node(node: NodeRef<'_>) -> String {
    match node {
        NodeRef::Expr(e) => print_expr(e),
        NodeRef::Stmt(s) => simple_stmt(s),
    }
}

fn fmt_expr(expr: &Expr, min_prec: u8) -> String {
    match &expr.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Bool(v) => v.to_string(),
        ExprKind::Var { name, .. } => name.clone(),
        ExprKind::Unary {
            op: UnaryOp::Identity,
            operand,
        } => fmt_expr(operand, min_prec),
        ExprKind::Unary { op, operand } => {
            let sym = if *op == UnaryOp::Neg { "-" } else { "!" };
            let inner = fmt_expr(operand, UNARY_PREC);
            // `- -x` would otherwise print as `--x`, which reads oddly.
            if inner.starts_with('-') && *op == UnaryOp::Neg {
                format!("-({inner})")
            } else {
                format!("{sym}{inner}")
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let text = format!(
                "{} {} {}",
                fmt_expr(lhs, prec),
                op.symbol(),
                fmt_expr(rhs, prec + 1)
            );
            if prec < min_prec {
                format!("({text})")
            } else {
                text
            }
        }
        ExprKind::Call {
            class,
            function,
            args,
            ..
        } => {
            let args: Vec<String> = args.iter().map(|a| fmt_expr(a, 0)).collect();
            format!("{class}.{function}({})", args.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    #[test]
    fn canonical_layout() {
        let p = parse_program(
            "class A { fn f(a: int) -> int { if (a < 0) { a = -a; } return a; } test fn t() { assert A.f(-2) == 2; } }",
        )
        .unwrap();
        let expected = "\
class A
{
    fn f(a: int) -> int
    {
        if (a < 0)
        {
            a = -a;
        }
        return a;
    }

    test fn t()
    {
        assert A.f(-2) == 2;
    }
}
";
        assert_eq!(print_program(&p), expected);
    }

    #[test]
    fn parentheses_are_minimal_but_sufficient() {
        let cases = [
            ("(a + b) * c", "(a + b) * c"),
            ("a + (b * c)", "a + b * c"),
            ("a - (b - c)", "a - (b - c)"),
            ("(a - b) - c", "a - b - c"),
            ("-(a + b)", "-(a + b)"),
            ("- -a", "-(-a)"),
            ("!(a < b) || a == b && true", "!(a < b) || a == b && true"),
        ];
        for (src, want) in cases {
            let text = format!(
                "class A {{ fn f(a: int, b: int, c: int) -> bool {{ let x = {src}; return true; }} }}"
            );
            let p = parse_program(&text).unwrap();
            let f = &p.classes[0].functions[0];
            let StmtKind::Let { value, .. } = &f.body[0].kind else {
                panic!()
            };
            assert_eq!(print_expr(value), want, "{src}");
        }
    }

    #[test]
    fn lines_carry_node_ids() {
        let p =
            parse_program("class A { fn f(a: int) -> int { let b = a + 1; return b; } }").unwrap();
        let lines = print_program_lines(&p);
        let with_nodes: Vec<_> = lines.iter().filter(|l| !l.nodes.is_empty()).collect();
        assert_eq!(with_nodes.len(), 2);
        assert_eq!(with_nodes[0].nodes, vec![0, 1, 2, 3]);
        assert_eq!(with_nodes[1].nodes, vec![4, 5]);
        assert!(lines
            .iter()
            .all(|l| l.text.is_empty() || l.class == Some(0)));
    }
}
