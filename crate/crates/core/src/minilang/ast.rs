//! Syntax tree for MiniLang programs.
//!
//! Every statement and expression carries a [`NodeId`] assigned in pre-order
//! across the whole program, so ids are dense (`0..node_count`) and stable
//! across re-parses of the same text.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type NodeId = u32;

/// Byte range in the text a program was parsed from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub offset: u32,
    pub len: u32,
}

impl Span {
    pub fn new(offset: usize, len: usize) -> Self {
        Span {
            offset: offset as u32,
            len: len as u32,
        }
    }

    pub fn end(&self) -> usize {
        (self.offset + self.len) as usize
    }

    /// Smallest span covering both.
    pub fn join(self, other: Span) -> Span {
        let start = self.offset.min(other.offset);
        let end = (self.offset + self.len).max(other.offset + other.len);
        Span {
            offset: start,
            len: end - start,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Bool,
    Void,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Bool => "bool",
            Type::Void => "void",
        })
    }
}

/// Resolved call target: indices into `SourceProgram::classes` and the
/// class's `functions`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct FnRef {
    pub class: u32,
    pub function: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem
        )
    }

    pub fn is_ordering(self) -> bool {
        matches!(
            self,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
    /// Evaluates to its operand. Only produced by deleting a negation from a
    /// mutated copy; the parser never creates it.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompoundOp {
    AddAssign,
    SubAssign,
}

impl CompoundOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompoundOp::AddAssign => "+=",
            CompoundOp::SubAssign => "-=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub ty: Type,
    pub kind: ExprKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var {
        name: String,
        slot: u32,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        class: String,
        function: String,
        target: FnRef,
        args: Vec<Expr>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub id: NodeId,
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Let {
        name: String,
        slot: u32,
        value: Expr,
    },
    Assign {
        name: String,
        slot: u32,
        value: Expr,
    },
    Compound {
        name: String,
        slot: u32,
        op: CompoundOp,
        value: Expr,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return {
        value: Option<Expr>,
        /// Set on mutated copies: the returned value is negated (bool) or
        /// incremented (int).
        perturbed: bool,
    },
    Expr {
        expr: Expr,
        /// Set on mutated copies: the call is not executed.
        removed: bool,
    },
    Assert {
        cond: Expr,
    },
}

/// The closed set of node kinds, mirroring the variants above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    BinaryOp,
    UnaryNeg,
    LogicalNot,
    Literal,
    Variable,
    Assignment,
    CompoundAssignment,
    If,
    While,
    Return,
    Call,
    ExpressionStatement,
    Assert,
    Let,
}

impl Expr {
    pub fn node_kind(&self) -> NodeKind {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) => NodeKind::Literal,
            ExprKind::Var { .. } => NodeKind::Variable,
            ExprKind::Unary {
                op: UnaryOp::Not, ..
            } => NodeKind::LogicalNot,
            ExprKind::Unary { .. } => NodeKind::UnaryNeg,
            ExprKind::Binary { .. } => NodeKind::BinaryOp,
            ExprKind::Call { .. } => NodeKind::Call,
        }
    }
}

impl Stmt {
    pub fn node_kind(&self) -> NodeKind {
        match &self.kind {
            StmtKind::Let { .. } => NodeKind::Let,
            StmtKind::Assign { .. } => NodeKind::Assignment,
            StmtKind::Compound { .. } => NodeKind::CompoundAssignment,
            StmtKind::If { .. } => NodeKind::If,
            StmtKind::While { .. } => NodeKind::While,
            StmtKind::Return { .. } => NodeKind::Return,
            StmtKind::Expr { .. } => NodeKind::ExpressionStatement,
            StmtKind::Assert { .. } => NodeKind::Assert,
        }
    }
}

/// Borrowed view of either node family, for pre-order walks.
#[derive(Clone, Copy, Debug)]
pub enum NodeRef<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

impl NodeRef<'_> {
    pub fn id(&self) -> NodeId {
        match self {
            NodeRef::Stmt(s) => s.id,
            NodeRef::Expr(e) => e.id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            NodeRef::Stmt(s) => s.span,
            NodeRef::Expr(e) => e.span,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            NodeRef::Stmt(s) => s.node_kind(),
            NodeRef::Expr(e) => e.node_kind(),
        }
    }
}

/// Visit `body` in pre-order.
pub fn walk_block<'a>(body: &'a [Stmt], f: &mut impl FnMut(NodeRef<'a>)) {
    for stmt in body {
        walk_stmt(stmt, f);
    }
}

pub fn walk_stmt<'a>(stmt: &'a Stmt, f: &mut impl FnMut(NodeRef<'a>)) {
    f(NodeRef::Stmt(stmt));
    match &stmt.kind {
        StmtKind::Let { value, .. }
        | StmtKind::Assign { value, .. }
        | StmtKind::Compound { value, .. } => walk_expr(value, f),
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            walk_expr(cond, f);
            walk_block(then_body, f);
            if let Some(body) = else_body {
                walk_block(body, f);
            }
        }
        StmtKind::While { cond, body } => {
            walk_expr(cond, f);
            walk_block(body, f);
        }
        StmtKind::Return { value, .. } => {
            if let Some(value) = value {
                walk_expr(value, f);
            }
        }
        StmtKind::Expr { expr, .. } => walk_expr(expr, f),
        StmtKind::Assert { cond } => walk_expr(cond, f),
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, f: &mut impl FnMut(NodeRef<'a>)) {
    f(NodeRef::Expr(expr));
    match &expr.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var { .. } => {}
        ExprKind::Unary { operand, .. } => walk_expr(operand, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Call { args, .. } => {
            for arg in args {
                walk_expr(arg, f);
            }
        }
    }
}

/// Mutable handle to the node with a given id.
pub enum NodeMut<'a> {
    Stmt(&'a mut Stmt),
    Expr(&'a mut Expr),
}

pub fn find_in_block_mut(body: &mut [Stmt], id: NodeId) -> Option<NodeMut<'_>> {
    body.iter_mut().find_map(|stmt| find_in_stmt_mut(stmt, id))
}

fn find_in_stmt_mut(stmt: &mut Stmt, id: NodeId) -> Option<NodeMut<'_>> {
    if stmt.id == id {
        return Some(NodeMut::Stmt(stmt));
    }
    if stmt.id > id {
        return None;
    }
    match &mut stmt.kind {
        StmtKind::Let { value, .. }
        | StmtKind::Assign { value, .. }
        | StmtKind::Compound { value, .. } => find_in_expr_mut(value, id),
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => find_in_expr_mut(cond, id)
            .or_else(|| find_in_block_mut(then_body, id))
            .or_else(|| else_body.as_mut().and_then(|b| find_in_block_mut(b, id))),
        StmtKind::While { cond, body } => {
            find_in_expr_mut(cond, id).or_else(|| find_in_block_mut(body, id))
        }
        StmtKind::Return { value, .. } => value.as_mut().and_then(|v| find_in_expr_mut(v, id)),
        StmtKind::Expr { expr, .. } => find_in_expr_mut(expr, id),
        StmtKind::Assert { cond } => find_in_expr_mut(cond, id),
    }
}

fn find_in_expr_mut(expr: &mut Expr, id: NodeId) -> Option<NodeMut<'_>> {
    if expr.id == id {
        return Some(NodeMut::Expr(expr));
    }
    if expr.id > id {
        return None;
    }
    match &mut expr.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var { .. } => None,
        ExprKind::Unary { operand, .. } => find_in_expr_mut(operand, id),
        ExprKind::Binary { lhs, rhs, .. } => {
            find_in_expr_mut(lhs, id).or_else(|| find_in_expr_mut(rhs, id))
        }
        ExprKind::Call { args, .. } => args.iter_mut().find_map(|a| find_in_expr_mut(a, id)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub is_test: bool,
    pub params: Vec<Param>,
    pub return_type: Type,
    pub body: Vec<Stmt>,
    /// First and last source line (1-based) of the definition.
    pub line_span: (u32, u32),
    /// Local variable slots needed by a frame, parameters included.
    pub slot_count: u32,
    /// Half-open range of node ids owned by this function.
    pub node_range: (NodeId, NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub functions: Vec<Arc<FunctionDef>>,
    pub line_span: (u32, u32),
}

impl ClassDef {
    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }
}

/// Dense index of a test function in declaration order.
pub type TestId = u32;

/// A parsed, resolved and type-checked program.
///
/// Cloning is cheap: classes and functions are reference counted, so a
/// mutated copy shares every function except the one it rewrites.
#[derive(Clone, Debug)]
pub struct SourceProgram {
    pub classes: Vec<Arc<ClassDef>>,
    pub source_text: Arc<str>,
    pub(crate) node_count: u32,
    pub(crate) tests: Arc<Vec<FnRef>>,
    /// (first node, end node, function) sorted by first node.
    pub(crate) node_index: Arc<Vec<(NodeId, NodeId, FnRef)>>,
    pub(crate) artifact: Arc<OnceLock<(Vec<u8>, String)>>,
}

impl SourceProgram {
    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn function(&self, r: FnRef) -> &FunctionDef {
        &self.classes[r.class as usize].functions[r.function as usize]
    }

    pub fn qualified_name(&self, r: FnRef) -> String {
        format!(
            "{}.{}",
            self.classes[r.class as usize].name,
            self.function(r).name
        )
    }

    /// Look up `Class.function`.
    pub fn resolve_function(&self, qualified: &str) -> Option<FnRef> {
        let (class, func) = qualified.split_once('.')?;
        let ci = self.class_index(class)?;
        let fi = self.classes[ci].function_index(func)?;
        Some(FnRef {
            class: ci as u32,
            function: fi as u32,
        })
    }

    /// Test functions in declaration order; position is the [`TestId`].
    pub fn tests(&self) -> &[FnRef] {
        &self.tests
    }

    pub fn test_id(&self, r: FnRef) -> Option<TestId> {
        self.tests.iter().position(|t| *t == r).map(|i| i as TestId)
    }

    pub fn test_name(&self, id: TestId) -> String {
        self.qualified_name(self.tests[id as usize])
    }

    /// Function owning `node`.
    pub fn locate(&self, node: NodeId) -> Option<FnRef> {
        let idx = self
            .node_index
            .partition_point(|(start, _, _)| *start <= node);
        let (start, end, r) = *self.node_index.get(idx.checked_sub(1)?)?;
        (start <= node && node < end).then_some(r)
    }

    /// Canonical serialized form shipped to workers: the pretty-printed text.
    pub fn artifact_bytes(&self) -> &[u8] {
        &self.artifact_parts().0
    }

    /// Hex SHA-256 of [`Self::artifact_bytes`].
    pub fn content_hash(&self) -> &str {
        &self.artifact_parts().1
    }

    fn artifact_parts(&self) -> &(Vec<u8>, String) {
        self.artifact.get_or_init(|| {
            let bytes = super::printer::print_program(self).into_bytes();
            let hash = hex::encode(Sha256::digest(&bytes));
            (bytes, hash)
        })
    }

    /// Copy with one function replaced; artifact caches are reset.
    pub(crate) fn with_function(&self, r: FnRef, function: FunctionDef) -> SourceProgram {
        let mut classes = self.classes.clone();
        let mut class = (*classes[r.class as usize]).clone();
        class.functions[r.function as usize] = Arc::new(function);
        classes[r.class as usize] = Arc::new(class);
        SourceProgram {
            classes,
            source_text: self.source_text.clone(),
            node_count: self.node_count,
            tests: self.tests.clone(),
            node_index: self.node_index.clone(),
            artifact: Arc::new(OnceLock::new()),
        }
    }

    /// Visit every node of the program in pre-order (node id order).
    pub fn walk(&self, mut f: impl FnMut(FnRef, NodeRef<'_>)) {
        for (ci, class) in self.classes.iter().enumerate() {
            for (fi, func) in class.functions.iter().enumerate() {
                let r = FnRef {
                    class: ci as u32,
                    function: fi as u32,
                };
                walk_block(&func.body, &mut |n| f(r, n));
            }
        }
    }
}

/// Structural equality ignoring spans (which depend on formatting).
pub fn same_structure(a: &SourceProgram, b: &SourceProgram) -> bool {
    if a.classes.len() != b.classes.len() || a.node_count != b.node_count {
        return false;
    }
    a.classes.iter().zip(&b.classes).all(|(ca, cb)| {
        ca.name == cb.name
            && ca.functions.len() == cb.functions.len()
            && ca.functions.iter().zip(&cb.functions).all(|(fa, fb)| {
                fa.name == fb.name
                    && fa.is_test == fb.is_test
                    && fa.params == fb.params
                    && fa.return_type == fb.return_type
                    && fa.node_range == fb.node_range
                    && blocks_match(&fa.body, &fb.body)
            })
    })
}

fn blocks_match(a: &[Stmt], b: &[Stmt]) -> bool {
    let mut na = Vec::new();
    let mut nb = Vec::new();
    walk_block(a, &mut |n| na.push(shape(n)));
    walk_block(b, &mut |n| nb.push(shape(n)));
    na == nb
}

fn shape(n: NodeRef<'_>) -> (NodeId, String) {
    let detail = match n {
        NodeRef::Stmt(s) => match &s.kind {
            StmtKind::Let { name, slot, .. } => format!("let {name}#{slot}"),
            StmtKind::Assign { name, slot, .. } => format!("set {name}#{slot}"),
            StmtKind::Compound { name, slot, op, .. } => format!("{}{name}#{slot}", op.symbol()),
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => format!(
                "if {} {:?}",
                then_body.len(),
                else_body.as_ref().map(Vec::len)
            ),
            StmtKind::While { body, .. } => format!("while {}", body.len()),
            StmtKind::Return { value, perturbed } => {
                format!("return {} {perturbed}", value.is_some())
            }
            StmtKind::Expr { removed, .. } => format!("expr {removed}"),
            StmtKind::Assert { .. } => "assert".to_string(),
        },
        NodeRef::Expr(e) => match &e.kind {
            ExprKind::Int(v) => format!("int {v}"),
            ExprKind::Bool(v) => format!("bool {v}"),
            ExprKind::Var { name, slot } => format!("var {name}#{slot}"),
            ExprKind::Unary { op, .. } => format!("{op:?}"),
            ExprKind::Binary { op, .. } => format!("{op:?}"),
            ExprKind::Call { target, args, .. } => format!("call {target:?}/{}", args.len()),
        },
    };
    (n.id(), detail)
}
