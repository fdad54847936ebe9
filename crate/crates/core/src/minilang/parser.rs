//! Recursive-descent parser followed by a resolution pass that assigns node
//! ids, local slots, call targets and types.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind};

pub fn parse_program(text: &str) -> Result<SourceProgram, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut classes = Vec::new();
    while parser.peek() != &Tok::Eof {
        classes.push(parser.class()?);
    }
    resolve(text, classes).map_err(|e| e.locate(text))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn placeholder_expr(span: Span, kind: ExprKind) -> Expr {
    Expr {
        id: 0,
        span,
        ty: Type::Void,
        kind,
    }
}

fn stmt(span: Span, kind: StmtKind) -> Stmt {
    Stmt { id: 0, span, kind }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Token, ParseError> {
        if *self.peek() == want {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&format!("expected {}", want.describe())))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let t = self.current();
        ParseError::syntax(t.offset, format!("{what}, found {}", t.tok.describe()))
    }

    fn ident(&mut self) -> Result<(String, Token), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => Ok((name, self.advance())),
            _ => Err(self.unexpected("expected identifier")),
        }
    }

    fn class(&mut self) -> Result<RawClass, ParseError> {
        let start = self.expect(Tok::Class)?;
        let (name, name_tok) = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut functions = Vec::new();
        while !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            functions.push(self.function()?);
        }
        let end = self.expect(Tok::RBrace)?;
        Ok(RawClass {
            name,
            name_offset: name_tok.offset,
            functions,
            line_span: (start.line, end.line),
        })
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let t = match self.peek() {
            Tok::IntTy => Type::Int,
            Tok::BoolTy => Type::Bool,
            Tok::VoidTy => Type::Void,
            _ => return Err(self.unexpected("expected a type")),
        };
        self.advance();
        Ok(t)
    }

    fn function(&mut self) -> Result<RawFunction, ParseError> {
        let first = self.current().clone();
        let is_test = if *self.peek() == Tok::Test {
            self.advance();
            true
        } else {
            false
        };
        self.expect(Tok::Fn)?;
        let (name, name_tok) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        while *self.peek() != Tok::RParen {
            if !params.is_empty() {
                self.expect(Tok::Comma)?;
            }
            let (pname, ptok) = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.ty()?;
            params.push((Param { name: pname, ty }, ptok.offset));
        }
        self.expect(Tok::RParen)?;
        let return_type = if *self.peek() == Tok::Arrow {
            self.advance();
            self.ty()?
        } else {
            Type::Void
        };
        let (body, end_line) = self.block()?;
        Ok(RawFunction {
            name,
            name_offset: name_tok.offset,
            is_test,
            params,
            return_type,
            body,
            line_span: (first.line, end_line),
        })
    }

    fn block(&mut self) -> Result<(Vec<Stmt>, u32), ParseError> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            body.push(self.statement()?);
        }
        let end = self.expect(Tok::RBrace)?;
        Ok((body, end.line))
    }

    fn span_from(&self, start: usize) -> Span {
        let prev = &self.tokens[self.pos.saturating_sub(1)];
        Span::new(start, prev.offset + prev.len - start)
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let start = self.current().offset;
        match self.peek().clone() {
            Tok::Let => {
                self.advance();
                let (name, _) = self.ident()?;
                self.expect(Tok::Assign)?;
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(stmt(
                    self.span_from(start),
                    StmtKind::Let {
                        name,
                        slot: 0,
                        value,
                    },
                ))
            }
            Tok::If => self.if_statement(),
            Tok::While => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let (body, _) = self.block()?;
                Ok(stmt(self.span_from(start), StmtKind::While { cond, body }))
            }
            Tok::Return => {
                self.advance();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi)?;
                Ok(stmt(
                    self.span_from(start),
                    StmtKind::Return {
                        value,
                        perturbed: false,
                    },
                ))
            }
            Tok::Assert => {
                self.advance();
                let cond = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(stmt(self.span_from(start), StmtKind::Assert { cond }))
            }
            Tok::Ident(name)
                if matches!(
                    self.peek_at(1),
                    Tok::Assign | Tok::PlusAssign | Tok::MinusAssign
                ) =>
            {
                self.advance();
                let op = self.advance().tok;
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                let kind = match op {
                    Tok::Assign => StmtKind::Assign {
                        name,
                        slot: 0,
                        value,
                    },
                    Tok::PlusAssign => StmtKind::Compound {
                        name,
                        slot: 0,
                        op: CompoundOp::AddAssign,
                        value,
                    },
                    _ => StmtKind::Compound {
                        name,
                        slot: 0,
                        op: CompoundOp::SubAssign,
                        value,
                    },
                };
                Ok(stmt(self.span_from(start), kind))
            }
            _ => {
                let expr = self.expr()?;
                if !matches!(expr.kind, ExprKind::Call { .. }) {
                    return Err(ParseError::syntax(
                        start,
                        "only calls may be used as statements".to_string(),
                    ));
                }
                self.expect(Tok::Semi)?;
                Ok(stmt(
                    self.span_from(start),
                    StmtKind::Expr {
                        expr,
                        removed: false,
                    },
                ))
            }
        }
    }

    fn if_statement(&mut self) -> Result<Stmt, ParseError> {
        let start = self.current().offset;
        self.expect(Tok::If)?;
        self.expect(Tok::LParen)?;
        let cond = self.expr()?;
        self.expect(Tok::RParen)?;
        let (then_body, _) = self.block()?;
        let else_body = if *self.peek() == Tok::Else {
            self.advance();
            if *self.peek() == Tok::If {
                Some(vec![self.if_statement()?])
            } else {
                Some(self.block()?.0)
            }
        } else {
            None
        };
        Ok(stmt(
            self.span_from(start),
            StmtKind::If {
                cond,
                then_body,
                else_body,
            },
        ))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.join(rhs.span);
            lhs = placeholder_expr(
                span,
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.current().offset;
        let op = match self.peek() {
            Tok::Minus => UnaryOp::Neg,
            Tok::Bang => UnaryOp::Not,
            _ => return self.primary(),
        };
        self.advance();
        let operand = self.unary()?;
        let span = Span::new(start, operand.span.end() - start);
        Ok(placeholder_expr(
            span,
            ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
        ))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.current().clone();
        let single = Span::new(t.offset, t.len);
        match t.tok {
            Tok::Int(v) => {
                self.advance();
                Ok(placeholder_expr(single, ExprKind::Int(v)))
            }
            Tok::True | Tok::False => {
                self.advance();
                Ok(placeholder_expr(single, ExprKind::Bool(t.tok == Tok::True)))
            }
            Tok::LParen => {
                self.advance();
                let mut inner = self.expr()?;
                self.expect(Tok::RParen)?;
                inner.span = self.span_from(t.offset);
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() != Tok::Dot {
                    return Ok(placeholder_expr(single, ExprKind::Var { name, slot: 0 }));
                }
                self.advance();
                let (function, _) = self.ident()?;
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                while *self.peek() != Tok::RParen {
                    if !args.is_empty() {
                        self.expect(Tok::Comma)?;
                    }
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                Ok(placeholder_expr(
                    self.span_from(t.offset),
                    ExprKind::Call {
                        class: name,
                        function,
                        target: FnRef::default(),
                        args,
                    },
                ))
            }
            _ => Err(self.unexpected("expected an expression")),
        }
    }
}

struct RawClass {
    name: String,
    name_offset: usize,
    functions: Vec<RawFunction>,
    line_span: (u32, u32),
}

struct RawFunction {
    name: String,
    name_offset: usize,
    is_test: bool,
    params: Vec<(Param, usize)>,
    return_type: Type,
    body: Vec<Stmt>,
    line_span: (u32, u32),
}

struct Signature {
    params: Vec<Type>,
    ret: Type,
    is_test: bool,
}

struct Resolver<'a> {
    class_ids: HashMap<&'a str, u32>,
    /// Per class: function name -> (index, signature).
    functions: Vec<HashMap<&'a str, (u32, Signature)>>,
    next_id: NodeId,
}

struct FnScope {
    scopes: Vec<Vec<(String, u32, Type)>>,
    next_slot: u32,
    is_test: bool,
    return_type: Type,
}

impl FnScope {
    fn lookup(&self, name: &str) -> Option<(u32, Type)> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _, _)| n == name)
            .map(|(_, slot, ty)| (*slot, *ty))
    }

    fn declare(&mut self, name: &str, ty: Type) -> u32 {
        let slot = self.next_slot;
        self.next_slot += 1;
        self.scopes
            .last_mut()
            .expect("scope stack never empty")
            .push((name.to_string(), slot, ty));
        slot
    }
}

fn resolve(text: &str, raw: Vec<RawClass>) -> Result<SourceProgram, ParseError> {
    let mut class_ids = HashMap::new();
    for (i, class) in raw.iter().enumerate() {
        if class_ids.insert(class.name.as_str(), i as u32).is_some() {
            return Err(ParseError::new(
                ParseErrorKind::Duplicate,
                class.name_offset,
                format!("duplicate class `{}`", class.name),
            ));
        }
    }
    let mut functions = Vec::new();
    for class in &raw {
        let mut table = HashMap::new();
        for (i, f) in class.functions.iter().enumerate() {
            if f.is_test && (!f.params.is_empty() || f.return_type != Type::Void) {
                return Err(ParseError::new(
                    ParseErrorKind::Type,
                    f.name_offset,
                    format!(
                        "test function `{}` must take no parameters and return void",
                        f.name
                    ),
                ));
            }
            let sig = Signature {
                params: f.params.iter().map(|(p, _)| p.ty).collect(),
                ret: f.return_type,
                is_test: f.is_test,
            };
            if table.insert(f.name.as_str(), (i as u32, sig)).is_some() {
                return Err(ParseError::new(
                    ParseErrorKind::Duplicate,
                    f.name_offset,
                    format!("duplicate function `{}.{}`", class.name, f.name),
                ));
            }
        }
        functions.push(table);
    }
    let mut resolver = Resolver {
        class_ids,
        functions,
        next_id: 0,
    };

    let mut classes = Vec::with_capacity(raw.len());
    let mut tests = Vec::new();
    let mut node_index = Vec::new();
    for (ci, class) in raw.iter().enumerate() {
        let mut defs = Vec::with_capacity(class.functions.len());
        for (fi, f) in class.functions.iter().enumerate() {
            let def = resolver.function(f)?;
            let r = FnRef {
                class: ci as u32,
                function: fi as u32,
            };
            if def.is_test {
                tests.push(r);
            }
            if def.node_range.0 < def.node_range.1 {
                node_index.push((def.node_range.0, def.node_range.1, r));
            }
            defs.push(Arc::new(def));
        }
        classes.push(Arc::new(ClassDef {
            name: class.name.clone(),
            functions: defs,
            line_span: class.line_span,
        }));
    }
    Ok(SourceProgram {
        classes,
        source_text: Arc::from(text),
        node_count: resolver.next_id,
        tests: Arc::new(tests),
        node_index: Arc::new(node_index),
        artifact: Arc::new(OnceLock::new()),
    })
}

fn type_error(span: Span, message: String) -> ParseError {
    ParseError::new(ParseErrorKind::Type, span.offset as usize, message)
}

impl Resolver<'_> {
    fn function(&mut self, f: &RawFunction) -> Result<FunctionDef, ParseError> {
        let first = self.next_id;
        let mut scope = FnScope {
            scopes: vec![Vec::new()],
            next_slot: 0,
            is_test: f.is_test,
            return_type: f.return_type,
        };
        for (i, (p, offset)) in f.params.iter().enumerate() {
            if f.params[..i].iter().any(|(q, _)| q.name == p.name) {
                return Err(ParseError::new(
                    ParseErrorKind::Duplicate,
                    *offset,
                    format!("duplicate parameter `{}`", p.name),
                ));
            }
            if p.ty == Type::Void {
                return Err(ParseError::new(
                    ParseErrorKind::Type,
                    *offset,
                    format!("parameter `{}` cannot be void", p.name),
                ));
            }
            scope.declare(&p.name, p.ty);
        }
        let mut body = f.body.clone();
        self.block(&mut body, &mut scope, false)?;
        if f.return_type != Type::Void && !block_returns(&body) {
            return Err(ParseError::new(
                ParseErrorKind::Type,
                f.name_offset,
                format!("function `{}` may finish without returning a value", f.name),
            ));
        }
        Ok(FunctionDef {
            name: f.name.clone(),
            is_test: f.is_test,
            params: f.params.iter().map(|(p, _)| p.clone()).collect(),
            return_type: f.return_type,
            body,
            line_span: f.line_span,
            slot_count: scope.next_slot,
            node_range: (first, self.next_id),
        })
    }

    fn block(
        &mut self,
        body: &mut [Stmt],
        scope: &mut FnScope,
        push: bool,
    ) -> Result<(), ParseError> {
        if push {
            scope.scopes.push(Vec::new());
        }
        for stmt in body.iter_mut() {
            self.stmt(stmt, scope)?;
        }
        if push {
            scope.scopes.pop();
        }
        Ok(())
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn variable(scope: &FnScope, name: &str, span: Span) -> Result<(u32, Type), ParseError> {
        scope.lookup(name).ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::Unresolved,
                span.offset as usize,
                format!("unresolved variable `{name}`"),
            )
        })
    }

    fn stmt(&mut self, stmt: &mut Stmt, scope: &mut FnScope) -> Result<(), ParseError> {
        stmt.id = self.fresh_id();
        let span = stmt.span;
        match &mut stmt.kind {
            StmtKind::Let { name, slot, value } => {
                let ty = self.value_expr(value, scope)?;
                *slot = scope.declare(name, ty);
            }
            StmtKind::Assign { name, slot, value } => {
                let (s, ty) = Self::variable(scope, name, span)?;
                let vty = self.value_expr(value, scope)?;
                if vty != ty {
                    return Err(type_error(
                        value.span,
                        format!("cannot assign {vty} to `{name}` of type {ty}"),
                    ));
                }
                *slot = s;
            }
            StmtKind::Compound {
                name,
                slot,
                value,
                op,
            } => {
                let (s, ty) = Self::variable(scope, name, span)?;
                if ty != Type::Int {
                    return Err(type_error(
                        span,
                        format!(
                            "`{}` requires an int variable, `{name}` is {ty}",
                            op.symbol()
                        ),
                    ));
                }
                self.expect_type(value, scope, Type::Int)?;
                *slot = s;
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.expect_type(cond, scope, Type::Bool)?;
                self.block(then_body, scope, true)?;
                if let Some(body) = else_body {
                    self.block(body, scope, true)?;
                }
            }
            StmtKind::While { cond, body } => {
                self.expect_type(cond, scope, Type::Bool)?;
                self.block(body, scope, true)?;
            }
            StmtKind::Return { value, .. } => match value {
                Some(v) => {
                    if scope.return_type == Type::Void {
                        return Err(type_error(
                            span,
                            "void function cannot return a value".into(),
                        ));
                    }
                    let want = scope.return_type;
                    self.expect_type(v, scope, want)?;
                }
                None => {
                    if scope.return_type != Type::Void {
                        return Err(type_error(
                            span,
                            format!("missing return value of type {}", scope.return_type),
                        ));
                    }
                }
            },
            StmtKind::Expr { expr, .. } => {
                self.expr(expr, scope)?;
            }
            StmtKind::Assert { cond } => {
                if !scope.is_test {
                    return Err(ParseError::syntax(
                        span.offset as usize,
                        "assert is only allowed in test functions".into(),
                    ));
                }
                self.expect_type(cond, scope, Type::Bool)?;
            }
        }
        Ok(())
    }

    fn expect_type(
        &mut self,
        expr: &mut Expr,
        scope: &FnScope,
        want: Type,
    ) -> Result<(), ParseError> {
        let got = self.expr(expr, scope)?;
        if got != want {
            return Err(type_error(
                expr.span,
                format!("expected {want}, found {got}"),
            ));
        }
        Ok(())
    }

    /// An expression whose value is used; void is rejected.
    fn value_expr(&mut self, expr: &mut Expr, scope: &FnScope) -> Result<Type, ParseError> {
        let ty = self.expr(expr, scope)?;
        if ty == Type::Void {
            return Err(type_error(
                expr.span,
                "void value used as an operand".into(),
            ));
        }
        Ok(ty)
    }

    fn expr(&mut self, expr: &mut Expr, scope: &FnScope) -> Result<Type, ParseError> {
        expr.id = self.fresh_id();
        let span = expr.span;
        let ty = match &mut expr.kind {
            ExprKind::Int(_) => Type::Int,
            ExprKind::Bool(_) => Type::Bool,
            ExprKind::Var { name, slot } => {
                let (s, ty) = Self::variable(scope, name, span)?;
                *slot = s;
                ty
            }
            ExprKind::Unary { op, operand } => {
                let want = match op {
                    UnaryOp::Not => Type::Bool,
                    UnaryOp::Neg | UnaryOp::Identity => Type::Int,
                };
                self.expect_type(operand, scope, want)?;
                want
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let lt = self.value_expr(lhs, scope)?;
                let rt = self.value_expr(rhs, scope)?;
                let op = *op;
                let (operand, result) = match op {
                    op if op.is_arithmetic() => (Some(Type::Int), Type::Int),
                    op if op.is_ordering() => (Some(Type::Int), Type::Bool),
                    BinaryOp::And | BinaryOp::Or => (Some(Type::Bool), Type::Bool),
                    _ => (None, Type::Bool),
                };
                let ok = match operand {
                    Some(t) => lt == t && rt == t,
                    None => lt == rt,
                };
                if !ok {
                    return Err(type_error(
                        span,
                        format!("operator `{}` cannot combine {lt} and {rt}", op.symbol()),
                    ));
                }
                result
            }
            ExprKind::Call {
                class,
                function,
                target,
                args,
            } => {
                let ci = *self.class_ids.get(class.as_str()).ok_or_else(|| {
                    ParseError::new(
                        ParseErrorKind::Unresolved,
                        span.offset as usize,
                        format!("unresolved class `{class}`"),
                    )
                })?;
                let (fi, sig) = self.functions[ci as usize]
                    .get(function.as_str())
                    .ok_or_else(|| {
                        ParseError::new(
                            ParseErrorKind::Unresolved,
                            span.offset as usize,
                            format!("unresolved function `{class}.{function}`"),
                        )
                    })?;
                if sig.is_test {
                    return Err(type_error(
                        span,
                        format!("test function `{class}.{function}` cannot be called"),
                    ));
                }
                if sig.params.len() != args.len() {
                    return Err(type_error(
                        span,
                        format!(
                            "`{class}.{function}` takes {} arguments, {} given",
                            sig.params.len(),
                            args.len()
                        ),
                    ));
                }
                let params = sig.params.clone();
                let ret = sig.ret;
                *target = FnRef {
                    class: ci,
                    function: *fi,
                };
                for (arg, want) in args.iter_mut().zip(params) {
                    self.expect_type(arg, scope, want)?;
                }
                ret
            }
        };
        expr.ty = ty;
        Ok(ty)
    }
}

fn block_returns(body: &[Stmt]) -> bool {
    body.iter().any(|s| match &s.kind {
        StmtKind::Return { .. } => true,
        StmtKind::If {
            then_body,
            else_body: Some(else_body),
            ..
        } => block_returns(then_body) && block_returns(else_body),
        _ => false,
    })
}
