use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::minilang::{BinaryOp, CompoundOp, ExprKind, NodeMut, NodeRef, StmtKind, Type, UnaryOp};

/// The seven default mutation operators, in id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MutationOperator {
    Math,
    InvertNegs,
    ReturnVals,
    ConditionalsBoundary,
    NegateConditionals,
    Increments,
    VoidMethodCalls,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 7] = [
        MutationOperator::Math,
        MutationOperator::InvertNegs,
        MutationOperator::ReturnVals,
        MutationOperator::ConditionalsBoundary,
        MutationOperator::NegateConditionals,
        MutationOperator::Increments,
        MutationOperator::VoidMethodCalls,
    ];

    /// Stable numeric id, also the byte used by the compact encoding.
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MutationOperator::Math => "MATH",
            MutationOperator::InvertNegs => "INVERT_NEGS",
            MutationOperator::ReturnVals => "RETURN_VALS",
            MutationOperator::ConditionalsBoundary => "CONDITIONALS_BOUNDARY",
            MutationOperator::NegateConditionals => "NEGATE_CONDITIONALS",
            MutationOperator::Increments => "INCREMENTS",
            MutationOperator::VoidMethodCalls => "VOID_METHOD_CALLS",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            MutationOperator::Math => "swap + with -, * with /, and replace % with *",
            MutationOperator::InvertNegs => "remove a unary minus",
            MutationOperator::ReturnVals => "negate a returned bool, or add 1 to a returned int",
            MutationOperator::ConditionalsBoundary => "swap < with <= and > with >=",
            MutationOperator::NegateConditionals => "replace a comparison with its negation",
            MutationOperator::Increments => "swap += with -=",
            MutationOperator::VoidMethodCalls => "remove a call to a void function",
        }
    }

    /// Whether this operator has a mutation to offer at `node`.
    pub fn applies_to(self, node: NodeRef<'_>) -> bool {
        match node {
            NodeRef::Expr(e) => match (&e.kind, self) {
                (ExprKind::Binary { op, .. }, MutationOperator::Math) => math(*op).is_some(),
                (ExprKind::Binary { op, .. }, MutationOperator::ConditionalsBoundary) => {
                    boundary(*op).is_some()
                }
                (ExprKind::Binary { op, .. }, MutationOperator::NegateConditionals) => {
                    negate(*op).is_some()
                }
                (
                    ExprKind::Unary {
                        op: UnaryOp::Neg, ..
                    },
                    MutationOperator::InvertNegs,
                ) => true,
                _ => false,
            },
            NodeRef::Stmt(s) => match (&s.kind, self) {
                (
                    StmtKind::Return {
                        value: Some(v),
                        perturbed: false,
                    },
                    MutationOperator::ReturnVals,
                ) => matches!(v.ty, Type::Int | Type::Bool),
                (StmtKind::Compound { .. }, MutationOperator::Increments) => true,
                (
                    StmtKind::Expr {
                        expr,
                        removed: false,
                    },
                    MutationOperator::VoidMethodCalls,
                ) => expr.ty == Type::Void && matches!(expr.kind, ExprKind::Call { .. }),
                _ => false,
            },
        }
    }

    /// Rewrite `node` in place. Returns false, leaving the node untouched,
    /// when the operator does not apply.
    pub(crate) fn apply(self, node: NodeMut<'_>) -> bool {
        match node {
            NodeMut::Expr(e) => match (&mut e.kind, self) {
                (ExprKind::Binary { op, .. }, MutationOperator::Math) => replace(op, math),
                (ExprKind::Binary { op, .. }, MutationOperator::ConditionalsBoundary) => {
                    replace(op, boundary)
                }
                (ExprKind::Binary { op, .. }, MutationOperator::NegateConditionals) => {
                    replace(op, negate)
                }
                (
                    ExprKind::Unary {
                        op: op @ UnaryOp::Neg,
                        ..
                    },
                    MutationOperator::InvertNegs,
                ) => {
                    *op = UnaryOp::Identity;
                    true
                }
                _ => false,
            },
            NodeMut::Stmt(s) => {
                if !self.applies_to(NodeRef::Stmt(s)) {
                    return false;
                }
                match &mut s.kind {
                    StmtKind::Return { perturbed, .. } => *perturbed = true,
                    StmtKind::Compound { op, .. } => {
                        *op = match op {
                            CompoundOp::AddAssign => CompoundOp::SubAssign,
                            CompoundOp::SubAssign => CompoundOp::AddAssign,
                        }
                    }
                    StmtKind::Expr { removed, .. } => *removed = true,
                    _ => unreachable!("applicability checked above"),
                }
                true
            }
        }
    }
}

fn replace(op: &mut BinaryOp, rule: fn(BinaryOp) -> Option<BinaryOp>) -> bool {
    match rule(*op) {
        Some(new) => {
            *op = new;
            true
        }
        None => false,
    }
}

fn math(op: BinaryOp) -> Option<BinaryOp> {
    Some(match op {
        BinaryOp::Add => BinaryOp::Sub,
        BinaryOp::Sub => BinaryOp::Add,
        BinaryOp::Mul => BinaryOp::Div,
        BinaryOp::Div => BinaryOp::Mul,
        BinaryOp::Rem => BinaryOp::Mul,
        _ => return None,
    })
}

fn boundary(op: BinaryOp) -> Option<BinaryOp> {
    Some(match op {
        BinaryOp::Lt => BinaryOp::Le,
        BinaryOp::Le => BinaryOp::Lt,
        BinaryOp::Gt => BinaryOp::Ge,
        BinaryOp::Ge => BinaryOp::Gt,
        _ => return None,
    })
}

fn negate(op: BinaryOp) -> Option<BinaryOp> {
    Some(match op {
        BinaryOp::Lt => BinaryOp::Ge,
        BinaryOp::Le => BinaryOp::Gt,
        BinaryOp::Gt => BinaryOp::Le,
        BinaryOp::Ge => BinaryOp::Lt,
        BinaryOp::Eq => BinaryOp::Ne,
        BinaryOp::Ne => BinaryOp::Eq,
        _ => return None,
    })
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown mutation operator `{0}`")]
pub struct UnknownOperator(pub String);

impl FromStr for MutationOperator {
    type Err = UnknownOperator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|op| op.name() == norm)
            .ok_or_else(|| UnknownOperator(s.to_string()))
    }
}
