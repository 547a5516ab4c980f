//! Abstract syntax for the input language, a small C subset over
//! fixed-width machine integers.

use crate::logic::Sign;

#[derive(Clone, Copy, Eq, Debug, Default)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

/// Positions never participate in AST equality; round-tripping through the
/// printer moves everything.
impl PartialEq for Loc {
    fn eq(&self, _: &Loc) -> bool {
        true
    }
}

impl std::fmt::Display for Loc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Base {
    Char,
    Int,
    /// Internal truth values produced by normalization; not writable in
    /// source syntax.
    Bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Type {
    pub sign: Sign,
    pub base: Base,
    pub width: u32,
}

impl Type {
    pub fn bool() -> Type {
        Type { sign: Sign::Unsigned, base: Base::Bool, width: 1 }
    }

    pub fn is_bool(&self) -> bool {
        self.base == Base::Bool
    }
}

/// Bit widths assigned to the base types for a whole run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TypeWidths {
    pub int_width: u32,
    pub char_width: u32,
}

impl Default for TypeWidths {
    fn default() -> Self {
        TypeWidths { int_width: 32, char_width: 8 }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnaryOp {
    Neg,
    BitNot,
    LogNot,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn is_compare(self) -> bool {
        matches!(self, BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum ExprKind {
    Num(u64),
    Var(String),
    Nondet,
    Call { name: String, args: Vec<Expr> },
    Unary { op: UnaryOp, arg: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then_val: Box<Expr>, else_val: Box<Expr> },
    Cast { arg: Box<Expr> },
}

/// Typed expression. The type checker inserts explicit `Cast` nodes at every
/// implicit conversion, so `ty` is exact for each node.
#[derive(Clone, PartialEq, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: Type,
    pub loc: Loc,
}

impl Expr {
    pub fn contains_call_or_nondet(&self) -> bool {
        match &self.kind {
            ExprKind::Num(_) | ExprKind::Var(_) => false,
            ExprKind::Nondet | ExprKind::Call { .. } => true,
            ExprKind::Unary { arg, .. } | ExprKind::Cast { arg } => arg.contains_call_or_nondet(),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.contains_call_or_nondet() || rhs.contains_call_or_nondet()
            }
            ExprKind::Ternary { cond, then_val, else_val } => {
                cond.contains_call_or_nondet()
                    || then_val.contains_call_or_nondet()
                    || else_val.contains_call_or_nondet()
            }
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum Stmt {
    Decl { name: String, ty: Type, init: Option<Expr>, loc: Loc },
    Assign { name: String, expr: Expr, loc: Loc },
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt>, loc: Loc },
    While { cond: Expr, body: Vec<Stmt>, loc: Loc },
    Return { expr: Option<Expr>, loc: Loc },
    Assume { cond: Expr, loc: Loc },
    Assert { cond: Expr, loc: Loc },
    /// A call evaluated for effect only; `call.kind` is always `Call`.
    CallStmt { call: Expr, loc: Loc },
}

impl Stmt {
    pub fn loc(&self) -> Loc {
        match self {
            Stmt::Decl { loc, .. }
            | Stmt::Assign { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::While { loc, .. }
            | Stmt::Return { loc, .. }
            | Stmt::Assume { loc, .. }
            | Stmt::Assert { loc, .. }
            | Stmt::CallStmt { loc, .. } => *loc,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct ProcedureAST {
    pub name: String,
    pub params: Vec<(String, Type)>,
    pub ret: Option<Type>,
    pub body: Vec<Stmt>,
    pub loc: Loc,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Global {
    pub name: String,
    pub ty: Type,
    /// Constant initializer; `None` means the global starts nondeterministic.
    pub init: Option<u64>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Program {
    pub procedures: Vec<ProcedureAST>,
    pub globals: Vec<Global>,
    pub entry: String,
    pub widths: TypeWidths,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&ProcedureAST> {
        self.procedures.iter().find(|p| p.name == name)
    }
}
