//! Recursive-descent parser with inline type checking.
//!
//! The grammar (EBNF, documented in the README) is a small C subset. Type
//! checking happens while parsing: every implicit conversion becomes an
//! explicit `Cast` node, comparisons get a common operand type, and numeric
//! values in Boolean position are wrapped as `e != 0`. `nondet()` takes its
//! type from the context (assignment target, parameter, return type) and is
//! rejected where no context exists. Calls are restricted to statement
//! position or the top of an assignment right-hand side.

use std::collections::HashMap;

use crate::logic::bitvec::MAX_WIDTH;
use crate::logic::Sign;

use super::ast::*;
use super::callgraph;
use super::lexer::{tokenize, Tok};
use super::Diagnostic;

pub fn parse(file: &str, src: &str, widths: TypeWidths) -> Result<Program, Diagnostic> {
    for w in [widths.int_width, widths.char_width] {
        if !(2..=MAX_WIDTH).contains(&w) {
            return Err(Diagnostic::new(
                file,
                Loc::default(),
                &format!("type width {w} out of range (2..={MAX_WIDTH})"),
            ));
        }
    }
    let toks = tokenize(file, src)?;
    let mut p = Parser {
        file,
        toks,
        pos: 0,
        widths,
        sigs: HashMap::new(),
        globals: HashMap::new(),
        scopes: Vec::new(),
        current_ret: None,
    };
    p.prescan()?;
    let program = p.program()?;
    // Recursion is a front-end error: reject cyclic call graphs here.
    callgraph::build_call_graph(&program).map_err(|e| {
        let loc = program.procedure(&e.at).map(|pr| pr.loc).unwrap_or_default();
        Diagnostic::new(file, loc, &e.msg)
    })?;
    Ok(program)
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    widths: TypeWidths,
    sigs: HashMap<String, (Vec<Type>, Option<Type>)>,
    globals: HashMap<String, Type>,
    scopes: Vec<HashMap<String, Type>>,
    current_ret: Option<Type>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, loc: Loc, msg: &str) -> Result<T, Diagnostic> {
        Err(Diagnostic::new(self.file, loc, msg))
    }

    fn expect(&mut self, want: Tok) -> Result<Loc, Diagnostic> {
        let loc = self.loc();
        if *self.peek() == want {
            self.bump();
            Ok(loc)
        } else {
            self.err(loc, &format!("expected {want}, found {}", self.peek()))
        }
    }

    fn is_type_start(t: &Tok) -> bool {
        matches!(t, Tok::Void | Tok::Int | Tok::Char | Tok::Signed | Tok::Unsigned)
    }

    /// `void` | `int` | `char` | [`signed`|`unsigned`] (`int`|`char`)?
    fn parse_type(&mut self) -> Result<Option<Type>, Diagnostic> {
        let loc = self.loc();
        let (sign, base) = match self.bump() {
            Tok::Void => return Ok(None),
            Tok::Int => (Sign::Signed, Base::Int),
            Tok::Char => (Sign::Signed, Base::Char),
            Tok::Signed | Tok::Unsigned => {
                let sign = if self.toks[self.pos - 1].0 == Tok::Unsigned {
                    Sign::Unsigned
                } else {
                    Sign::Signed
                };
                let base = match self.peek() {
                    Tok::Int => {
                        self.bump();
                        Base::Int
                    }
                    Tok::Char => {
                        self.bump();
                        Base::Char
                    }
                    _ => Base::Int,
                };
                (sign, base)
            }
            other => return self.err(loc, &format!("expected a type, found {other}")),
        };
        let width = match base {
            Base::Int => self.widths.int_width,
            Base::Char => self.widths.char_width,
            Base::Bool => 1,
        };
        Ok(Some(Type { sign, base, width }))
    }

    /// Collect procedure signatures and global declarations before parsing
    /// bodies, so calls may reference procedures defined later in the file.
    fn prescan(&mut self) -> Result<(), Diagnostic> {
        let start = self.pos;
        while *self.peek() != Tok::Eof {
            let loc = self.loc();
            if !Self::is_type_start(self.peek()) {
                return self.err(loc, &format!("expected a declaration, found {}", self.peek()));
            }
            let ty = self.parse_type()?;
            let name = match self.bump() {
                Tok::Ident(n) => n,
                other => return self.err(loc, &format!("expected a name, found {other}")),
            };
            if *self.peek() == Tok::LParen {
                self.bump();
                let mut params = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        let ploc = self.loc();
                        let pt = self
                            .parse_type()?
                            .ok_or_else(|| Diagnostic::new(self.file, ploc, "void parameter"))?;
                        if let Tok::Ident(_) = self.peek() {
                            self.bump();
                        }
                        params.push(pt);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                if self.sigs.insert(name.clone(), (params, ty)).is_some() {
                    return self.err(loc, &format!("duplicate procedure `{name}`"));
                }
                // skip the body
                self.expect(Tok::LBrace)?;
                let mut depth = 1;
                while depth > 0 {
                    match self.bump() {
                        Tok::LBrace => depth += 1,
                        Tok::RBrace => depth -= 1,
                        Tok::Eof => return self.err(self.loc(), "unexpected end of input"),
                        _ => {}
                    }
                }
            } else {
                let ty = ty.ok_or_else(|| Diagnostic::new(self.file, loc, "void variable"))?;
                if self.globals.insert(name.clone(), ty).is_some() {
                    return self.err(loc, &format!("duplicate global `{name}`"));
                }
                if *self.peek() == Tok::Assign {
                    self.bump();
                    let neg = if *self.peek() == Tok::Minus {
                        self.bump();
                        true
                    } else {
                        false
                    };
                    match self.bump() {
                        Tok::Num(_) if !neg => {}
                        Tok::Num(_) => {}
                        other => {
                            return self.err(
                                loc,
                                &format!("global initializers must be constants, found {other}"),
                            )
                        }
                    }
                }
                self.expect(Tok::Semi)?;
            }
        }
        self.pos = start;
        Ok(())
    }

    fn program(&mut self) -> Result<Program, Diagnostic> {
        let mut procedures = Vec::new();
        let mut globals = Vec::new();
        while *self.peek() != Tok::Eof {
            let loc = self.loc();
            let ty = self.parse_type()?;
            let name = match self.bump() {
                Tok::Ident(n) => n,
                other => return self.err(loc, &format!("expected a name, found {other}")),
            };
            if *self.peek() == Tok::LParen {
                procedures.push(self.procedure(name, ty, loc)?);
            } else {
                let ty = ty.unwrap();
                let mut init = None;
                if *self.peek() == Tok::Assign {
                    self.bump();
                    let neg = if *self.peek() == Tok::Minus {
                        self.bump();
                        true
                    } else {
                        false
                    };
                    if let Tok::Num(n) = self.bump() {
                        let v = if neg { (n as i64).wrapping_neg() as u64 } else { n };
                        init = Some(v & mask(ty.width));
                    }
                }
                self.expect(Tok::Semi)?;
                globals.push(Global { name, ty, init });
            }
        }
        if procedures.is_empty() {
            return self.err(Loc::default(), "no procedures defined");
        }
        let entry = if procedures.iter().any(|p| p.name == "main") {
            "main".to_string()
        } else {
            procedures.last().unwrap().name.clone()
        };
        Ok(Program { procedures, globals, entry, widths: self.widths })
    }

    fn procedure(
        &mut self,
        name: String,
        ret: Option<Type>,
        loc: Loc,
    ) -> Result<ProcedureAST, Diagnostic> {
        self.expect(Tok::LParen)?;
        let mut params: Vec<(String, Type)> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let ploc = self.loc();
                let pt = self
                    .parse_type()?
                    .ok_or_else(|| Diagnostic::new(self.file, ploc, "void parameter"))?;
                let pname = match self.bump() {
                    Tok::Ident(n) => n,
                    other => {
                        return self.err(ploc, &format!("expected a parameter name, found {other}"))
                    }
                };
                if params.iter().any(|(n, _)| *n == pname) {
                    return self.err(ploc, &format!("duplicate parameter `{pname}`"));
                }
                params.push((pname, pt));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.current_ret = ret;
        self.scopes.clear();
        self.scopes.push(params.iter().cloned().collect());
        let body = self.block()?;
        self.scopes.pop();
        Ok(ProcedureAST { name, params, ret, body, loc })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, Diagnostic> {
        self.expect(Tok::LBrace)?;
        self.scopes.push(HashMap::new());
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.err(self.loc(), "unexpected end of input");
            }
            let stmts = self.stmt()?;
            out.extend(stmts);
        }
        self.bump();
        self.scopes.pop();
        Ok(out)
    }

    /// A statement; `for` desugaring can produce several statements.
    fn stmt(&mut self) -> Result<Vec<Stmt>, Diagnostic> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::LBrace => {
                // Braces without control flow: splice, keeping declarations
                // scoped to the inner block.
                self.block()
            }
            Tok::Semi => {
                self.bump();
                Ok(vec![])
            }
            t if Self::is_type_start(&t) => {
                let ty = self
                    .parse_type()?
                    .ok_or_else(|| Diagnostic::new(self.file, loc, "void variable"))?;
                let name = match self.bump() {
                    Tok::Ident(n) => n,
                    other => return self.err(loc, &format!("expected a name, found {other}")),
                };
                let init = if *self.peek() == Tok::Assign {
                    self.bump();
                    Some(self.typed_expr(Some(ty), true)?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                self.declare(&name, ty, loc)?;
                Ok(vec![Stmt::Decl { name, ty, init, loc }])
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.typed_expr(Some(Type::bool()), false)?;
                self.expect(Tok::RParen)?;
                let then_branch = self.stmt_as_block()?;
                let else_branch = if *self.peek() == Tok::Else {
                    self.bump();
                    self.stmt_as_block()?
                } else {
                    vec![]
                };
                Ok(vec![Stmt::If { cond, then_branch, else_branch, loc }])
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.typed_expr(Some(Type::bool()), false)?;
                self.expect(Tok::RParen)?;
                let body = self.stmt_as_block()?;
                Ok(vec![Stmt::While { cond, body, loc }])
            }
            Tok::For => self.for_stmt(loc),
            Tok::Return => {
                self.bump();
                let expr = if *self.peek() == Tok::Semi {
                    None
                } else {
                    match self.current_ret {
                        None => return self.err(loc, "return with a value in a void procedure"),
                        Some(ty) => Some(self.typed_expr(Some(ty), true)?),
                    }
                };
                if expr.is_none() && self.current_ret.is_some() {
                    return self.err(loc, "return without a value in a non-void procedure");
                }
                self.expect(Tok::Semi)?;
                Ok(vec![Stmt::Return { expr, loc }])
            }
            Tok::Assume | Tok::Assert => {
                let is_assume = self.bump() == Tok::Assume;
                self.expect(Tok::LParen)?;
                let cond = self.typed_expr(Some(Type::bool()), false)?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(vec![if is_assume {
                    Stmt::Assume { cond, loc }
                } else {
                    Stmt::Assert { cond, loc }
                }])
            }
            Tok::Ident(_) => {
                let s = self.simple_stmt()?;
                self.expect(Tok::Semi)?;
                Ok(vec![s])
            }
            other => self.err(loc, &format!("expected a statement, found {other}")),
        }
    }

    fn stmt_as_block(&mut self) -> Result<Vec<Stmt>, Diagnostic> {
        if *self.peek() == Tok::LBrace {
            self.block()
        } else {
            self.stmt()
        }
    }

    /// Assignment (including `+=`, `++`) or call statement, without the
    /// trailing semicolon; used by both statements and `for` headers.
    fn simple_stmt(&mut self) -> Result<Stmt, Diagnostic> {
        let loc = self.loc();
        let name = match self.bump() {
            Tok::Ident(n) => n,
            other => return self.err(loc, &format!("expected a statement, found {other}")),
        };
        if *self.peek() == Tok::LParen {
            if self.lookup(&name).is_some() {
                return self.err(loc, &format!("`{name}` is a variable, not a procedure"));
            }
            let call = self.call_expr(name, loc)?;
            return Ok(Stmt::CallStmt { call, loc });
        }
        let ty = self
            .lookup(&name)
            .ok_or_else(|| Diagnostic::new(self.file, loc, &format!("unknown identifier `{name}`")))?;
        let var = Expr { kind: ExprKind::Var(name.clone()), ty, loc };
        let expr = match self.bump() {
            Tok::Assign => self.typed_expr(Some(ty), true)?,
            Tok::PlusPlus => self.compound(var, BinaryOp::Add, one(loc), ty)?,
            Tok::MinusMinus => self.compound(var, BinaryOp::Sub, one(loc), ty)?,
            Tok::PlusAssign => {
                let rhs = self.expr()?;
                self.compound(var, BinaryOp::Add, rhs, ty)?
            }
            Tok::MinusAssign => {
                let rhs = self.expr()?;
                self.compound(var, BinaryOp::Sub, rhs, ty)?
            }
            Tok::StarAssign => {
                let rhs = self.expr()?;
                self.compound(var, BinaryOp::Mul, rhs, ty)?
            }
            other => return self.err(loc, &format!("expected an assignment, found {other}")),
        };
        Ok(Stmt::Assign { name, expr, loc })
    }

    fn compound(
        &mut self,
        var: Expr,
        op: BinaryOp,
        rhs: Expr,
        ty: Type,
    ) -> Result<Expr, Diagnostic> {
        let loc = var.loc;
        let raw = Expr {
            kind: ExprKind::Binary { op, lhs: Box::new(var), rhs: Box::new(rhs) },
            ty,
            loc,
        };
        self.type_expr(raw, Some(ty), false)
    }

    /// `for (init; cond; step) body` desugars to `init; while (cond) { body; step; }`.
    fn for_stmt(&mut self, loc: Loc) -> Result<Vec<Stmt>, Diagnostic> {
        self.bump();
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if *self.peek() != Tok::Semi {
            if Self::is_type_start(self.peek()) {
                let dloc = self.loc();
                let ty = self
                    .parse_type()?
                    .ok_or_else(|| Diagnostic::new(self.file, dloc, "void variable"))?;
                let name = match self.bump() {
                    Tok::Ident(n) => n,
                    other => return self.err(dloc, &format!("expected a name, found {other}")),
                };
                let init = if *self.peek() == Tok::Assign {
                    self.bump();
                    Some(self.typed_expr(Some(ty), true)?)
                } else {
                    None
                };
                self.declare(&name, ty, dloc)?;
                out.push(Stmt::Decl { name, ty, init, loc: dloc });
            } else {
                out.push(self.simple_stmt()?);
            }
        }
        self.expect(Tok::Semi)?;
        let cond = if *self.peek() == Tok::Semi {
            // Same shape as an explicit `while (1)`.
            let raw = Expr { kind: ExprKind::Num(1), ty: Type::bool(), loc };
            self.type_expr(raw, Some(Type::bool()), false)?
        } else {
            self.typed_expr(Some(Type::bool()), false)?
        };
        self.expect(Tok::Semi)?;
        let step = if *self.peek() == Tok::RParen { None } else { Some(self.simple_stmt()?) };
        self.expect(Tok::RParen)?;
        let mut body = self.stmt_as_block()?;
        if let Some(s) = step {
            body.push(s);
        }
        out.push(Stmt::While { cond, body, loc });
        Ok(out)
    }

    // -- expressions --------------------------------------------------------

    fn typed_expr(&mut self, expected: Option<Type>, call_ok: bool) -> Result<Expr, Diagnostic> {
        let e = self.expr()?;
        self.type_expr(e, expected, call_ok)
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        self.ternary()
    }

    fn ternary(&mut self) -> Result<Expr, Diagnostic> {
        let cond = self.binary(0)?;
        if *self.peek() != Tok::Question {
            return Ok(cond);
        }
        let loc = self.loc();
        self.bump();
        let then_val = self.ternary()?;
        self.expect(Tok::Colon)?;
        let else_val = self.ternary()?;
        Ok(Expr {
            kind: ExprKind::Ternary {
                cond: Box::new(cond),
                then_val: Box::new(then_val),
                else_val: Box::new(else_val),
            },
            ty: Type::bool(),
            loc,
        })
    }

    fn binop_at(&self, level: usize) -> Option<BinaryOp> {
        use BinaryOp::*;
        let op = match (level, self.peek()) {
            (0, Tok::PipePipe) => LogOr,
            (1, Tok::AmpAmp) => LogAnd,
            (2, Tok::Pipe) => BitOr,
            (3, Tok::Caret) => BitXor,
            (4, Tok::Amp) => BitAnd,
            (5, Tok::EqEq) => Eq,
            (5, Tok::NotEq) => Ne,
            (6, Tok::Lt) => Lt,
            (6, Tok::Le) => Le,
            (6, Tok::Gt) => Gt,
            (6, Tok::Ge) => Ge,
            (7, Tok::Shl) => Shl,
            (7, Tok::Shr) => Shr,
            (8, Tok::Plus) => Add,
            (8, Tok::Minus) => Sub,
            (9, Tok::Star) => Mul,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, Diagnostic> {
        if level > 9 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop_at(level) {
            let loc = self.loc();
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                ty: Type::bool(),
                loc,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, Diagnostic> {
        let loc = self.loc();
        let op = match self.peek() {
            Tok::Minus => Some(UnaryOp::Neg),
            Tok::Bang => Some(UnaryOp::LogNot),
            Tok::Tilde => Some(UnaryOp::BitNot),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let arg = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary { op, arg: Box::new(arg) }, ty: Type::bool(), loc });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, Diagnostic> {
        let loc = self.loc();
        match self.bump() {
            Tok::Num(n) => Ok(Expr { kind: ExprKind::Num(n), ty: Type::bool(), loc }),
            Tok::Nondet => {
                self.expect(Tok::LParen)?;
                self.expect(Tok::RParen)?;
                Ok(Expr { kind: ExprKind::Nondet, ty: Type::bool(), loc })
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.call_parse(name, loc)
                } else {
                    Ok(Expr { kind: ExprKind::Var(name), ty: Type::bool(), loc })
                }
            }
            Tok::LParen => {
                if Self::is_type_start(self.peek()) {
                    let ty = self
                        .parse_type()?
                        .ok_or_else(|| Diagnostic::new(self.file, loc, "cast to void"))?;
                    self.expect(Tok::RParen)?;
                    let arg = self.unary()?;
                    Ok(Expr { kind: ExprKind::Cast { arg: Box::new(arg) }, ty, loc })
                } else {
                    let e = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(e)
                }
            }
            other => self.err(loc, &format!("expected an expression, found {other}")),
        }
    }

    /// Parse a call's argument list (untyped).
    fn call_parse(&mut self, name: String, loc: Loc) -> Result<Expr, Diagnostic> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(Expr { kind: ExprKind::Call { name, args }, ty: Type::bool(), loc })
    }

    /// Parse and type a call in statement position.
    fn call_expr(&mut self, name: String, loc: Loc) -> Result<Expr, Diagnostic> {
        let raw = self.call_parse(name, loc)?;
        self.type_expr(raw, None, true)
    }

    // -- typing -------------------------------------------------------------

    fn declare(&mut self, name: &str, ty: Type, loc: Loc) -> Result<(), Diagnostic> {
        if self.scopes.iter().any(|s| s.contains_key(name)) {
            return self.err(loc, &format!("redeclaration of `{name}`"));
        }
        self.scopes.last_mut().unwrap().insert(name.to_string(), ty);
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<Type> {
        for s in self.scopes.iter().rev() {
            if let Some(t) = s.get(name) {
                return Some(*t);
            }
        }
        self.globals.get(name).copied()
    }

    /// Result type of mixed-width arithmetic: the wider width wins; on equal
    /// widths, unsigned wins.
    fn common(&self, a: Type, b: Type) -> Type {
        if a.width > b.width {
            a
        } else if b.width > a.width {
            b
        } else if a.sign == Sign::Unsigned {
            a
        } else {
            b
        }
    }

    fn int_type(&self) -> Type {
        Type { sign: Sign::Signed, base: Base::Int, width: self.widths.int_width }
    }

    fn coerce(&self, e: Expr, target: Type) -> Expr {
        if e.ty == target {
            return e;
        }
        let loc = e.loc;
        // Literals are retyped in place: the printed form must reparse to the
        // identical tree, and a bare number rereads at its context type.
        if let ExprKind::Num(n) = e.kind {
            let v = crate::logic::BitVec::new(e.ty.width, n)
                .cast(target.width, e.ty.sign == Sign::Signed);
            return Expr { kind: ExprKind::Num(v.to_u64()), ty: target, loc };
        }
        Expr { kind: ExprKind::Cast { arg: Box::new(e) }, ty: target, loc }
    }

    /// Wrap a numeric value as `e != 0` when a truth value is needed.
    fn truthify(&self, e: Expr) -> Expr {
        if e.ty.is_bool() {
            return e;
        }
        let loc = e.loc;
        let zero = Expr { kind: ExprKind::Num(0), ty: e.ty, loc };
        Expr {
            kind: ExprKind::Binary { op: BinaryOp::Ne, lhs: Box::new(e), rhs: Box::new(zero) },
            ty: Type::bool(),
            loc,
        }
    }

    fn type_expr(
        &self,
        e: Expr,
        expected: Option<Type>,
        call_ok: bool,
    ) -> Result<Expr, Diagnostic> {
        let loc = e.loc;
        let typed = match e.kind {
            ExprKind::Num(n) => {
                let ty = match expected {
                    Some(t) if !t.is_bool() => t,
                    _ => self.int_type(),
                };
                Expr { kind: ExprKind::Num(n & mask(ty.width)), ty, loc }
            }
            ExprKind::Var(name) => {
                let ty = self.lookup(&name).ok_or_else(|| {
                    Diagnostic::new(self.file, loc, &format!("unknown identifier `{name}`"))
                })?;
                Expr { kind: ExprKind::Var(name), ty, loc }
            }
            ExprKind::Nondet => {
                let ty = match expected {
                    Some(t) if !t.is_bool() => t,
                    // Boolean context, e.g. `while (nondet())`: an int whose
                    // truth value is taken below.
                    Some(_) => self.int_type(),
                    None => {
                        return self.err(
                            loc,
                            "cannot infer the type of nondet() here; use a cast like (int)nondet()",
                        )
                    }
                };
                Expr { kind: ExprKind::Nondet, ty, loc }
            }
            ExprKind::Call { name, args } => {
                if !call_ok {
                    return self.err(
                        loc,
                        "calls may only appear as a statement or as the whole right-hand side of an assignment",
                    );
                }
                let (params, ret) = self.sigs.get(&name).ok_or_else(|| {
                    Diagnostic::new(self.file, loc, &format!("unknown procedure `{name}`"))
                })?;
                if params.len() != args.len() {
                    return self.err(
                        loc,
                        &format!(
                            "`{name}` expects {} argument(s), got {}",
                            params.len(),
                            args.len()
                        ),
                    );
                }
                let mut targs = Vec::new();
                for (a, pt) in args.into_iter().zip(params.clone()) {
                    targs.push(self.type_expr(a, Some(pt), false)?);
                }
                let ty = match (ret, expected) {
                    (Some(t), _) => *t,
                    (None, None) => Type::bool(), // statement position; value unused
                    (None, Some(_)) => {
                        return self.err(loc, &format!("void procedure `{name}` used as a value"))
                    }
                };
                Expr { kind: ExprKind::Call { name, args: targs }, ty, loc }
            }
            ExprKind::Unary { op, arg } => match op {
                UnaryOp::LogNot => {
                    let a = self.type_expr(*arg, Some(Type::bool()), false)?;
                    Expr {
                        kind: ExprKind::Unary { op, arg: Box::new(a) },
                        ty: Type::bool(),
                        loc,
                    }
                }
                UnaryOp::Neg | UnaryOp::BitNot => {
                    let a = self.type_expr(*arg, expected.filter(|t| !t.is_bool()), false)?;
                    if a.ty.is_bool() {
                        return self.err(loc, "arithmetic on a truth value");
                    }
                    let ty = a.ty;
                    Expr { kind: ExprKind::Unary { op, arg: Box::new(a) }, ty, loc }
                }
            },
            ExprKind::Binary { op, lhs, rhs } => {
                use BinaryOp::*;
                match op {
                    LogAnd | LogOr => {
                        let l = self.type_expr(*lhs, Some(Type::bool()), false)?;
                        let r = self.type_expr(*rhs, Some(Type::bool()), false)?;
                        Expr {
                            kind: ExprKind::Binary { op, lhs: Box::new(l), rhs: Box::new(r) },
                            ty: Type::bool(),
                            loc,
                        }
                    }
                    Shl | Shr => {
                        let l = self.type_expr(*lhs, None, false)?;
                        let r = self.type_expr(*rhs, None, false)?;
                        if l.ty.is_bool() || r.ty.is_bool() {
                            return self.err(loc, "arithmetic on a truth value");
                        }
                        let ty = l.ty;
                        let r = self.coerce(r, Type { sign: Sign::Unsigned, ..ty });
                        Expr {
                            kind: ExprKind::Binary { op, lhs: Box::new(l), rhs: Box::new(r) },
                            ty,
                            loc,
                        }
                    }
                    _ => {
                        // A bare nondet() operand takes the other side's type.
                        let (l, r) = match (&lhs.kind, &rhs.kind) {
                            (ExprKind::Nondet, k) if !matches!(k, ExprKind::Nondet) => {
                                let r = self.type_expr(*rhs, None, false)?;
                                let l = self.type_expr(*lhs, Some(r.ty), false)?;
                                (l, r)
                            }
                            (_, ExprKind::Nondet) => {
                                let l = self.type_expr(*lhs, None, false)?;
                                let r = self.type_expr(*rhs, Some(l.ty), false)?;
                                (l, r)
                            }
                            _ => (
                                self.type_expr(*lhs, None, false)?,
                                self.type_expr(*rhs, None, false)?,
                            ),
                        };
                        if l.ty.is_bool() || r.ty.is_bool() {
                            return self.err(loc, "arithmetic on a truth value");
                        }
                        let t = self.common(l.ty, r.ty);
                        let l = self.coerce(l, t);
                        let r = self.coerce(r, t);
                        let ty = if op.is_compare() { Type::bool() } else { t };
                        Expr {
                            kind: ExprKind::Binary { op, lhs: Box::new(l), rhs: Box::new(r) },
                            ty,
                            loc,
                        }
                    }
                }
            }
            ExprKind::Ternary { cond, then_val, else_val } => {
                let c = self.type_expr(*cond, Some(Type::bool()), false)?;
                let t = self.type_expr(*then_val, expected.filter(|t| !t.is_bool()), false)?;
                let f = self.type_expr(*else_val, expected.filter(|t| !t.is_bool()), false)?;
                if t.ty.is_bool() || f.ty.is_bool() {
                    return self.err(loc, "ternary arms must be numeric");
                }
                let ty = self.common(t.ty, f.ty);
                let t = self.coerce(t, ty);
                let f = self.coerce(f, ty);
                Expr {
                    kind: ExprKind::Ternary {
                        cond: Box::new(c),
                        then_val: Box::new(t),
                        else_val: Box::new(f),
                    },
                    ty,
                    loc,
                }
            }
            ExprKind::Cast { arg } => {
                let target = e.ty;
                // Leaf operands may take their type from the cast directly;
                // compound operands keep their natural type so that printing
                // and reparsing reproduces the same tree.
                let inner_expected = match arg.kind {
                    ExprKind::Nondet | ExprKind::Num(_) => Some(target),
                    _ => None,
                };
                let a = self.type_expr(*arg, inner_expected, false)?;
                if a.ty.is_bool() {
                    return self.err(loc, "cannot cast a truth value");
                }
                // A no-op cast can be dropped, except around leaves whose
                // type came from the cast itself.
                let leaf = matches!(a.kind, ExprKind::Nondet | ExprKind::Num(_));
                if !leaf && a.ty == target {
                    a
                } else {
                    Expr { kind: ExprKind::Cast { arg: Box::new(a) }, ty: target, loc }
                }
            }
        };
        // Final adjustment toward the expected type.
        Ok(match expected {
            Some(t) if t.is_bool() => self.truthify(typed),
            Some(t) if !typed.ty.is_bool() => self.coerce(typed, t),
            _ => typed,
        })
    }
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn one(loc: Loc) -> Expr {
    Expr { kind: ExprKind::Num(1), ty: Type::bool(), loc }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_loops(stmts: &[Stmt]) -> usize {
        stmts
            .iter()
            .map(|s| match s {
                Stmt::While { body, .. } => 1 + count_loops(body),
                Stmt::If { then_branch, else_branch, .. } => {
                    count_loops(then_branch) + count_loops(else_branch)
                }
                _ => 0,
            })
            .sum()
    }

    #[test]
    fn foo2_shape() {
        let p = parse(
            "foo2.mc",
            "void foo2(unsigned x) { while (x >= 10) x++; }",
            TypeWidths::default(),
        )
        .unwrap();
        assert_eq!(p.procedures.len(), 1);
        let f = &p.procedures[0];
        assert_eq!(f.params.len(), 1);
        assert_eq!(f.params[0].1, Type { sign: Sign::Unsigned, base: Base::Int, width: 32 });
        assert_eq!(count_loops(&f.body), 1);
    }

    #[test]
    fn empty_procedure() {
        let p = parse("t.mc", "void f() {}", TypeWidths::default()).unwrap();
        assert_eq!(count_loops(&p.procedures[0].body), 0);
    }

    #[test]
    fn diagnostics_carry_position() {
        let err = parse("t.mc", "void f() {\n  y = 1;\n}", TypeWidths::default()).unwrap_err();
        assert_eq!(err.to_string(), "t.mc:2:3: unknown identifier `y`");
    }

    #[test]
    fn type_errors() {
        for (src, frag) in [
            ("void f(int x) { x = g(); }", "unknown procedure"),
            ("int g() { return 1; } void f(int x) { x = g(1); }", "argument"),
            ("void g() {} void f(int x) { x = g(); }", "used as a value"),
            ("void f(int x) { x = 1 + f(); }", "calls may only appear"),
            ("void f(int x) { int x; }", "redeclaration"),
            ("void f() { return 1; }", "void procedure"),
            ("void f(int x) { x = nondet() + nondet(); }", "cannot infer"),
        ] {
            let err = parse("t.mc", src, TypeWidths::default()).unwrap_err();
            assert!(err.msg.contains(frag), "{src}: {err}");
        }
    }

    #[test]
    fn widths_are_validated() {
        let w = TypeWidths { int_width: 1, char_width: 8 };
        assert!(parse("t.mc", "void f() {}", w).is_err());
        let w = TypeWidths { int_width: 4, char_width: 3 };
        let p = parse("t.mc", "void f(int x, char c) {}", w).unwrap();
        assert_eq!(p.procedures[0].params[0].1.width, 4);
        assert_eq!(p.procedures[0].params[1].1.width, 3);
    }
}
