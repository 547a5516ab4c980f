//! Whole-program inlining for the monolithic analysis mode.
//!
//! Produces a single-procedure program: every call in the entry procedure is
//! replaced by the callee's body, recursively. The call graph is acyclic by
//! the frontend's recursion check, so this terminates. The result is already
//! normalized (inlining needs return-free bodies to splice), so it can be
//! encoded directly without running normalization again.

use std::collections::HashMap;

use crate::frontend::ast::*;
use crate::frontend::normalize::normalize;

/// Monolithic encoding: inline everything into the entry procedure and
/// encode the result as a single transition system.
pub fn inline_all(p: &Program) -> super::ProcedureTS {
    let mono = inline_program(p);
    let entry = mono.procedure(&mono.entry).expect("entry exists");
    super::encode(&mono, entry)
}

/// The AST-level half of [`inline_all`]: a single-procedure program. The
/// result is already normalized; encode it directly.
pub fn inline_program(p: &Program) -> Program {
    let p = normalize(p);
    let entry = p.procedure(&p.entry).expect("entry exists").clone();
    let mut inl = Inliner { program: &p, counter: 0, cache: HashMap::new() };
    let body = inl.inlined_body(&entry);
    Program {
        procedures: vec![ProcedureAST {
            name: entry.name.clone(),
            params: entry.params.clone(),
            ret: entry.ret,
            body,
            loc: entry.loc,
        }],
        globals: p.globals.clone(),
        entry: p.entry.clone(),
        widths: p.widths,
    }
}

struct Inliner<'a> {
    program: &'a Program,
    /// Distinguishes inline instances; each splice gets a fresh suffix.
    counter: u32,
    cache: HashMap<String, Vec<Stmt>>,
}

impl Inliner<'_> {
    fn inlined_body(&mut self, proc: &ProcedureAST) -> Vec<Stmt> {
        if let Some(b) = self.cache.get(&proc.name) {
            return b.clone();
        }
        let b = self.block(&proc.body);
        self.cache.insert(proc.name.clone(), b.clone());
        b
    }

    fn block(&mut self, stmts: &[Stmt]) -> Vec<Stmt> {
        let mut out = Vec::new();
        for s in stmts {
            match s {
                Stmt::Decl { name, ty, init: Some(init), loc } if split_call(init).is_some() => {
                    let call = split_call(init).unwrap();
                    let ret = self.splice(call, &mut out);
                    out.push(Stmt::Decl {
                        name: name.clone(),
                        ty: *ty,
                        init: Some(replace_call(init, &ret)),
                        loc: *loc,
                    });
                }
                Stmt::Assign { name, expr, loc } if split_call(expr).is_some() => {
                    let call = split_call(expr).unwrap();
                    let ret = self.splice(call, &mut out);
                    out.push(Stmt::Assign {
                        name: name.clone(),
                        expr: replace_call(expr, &ret),
                        loc: *loc,
                    });
                }
                Stmt::CallStmt { call, .. } => {
                    let _ = self.splice(call, &mut out);
                }
                Stmt::If { cond, then_branch, else_branch, loc } => out.push(Stmt::If {
                    cond: cond.clone(),
                    then_branch: self.block(then_branch),
                    else_branch: self.block(else_branch),
                    loc: *loc,
                }),
                Stmt::While { cond, body, loc } => out.push(Stmt::While {
                    cond: cond.clone(),
                    body: self.block(body),
                    loc: *loc,
                }),
                _ => out.push(s.clone()),
            }
        }
        out
    }

    /// Expands one call into `out`: parameter bindings followed by the
    /// callee's (recursively inlined, renamed) body. Returns the mangled
    /// name of the callee's return variable, if it has one.
    fn splice(&mut self, call: &Expr, out: &mut Vec<Stmt>) -> String {
        let ExprKind::Call { name, args } = &call.kind else { unreachable!() };
        let callee = self.program.procedure(name).expect("known callee").clone();
        let body = self.inlined_body(&callee);
        let k = self.counter;
        self.counter += 1;
        let suffix = format!("$inl{k}");
        let mut ren: HashMap<String, String> = HashMap::new();
        for ((pname, pty), arg) in callee.params.iter().zip(args) {
            let new = format!("{pname}{suffix}");
            out.push(Stmt::Decl {
                name: new.clone(),
                ty: *pty,
                init: Some(arg.clone()),
                loc: call.loc,
            });
            ren.insert(pname.clone(), new);
        }
        out.extend(rename_block(&body, &ren, &suffix));
        format!("{}{}", crate::frontend::normalize::RET_VAR, suffix)
    }
}

/// A call in assignment position, possibly under casts.
fn split_call(e: &Expr) -> Option<&Expr> {
    match &e.kind {
        ExprKind::Call { .. } => Some(e),
        ExprKind::Cast { arg } => split_call(arg),
        _ => None,
    }
}

fn replace_call(e: &Expr, ret: &str) -> Expr {
    match &e.kind {
        ExprKind::Call { .. } => {
            Expr { kind: ExprKind::Var(ret.to_string()), ty: e.ty, loc: e.loc }
        }
        ExprKind::Cast { arg } => Expr {
            kind: ExprKind::Cast { arg: Box::new(replace_call(arg, ret)) },
            ty: e.ty,
            loc: e.loc,
        },
        _ => e.clone(),
    }
}

/// Scope-aware renaming of the callee's locals (and parameters, passed in
/// via `map`). Globals are shared with the caller and stay untouched; a
/// local shadowing a global only masks it from its declaration onward.
fn rename_block(stmts: &[Stmt], map: &HashMap<String, String>, suffix: &str) -> Vec<Stmt> {
    let mut map = map.clone();
    let mut out = Vec::new();
    for s in stmts {
        match s {
            Stmt::Decl { name, ty, init, loc } => {
                let init = init.as_ref().map(|e| rename_expr(e, &map));
                let new = format!("{name}{suffix}");
                map.insert(name.clone(), new.clone());
                out.push(Stmt::Decl { name: new, ty: *ty, init, loc: *loc });
            }
            Stmt::Assign { name, expr, loc } => out.push(Stmt::Assign {
                name: map.get(name).cloned().unwrap_or_else(|| name.clone()),
                expr: rename_expr(expr, &map),
                loc: *loc,
            }),
            Stmt::If { cond, then_branch, else_branch, loc } => out.push(Stmt::If {
                cond: rename_expr(cond, &map),
                then_branch: rename_block(then_branch, &map, suffix),
                else_branch: rename_block(else_branch, &map, suffix),
                loc: *loc,
            }),
            Stmt::While { cond, body, loc } => out.push(Stmt::While {
                cond: rename_expr(cond, &map),
                body: rename_block(body, &map, suffix),
                loc: *loc,
            }),
            Stmt::Assume { cond, loc } => {
                out.push(Stmt::Assume { cond: rename_expr(cond, &map), loc: *loc })
            }
            Stmt::Assert { cond, loc } => {
                out.push(Stmt::Assert { cond: rename_expr(cond, &map), loc: *loc })
            }
            Stmt::CallStmt { call, loc } => {
                out.push(Stmt::CallStmt { call: rename_expr(call, &map), loc: *loc })
            }
            Stmt::Return { .. } => unreachable!("inlined bodies are normalized"),
        }
    }
    out
}

fn rename_expr(e: &Expr, map: &HashMap<String, String>) -> Expr {
    let kind = match &e.kind {
        ExprKind::Num(n) => ExprKind::Num(*n),
        ExprKind::Nondet => ExprKind::Nondet,
        ExprKind::Var(n) => ExprKind::Var(map.get(n).cloned().unwrap_or_else(|| n.clone())),
        ExprKind::Call { name, args } => ExprKind::Call {
            name: name.clone(),
            args: args.iter().map(|a| rename_expr(a, map)).collect(),
        },
        ExprKind::Unary { op, arg } => {
            ExprKind::Unary { op: *op, arg: Box::new(rename_expr(arg, map)) }
        }
        ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
            op: *op,
            lhs: Box::new(rename_expr(lhs, map)),
            rhs: Box::new(rename_expr(rhs, map)),
        },
        ExprKind::Ternary { cond, then_val, else_val } => ExprKind::Ternary {
            cond: Box::new(rename_expr(cond, map)),
            then_val: Box::new(rename_expr(then_val, map)),
            else_val: Box::new(rename_expr(else_val, map)),
        },
        ExprKind::Cast { arg } => ExprKind::Cast { arg: Box::new(rename_expr(arg, map)) },
    };
    Expr { kind, ty: e.ty, loc: e.loc }
}
