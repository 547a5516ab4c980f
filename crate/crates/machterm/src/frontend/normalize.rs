//! AST normalization ahead of the symbolic encoding.
//!
//! After normalization:
//! - no `Return` statements remain: a procedure's result is whatever `$ret`
//!   holds when control reaches the end of the body, and early returns are
//!   rewritten through a `$done` flag so every procedure has a single exit;
//! - loop conditions are deterministic: conditions containing `nondet()`
//!   (or, via `$done`, affected by returns) are evaluated into fresh Boolean
//!   locals before the loop and at the end of each iteration;
//! - constant global initializers run at the top of the entry procedure.

use super::ast::*;

pub const RET_VAR: &str = "$ret";
pub const DONE_VAR: &str = "$done";

pub fn normalize(p: &Program) -> Program {
    let mut out = p.clone();
    for proc in &mut out.procedures {
        normalize_proc(proc);
        if proc.name == p.entry {
            let inits: Vec<Stmt> = p
                .globals
                .iter()
                .filter_map(|g| {
                    g.init.map(|v| Stmt::Assign {
                        name: g.name.clone(),
                        expr: Expr { kind: ExprKind::Num(v), ty: g.ty, loc: Loc::default() },
                        loc: Loc::default(),
                    })
                })
                .collect();
            proc.body.splice(0..0, inits);
        }
    }
    out
}

fn normalize_proc(proc: &mut ProcedureAST) {
    let has_return = stmts_may_return(&proc.body);
    let body = std::mem::take(&mut proc.body);
    let mut new_body = Vec::new();
    if let Some(ty) = proc.ret {
        // Uninitialized, i.e. nondeterministic when control falls off the end
        // of a non-void procedure without a return.
        new_body.push(Stmt::Decl { name: RET_VAR.into(), ty, init: None, loc: Loc::default() });
    }
    if has_return {
        new_body.push(Stmt::Decl {
            name: DONE_VAR.into(),
            ty: Type::bool(),
            init: Some(bool_const(false)),
            loc: Loc::default(),
        });
    }
    new_body.extend(seq(body));
    let mut counter = 0;
    let mut hoisted = Vec::new();
    for s in new_body {
        hoist_loop_conds(s, &mut counter, &mut hoisted);
    }
    proc.body = hoisted;
}

fn bool_const(b: bool) -> Expr {
    Expr { kind: ExprKind::Num(b as u64), ty: Type::bool(), loc: Loc::default() }
}

fn done_var() -> Expr {
    Expr { kind: ExprKind::Var(DONE_VAR.into()), ty: Type::bool(), loc: Loc::default() }
}

fn not_done() -> Expr {
    Expr {
        kind: ExprKind::Unary { op: UnaryOp::LogNot, arg: Box::new(done_var()) },
        ty: Type::bool(),
        loc: Loc::default(),
    }
}

fn stmts_may_return(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Return { .. } => true,
        Stmt::If { then_branch, else_branch, .. } => {
            stmts_may_return(then_branch) || stmts_may_return(else_branch)
        }
        Stmt::While { body, .. } => stmts_may_return(body),
        _ => false,
    })
}

/// Rewrite a statement list so control after any `return` is dead.
fn seq(stmts: Vec<Stmt>) -> Vec<Stmt> {
    let mut out = Vec::new();
    let mut iter = stmts.into_iter().peekable();
    while let Some(s) = iter.next() {
        let may_ret = stmts_may_return(std::slice::from_ref(&s));
        out.extend(transform(s));
        if may_ret && iter.peek().is_some() {
            let rest: Vec<Stmt> = seq(iter.collect());
            out.push(Stmt::If {
                cond: not_done(),
                then_branch: rest,
                else_branch: vec![],
                loc: Loc::default(),
            });
            break;
        }
    }
    out
}

fn transform(s: Stmt) -> Vec<Stmt> {
    match s {
        Stmt::Return { expr, loc } => {
            let mut out = Vec::new();
            if let Some(e) = expr {
                out.push(Stmt::Assign { name: RET_VAR.into(), expr: e, loc });
            }
            out.push(Stmt::Assign { name: DONE_VAR.into(), expr: bool_const(true), loc });
            out
        }
        Stmt::If { cond, then_branch, else_branch, loc } => vec![Stmt::If {
            cond,
            then_branch: seq(then_branch),
            else_branch: seq(else_branch),
            loc,
        }],
        Stmt::While { cond, body, loc } => {
            if stmts_may_return(&body) {
                let cond = Expr {
                    kind: ExprKind::Binary {
                        op: BinaryOp::LogAnd,
                        lhs: Box::new(not_done()),
                        rhs: Box::new(cond),
                    },
                    ty: Type::bool(),
                    loc,
                };
                vec![Stmt::While { cond, body: seq(body), loc }]
            } else {
                vec![Stmt::While { cond, body: seq(body), loc }]
            }
        }
        other => vec![other],
    }
}

/// Replace `while (c)` where `c` contains `nondet()` by a loop over a fresh
/// Boolean recomputed at the end of each iteration.
fn hoist_loop_conds(s: Stmt, counter: &mut u32, out: &mut Vec<Stmt>) {
    match s {
        Stmt::While { cond, body, loc } => {
            let mut new_body = Vec::new();
            for b in body {
                hoist_loop_conds(b, counter, &mut new_body);
            }
            if cond.contains_call_or_nondet() {
                let name = format!("$lc{counter}");
                *counter += 1;
                out.push(Stmt::Decl {
                    name: name.clone(),
                    ty: Type::bool(),
                    init: Some(cond.clone()),
                    loc,
                });
                new_body.push(Stmt::Assign { name: name.clone(), expr: cond, loc });
                let cv = Expr { kind: ExprKind::Var(name), ty: Type::bool(), loc };
                out.push(Stmt::While { cond: cv, body: new_body, loc });
            } else {
                out.push(Stmt::While { cond, body: new_body, loc });
            }
        }
        Stmt::If { cond, then_branch, else_branch, loc } => {
            let mut tb = Vec::new();
            for b in then_branch {
                hoist_loop_conds(b, counter, &mut tb);
            }
            let mut eb = Vec::new();
            for b in else_branch {
                hoist_loop_conds(b, counter, &mut eb);
            }
            out.push(Stmt::If { cond, then_branch: tb, else_branch: eb, loc });
        }
        other => out.push(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse;

    fn norm(src: &str) -> Program {
        normalize(&parse("t.mc", src, TypeWidths::default()).unwrap())
    }

    fn has_return(stmts: &[Stmt]) -> bool {
        stmts_may_return(stmts)
    }

    #[test]
    fn no_returns_left_and_single_exit() {
        let p = norm("
            int f(int x) {
                if (x > 0) return 1;
                while (x < 10) { x++; if (x == 5) return 5; }
                return 0;
            }
        ");
        let f = p.procedure("f").unwrap();
        assert!(!has_return(&f.body));
        // $ret and $done are declared up front.
        assert!(matches!(&f.body[0], Stmt::Decl { name, .. } if name == RET_VAR));
        assert!(matches!(&f.body[1], Stmt::Decl { name, .. } if name == DONE_VAR));
    }

    #[test]
    fn loop_after_return_is_guarded() {
        let p = norm("
            int f(int x) {
                if (x > 0) return 1;
                while (x < 10) x++;
                return 0;
            }
        ");
        let f = p.procedure("f").unwrap();
        // After the if containing the return, the rest sits under !$done.
        let guard = f.body.iter().find_map(|s| match s {
            Stmt::If { cond, then_branch, .. }
                if matches!(&cond.kind, ExprKind::Unary { op: UnaryOp::LogNot, .. }) =>
            {
                Some(then_branch)
            }
            _ => None,
        });
        let inner = guard.expect("guarded continuation");
        assert!(inner.iter().any(|s| matches!(s, Stmt::While { .. })));
    }

    #[test]
    fn nondet_loop_condition_hoisted() {
        let p = norm("void f() { int x; while (nondet()) { x = 1; } }");
        let f = p.procedure("f").unwrap();
        let w = f.body.iter().find_map(|s| match s {
            Stmt::While { cond, body, .. } => Some((cond, body)),
            _ => None,
        });
        let (cond, body) = w.unwrap();
        assert!(matches!(&cond.kind, ExprKind::Var(n) if n.starts_with("$lc")));
        assert!(matches!(body.last(), Some(Stmt::Assign { name, .. }) if name.starts_with("$lc")));
    }

    #[test]
    fn global_initializers_run_in_entry() {
        let p = norm("int g = 3; void main() { g = g; }");
        let m = p.procedure("main").unwrap();
        assert!(
            matches!(&m.body[0], Stmt::Assign { name, expr, .. }
                if name == "g" && matches!(expr.kind, ExprKind::Num(3)))
        );
    }

    #[test]
    fn plain_body_unchanged_shape() {
        let p = norm("void foo2(unsigned x) { while (x >= 10) { x++; } }");
        let f = p.procedure("foo2").unwrap();
        assert_eq!(f.body.len(), 1);
        assert!(matches!(&f.body[0], Stmt::While { .. }));
    }
}
