//! Call graph construction and reverse-topological ordering.

use std::collections::{HashMap, HashSet};

use super::ast::{Expr, ExprKind, Program, Stmt};

#[derive(Debug, Clone)]
pub struct CallGraphError {
    /// Procedure where the cycle was entered.
    pub at: String,
    pub msg: String,
}

/// Callees of one procedure body, in program order, with duplicates.
pub fn callees(body: &[Stmt]) -> Vec<String> {
    let mut out = Vec::new();
    fn walk_expr(e: &Expr, out: &mut Vec<String>) {
        match &e.kind {
            ExprKind::Call { name, args } => {
                out.push(name.clone());
                for a in args {
                    walk_expr(a, out);
                }
            }
            ExprKind::Unary { arg, .. } | ExprKind::Cast { arg } => walk_expr(arg, out),
            ExprKind::Binary { lhs, rhs, .. } => {
                walk_expr(lhs, out);
                walk_expr(rhs, out);
            }
            ExprKind::Ternary { cond, then_val, else_val } => {
                walk_expr(cond, out);
                walk_expr(then_val, out);
                walk_expr(else_val, out);
            }
            ExprKind::Num(_) | ExprKind::Var(_) | ExprKind::Nondet => {}
        }
    }
    fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
        for s in stmts {
            match s {
                Stmt::Decl { init: Some(e), .. }
                | Stmt::Assign { expr: e, .. }
                | Stmt::Return { expr: Some(e), .. }
                | Stmt::Assume { cond: e, .. }
                | Stmt::Assert { cond: e, .. }
                | Stmt::CallStmt { call: e, .. } => walk_expr(e, out),
                Stmt::Decl { init: None, .. } | Stmt::Return { expr: None, .. } => {}
                Stmt::If { cond, then_branch, else_branch, .. } => {
                    walk_expr(cond, out);
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                Stmt::While { cond, body, .. } => {
                    walk_expr(cond, out);
                    walk(body, out);
                }
            }
        }
    }
    walk(body, &mut out);
    out
}

/// Order procedures so that every callee precedes its callers. Rejects
/// recursion (including mutual) with the offending cycle in the message.
pub fn build_call_graph(p: &Program) -> Result<Vec<String>, CallGraphError> {
    let index: HashMap<&str, usize> =
        p.procedures.iter().enumerate().map(|(i, pr)| (pr.name.as_str(), i)).collect();
    let edges: Vec<Vec<usize>> = p
        .procedures
        .iter()
        .map(|pr| {
            let mut cs: Vec<usize> =
                callees(&pr.body).iter().filter_map(|c| index.get(c.as_str()).copied()).collect();
            cs.dedup();
            cs
        })
        .collect();

    let mut order: Vec<String> = Vec::new();
    let mut done: HashSet<usize> = HashSet::new();
    let mut path: Vec<usize> = Vec::new();
    // Iterative DFS; a node on the current path reached again is a cycle.
    for root in 0..p.procedures.len() {
        if done.contains(&root) {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        path.push(root);
        while let Some(&mut (n, ref mut next)) = stack.last_mut() {
            if *next < edges[n].len() {
                let c = edges[n][*next];
                *next += 1;
                if done.contains(&c) {
                    continue;
                }
                if let Some(start) = path.iter().position(|&x| x == c) {
                    let cycle: Vec<&str> = path[start..]
                        .iter()
                        .chain([&c])
                        .map(|&i| p.procedures[i].name.as_str())
                        .collect();
                    return Err(CallGraphError {
                        at: p.procedures[c].name.clone(),
                        msg: format!("recursion is not supported: {}", cycle.join(" -> ")),
                    });
                }
                path.push(c);
                stack.push((c, 0));
            } else {
                stack.pop();
                path.pop();
                done.insert(n);
                order.push(p.procedures[n].name.clone());
            }
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::TypeWidths;
    use crate::frontend::parser::parse;

    #[test]
    fn callees_precede_callers() {
        let src = "
            int f(int z) { int w; w = h(z); return w; }
            int h(int y) { return y; }
        ";
        let p = parse("t.mc", src, TypeWidths::default()).unwrap();
        assert_eq!(build_call_graph(&p).unwrap(), vec!["h".to_string(), "f".to_string()]);
    }

    #[test]
    fn single_procedure() {
        let p = parse("t.mc", "void f() {}", TypeWidths::default()).unwrap();
        assert_eq!(build_call_graph(&p).unwrap(), vec!["f".to_string()]);
    }

    #[test]
    fn diamond_orders_shared_callee_first() {
        let src = "
            int k(int a) { return a; }
            int g(int a) { int r; r = k(a); return r; }
            int h(int a) { int r; r = k(a); return r; }
            int f(int a) { int r; r = g(a); r = h(r); return r; }
        ";
        let p = parse("t.mc", src, TypeWidths::default()).unwrap();
        let order = build_call_graph(&p).unwrap();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        assert!(pos("k") < pos("g") && pos("k") < pos("h"));
        assert!(pos("g") < pos("f") && pos("h") < pos("f"));
    }

    #[test]
    fn direct_recursion_rejected() {
        let err = parse("t.mc", "void f() { f(); }", TypeWidths::default()).unwrap_err();
        assert!(err.msg.contains("recursion"), "{err}");
    }

    #[test]
    fn mutual_recursion_rejected() {
        let src = "
            void f() { g(); }
            void g() { f(); }
        ";
        let err = parse("t.mc", src, TypeWidths::default()).unwrap_err();
        assert!(err.msg.contains("recursion"), "{err}");
    }
}
