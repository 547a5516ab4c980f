//! Source printer. Re-parsing printed output reproduces the same AST, which
//! the round-trip tests rely on; output is fully parenthesized rather than
//! pretty in the precedence-aware sense.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut s = String::new();
    for g in &p.globals {
        match g.init {
            Some(v) => {
                let _ = writeln!(s, "{} {} = {};", type_name(g.ty), g.name, v);
            }
            None => {
                let _ = writeln!(s, "{} {};", type_name(g.ty), g.name);
            }
        }
    }
    for (i, proc) in p.procedures.iter().enumerate() {
        if i > 0 || !p.globals.is_empty() {
            s.push('\n');
        }
        print_proc(&mut s, proc);
    }
    s
}

pub fn type_name(t: Type) -> &'static str {
    match (t.sign, t.base) {
        (_, Base::Bool) => "int", // internal only; never printed from parsed code
        (crate::logic::Sign::Signed, Base::Int) => "int",
        (crate::logic::Sign::Unsigned, Base::Int) => "unsigned",
        (crate::logic::Sign::Signed, Base::Char) => "char",
        (crate::logic::Sign::Unsigned, Base::Char) => "unsigned char",
    }
}

fn print_proc(s: &mut String, p: &ProcedureAST) {
    let ret = match p.ret {
        Some(t) => type_name(t),
        None => "void",
    };
    let params: Vec<String> =
        p.params.iter().map(|(n, t)| format!("{} {}", type_name(*t), n)).collect();
    let _ = writeln!(s, "{} {}({}) {{", ret, p.name, params.join(", "));
    for st in &p.body {
        print_stmt(s, st, 1);
    }
    s.push_str("}\n");
}

fn indent(s: &mut String, level: usize) {
    for _ in 0..level {
        s.push_str("    ");
    }
}

fn print_stmt(s: &mut String, st: &Stmt, level: usize) {
    indent(s, level);
    match st {
        Stmt::Decl { name, ty, init, .. } => match init {
            Some(e) => {
                let _ = writeln!(s, "{} {} = {};", type_name(*ty), name, expr(e));
            }
            None => {
                let _ = writeln!(s, "{} {};", type_name(*ty), name);
            }
        },
        Stmt::Assign { name, expr: e, .. } => {
            let _ = writeln!(s, "{} = {};", name, expr(e));
        }
        Stmt::If { cond, then_branch, else_branch, .. } => {
            let _ = writeln!(s, "if ({}) {{", expr(cond));
            for st in then_branch {
                print_stmt(s, st, level + 1);
            }
            indent(s, level);
            if else_branch.is_empty() {
                s.push_str("}\n");
            } else {
                s.push_str("} else {\n");
                for st in else_branch {
                    print_stmt(s, st, level + 1);
                }
                indent(s, level);
                s.push_str("}\n");
            }
        }
        Stmt::While { cond, body, .. } => {
            let _ = writeln!(s, "while ({}) {{", expr(cond));
            for st in body {
                print_stmt(s, st, level + 1);
            }
            indent(s, level);
            s.push_str("}\n");
        }
        Stmt::Return { expr: e, .. } => match e {
            Some(e) => {
                let _ = writeln!(s, "return {};", expr(e));
            }
            None => {
                let _ = writeln!(s, "return;");
            }
        },
        Stmt::Assume { cond, .. } => {
            let _ = writeln!(s, "assume({});", expr(cond));
        }
        Stmt::Assert { cond, .. } => {
            let _ = writeln!(s, "assert({});", expr(cond));
        }
        Stmt::CallStmt { call, .. } => {
            let _ = writeln!(s, "{};", expr(call));
        }
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Num(n) => n.to_string(),
        ExprKind::Var(n) => n.clone(),
        ExprKind::Nondet => "nondet()".to_string(),
        ExprKind::Call { name, args } => {
            let a: Vec<String> = args.iter().map(expr).collect();
            format!("{}({})", name, a.join(", "))
        }
        ExprKind::Unary { op, arg } => {
            let o = match op {
                UnaryOp::Neg => "-",
                UnaryOp::BitNot => "~",
                UnaryOp::LogNot => "!",
            };
            format!("{}({})", o, expr(arg))
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let o = match op {
                BinaryOp::Add => "+",
                BinaryOp::Sub => "-",
                BinaryOp::Mul => "*",
                BinaryOp::Shl => "<<",
                BinaryOp::Shr => ">>",
                BinaryOp::Lt => "<",
                BinaryOp::Le => "<=",
                BinaryOp::Gt => ">",
                BinaryOp::Ge => ">=",
                BinaryOp::Eq => "==",
                BinaryOp::Ne => "!=",
                BinaryOp::BitAnd => "&",
                BinaryOp::BitXor => "^",
                BinaryOp::BitOr => "|",
                BinaryOp::LogAnd => "&&",
                BinaryOp::LogOr => "||",
            };
            format!("({}) {} ({})", expr(lhs), o, expr(rhs))
        }
        ExprKind::Ternary { cond, then_val, else_val } => {
            format!("({}) ? ({}) : ({})", expr(cond), expr(then_val), expr(else_val))
        }
        ExprKind::Cast { arg } => format!("({})({})", type_name(e.ty), expr(arg)),
    }
}
