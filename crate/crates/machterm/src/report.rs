//! Result reporting: JSON records with a published schema, a human
//! summary, and a printer that renders preconditions back into source
//! expression syntax so they can be re-parsed and checked by a solver.

use serde::{Deserialize, Serialize};

use crate::driver::Verdict;
use crate::logic::{BinOp, Sign, Term, TermKind, UnOp, VarRef};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub file: String,
    pub mode: String,
    pub status: String,
    /// Entry-procedure precondition in source expression syntax.
    pub precondition: String,
    pub procedures: Vec<ProcedureReport>,
    pub stats: Stats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcedureReport {
    pub name: String,
    pub status: String,
    /// One entry per loop: the lexicographic components, or `null` when no
    /// ranking was found for that loop.
    pub ranking: Vec<Option<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precondition: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stats {
    pub solver_calls: u64,
    pub wall_ms: u64,
}

pub fn report(file: &str, mode: &str, v: &Verdict) -> Report {
    Report {
        file: file.to_string(),
        mode: mode.to_string(),
        status: v.status.as_str().to_string(),
        precondition: render_condition(&v.precondition),
        procedures: v
            .procedures
            .iter()
            .map(|p| ProcedureReport {
                name: p.name.clone(),
                status: p.status.as_str().to_string(),
                ranking: p.ranking.clone(),
                precondition: p.precondition.as_ref().map(render_condition),
            })
            .collect(),
        stats: Stats { solver_calls: v.solver_calls, wall_ms: v.wall.as_millis() as u64 },
    }
}

pub fn human_summary(r: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}: {} ({})\n", r.file, r.status, r.mode));
    out.push_str(&format!("  precondition: {}\n", r.precondition));
    for p in &r.procedures {
        out.push_str(&format!("  {}: {}", p.name, p.status));
        if let Some(pre) = &p.precondition {
            out.push_str(&format!("  [precondition: {pre}]"));
        }
        out.push('\n');
        for (i, l) in p.ranking.iter().enumerate() {
            match l {
                Some(comps) => out.push_str(&format!(
                    "    loop {i} ranking: ({})\n",
                    comps.join(", ")
                )),
                None => out.push_str(&format!("    loop {i} ranking: none\n")),
            }
        }
    }
    out.push_str(&format!(
        "  {} solver calls, {} ms\n",
        r.stats.solver_calls, r.stats.wall_ms
    ));
    out
}

/// Value range of a source variable.
fn var_range(v: &VarRef) -> (i64, i64) {
    match v.sign {
        Sign::Unsigned => (0, ((1u64 << v.width) - 1) as i64),
        Sign::Signed => (-(1i64 << (v.width - 1)), (1i64 << (v.width - 1)) - 1),
    }
}

/// Render a Boolean term over source variables as a source-syntax
/// expression. Bound rows compare a widened copy of a variable against a
/// constant; those fold back to plain comparisons (or to a constant when
/// the bound covers, or excludes, the variable's whole range). Returns
/// `None` for shapes that have no source-syntax counterpart.
fn render(t: &Term) -> Option<String> {
    match t.kind() {
        TermKind::Const(v) if v.width() == 1 => {
            Some(if v.is_true() { "1".into() } else { "0".into() })
        }
        TermKind::Const(v) => Some(v.to_i64().to_string()),
        TermKind::Var(v) if v.width == 1 => Some(format!("{} != 0", v.name)),
        TermKind::Var(v) => Some(v.name.to_string()),
        TermKind::Unary(UnOp::Not, a) => Some(format!("!({})", render(a)?)),
        TermKind::Binary(op, a, b) => render_binary(*op, a, b),
        _ => None,
    }
}

fn render_binary(op: BinOp, a: &Term, b: &Term) -> Option<String> {
    if let Some(s) = fold_bound(op, a, b) {
        return Some(s);
    }
    let sym = match op {
        BinOp::And => "&&",
        BinOp::Or => "||",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Ult | BinOp::Slt => "<",
        BinOp::Ule | BinOp::Sle => "<=",
        _ => return None,
    };
    // Comparisons must be between source-width operands; the widened bound
    // rows were already handled above.
    if matches!(op, BinOp::Eq | BinOp::Ne | BinOp::Ult | BinOp::Slt | BinOp::Ule | BinOp::Sle) {
        source_operand(a)?;
    }
    Some(format!("({} {} {})", render(a)?, sym, render(b)?))
}

/// A variable or constant at its source width (no extension casts).
fn source_operand(t: &Term) -> Option<()> {
    match t.kind() {
        TermKind::Var(_) | TermKind::Const(_) => Some(()),
        _ => None,
    }
}

/// Fold a template bound row `±(widened)v <= c` into source syntax.
fn fold_bound(op: BinOp, a: &Term, b: &Term) -> Option<String> {
    if op != BinOp::Sle {
        return None;
    }
    let c = b.as_const()?.to_i64();
    let (v, negated) = match a.kind() {
        TermKind::Unary(UnOp::Neg, inner) => (cast_var(inner)?, true),
        _ => (cast_var(a)?, false),
    };
    let (lo, hi) = var_range(&v);
    if negated {
        // -v <= c, i.e. v >= -c.
        let bound = -c;
        if bound <= lo {
            return Some("1".into());
        }
        if bound > hi {
            return Some("0".into());
        }
        Some(format!("({} >= {})", v.name, bound))
    } else {
        if c >= hi {
            return Some("1".into());
        }
        if c < lo {
            return Some("0".into());
        }
        Some(format!("({} <= {})", v.name, c))
    }
}

/// The variable under a widening cast (or bare, when no widening was
/// needed).
fn cast_var(t: &Term) -> Option<VarRef> {
    match t.kind() {
        TermKind::Cast { arg, .. } => match arg.kind() {
            TermKind::Var(v) => Some(v.clone()),
            _ => None,
        },
        TermKind::Var(v) => Some(v.clone()),
        _ => None,
    }
}

/// Source-syntax rendering with a fail-safe: shapes the printer cannot
/// fold fall back to the internal formula text (still human-readable, not
/// guaranteed re-parseable).
pub fn render_condition(t: &Term) -> String {
    render(t).unwrap_or_else(|| t.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Term;

    fn uv(name: &str, w: u32) -> Term {
        Term::var(name, w, Sign::Unsigned)
    }

    #[test]
    fn constants_render_as_numerals() {
        assert_eq!(render_condition(&Term::tt()), "1");
        assert_eq!(render_condition(&Term::ff()), "0");
    }

    #[test]
    fn bound_rows_fold_to_source_comparisons() {
        // (widened) n <= 14 at width 4.
        let row = Term::binary(
            BinOp::Sle,
            Term::cast(uv("n", 4), 10, false),
            Term::iconst(10, 14),
        );
        assert_eq!(render_condition(&row), "(n <= 14)");
        // A bound covering the whole range is vacuous.
        let all = Term::binary(
            BinOp::Sle,
            Term::cast(uv("n", 4), 10, false),
            Term::iconst(10, 15),
        );
        assert_eq!(render_condition(&all), "1");
        // -n <= -1 means n >= 1.
        let neg = Term::binary(
            BinOp::Sle,
            Term::unary(UnOp::Neg, Term::cast(uv("n", 4), 10, false)),
            Term::iconst(10, -1),
        );
        assert_eq!(render_condition(&neg), "(n >= 1)");
    }

    #[test]
    fn connectives_render_in_expression_syntax() {
        let row = Term::binary(
            BinOp::Sle,
            Term::cast(uv("n", 4), 10, false),
            Term::iconst(10, 3),
        );
        let t = Term::or(Term::not(row.clone()), row);
        assert_eq!(render_condition(&t), "(!((n <= 3)) || (n <= 3))");
    }

    #[test]
    fn rendered_conditions_reparse_and_match() {
        use crate::frontend::{parse, TypeWidths};
        use crate::logic::{SatResult, SolverSession};
        // Wrap the rendered text in a tiny program, re-encode it, and check
        // the guard is equivalent to the original term.
        let row = Term::binary(
            BinOp::Sle,
            Term::unary(UnOp::Neg, Term::cast(uv("n", 4), 10, false)),
            Term::iconst(10, -1),
        );
        let text = render_condition(&row);
        let src = format!("void main(unsigned n) {{ if ({text}) {{ }} }}");
        let widths = TypeWidths { int_width: 4, char_width: 4 };
        assert!(parse("t.mc", &src, widths).is_ok(), "rendered text must re-parse: {text}");
        let mut s = SolverSession::new();
        let n = uv("n", 4);
        let differ = Term::binary(
            BinOp::Xor,
            row,
            Term::binary(BinOp::Ule, Term::uconst(4, 1), n),
        );
        s.assert_term(&differ);
        assert!(matches!(s.check(&[]), SatResult::Unsat));
    }
}
