//! Default templates derived from a procedure's transition system.

use crate::absdom::{Template, TemplateKind, TemplateRow};
use crate::logic::{Term, VarRef};
use crate::ssa::ProcedureTS;

/// Cap on the variable vector so row counts stay manageable.
const MAX_TEMPLATE_VARS: usize = 32;
/// Pair rows are only generated for loops with at most this many numeric
/// head variables.
const MAX_PAIR_VARS: usize = 6;

/// Invariant template over the state vector: interval rows on the frozen
/// input copies and on the guard bits, loop-condition-guarded interval and
/// pair rows on the loop-head variables, and exit-guarded interval rows on
/// the output snapshots.
///
/// The pair rows (±x±y over heads of the same loop) are what lets the
/// domain rule out states where a machine addition inside the loop would
/// have wrapped, which interval reasoning alone cannot see.
pub fn inv_template(ts: &ProcedureTS) -> Template {
    build_inv_template(ts, None)
}

/// Invariant template extended with sidecar matrix rows, when configured.
/// Each matrix row is instantiated once per loop, over that loop's numeric
/// head variables in declaration order, under the same guard as the
/// built-in loop-head rows; rows whose arity does not match a loop are
/// skipped for it.
pub fn inv_template_for(ts: &ProcedureTS, bounds: &super::SynthesisBounds) -> Template {
    build_inv_template(ts, bounds.inv_matrix.as_deref())
}

fn build_inv_template(ts: &ProcedureTS, matrix: Option<&str>) -> Template {
    let mut entries: Vec<(Term, VarRef)> = Vec::new();
    for (_, c) in &ts.input_copies {
        entries.push((Term::tt(), c.clone()));
    }
    entries.push((Term::tt(), ts.entry_guard.0.clone()));
    for l in &ts.loops {
        entries.push((Term::tt(), l.guard.0.clone()));
    }
    entries.push((Term::tt(), ts.exit_guard.0.clone()));
    // Loop heads, guarded by "head reachable and about to iterate".
    let mut loop_guards = Vec::new();
    for l in &ts.loops {
        let g = Term::and(Term::var_ref(l.guard.0.clone()), l.cond.clone());
        loop_guards.push(g.clone());
        for (c, _) in &l.head {
            entries.push((g.clone(), c.clone()));
        }
    }
    let gx = Term::var_ref(ts.exit_guard.0.clone());
    for (_, snap) in &ts.out_snapshot {
        entries.push((gx.clone(), snap.clone()));
    }
    entries.truncate(MAX_TEMPLATE_VARS);

    let vars: Vec<VarRef> = entries.iter().map(|(_, v)| v.clone()).collect();
    let n = vars.len();
    let mut rows = Vec::new();
    for (i, (g, _)) in entries.iter().enumerate() {
        for sgn in [1i64, -1] {
            let mut coeffs = vec![0i64; n];
            coeffs[i] = sgn;
            rows.push(TemplateRow { guard: g.clone(), coeffs });
        }
    }
    let extra_rows: Vec<Vec<i64>> = matrix
        .map(|text| {
            text.lines()
                .map(|l| l.split('#').next().unwrap().trim())
                .filter(|l| !l.is_empty())
                .filter_map(|l| {
                    l.split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<i64>())
                        .collect::<Result<Vec<i64>, _>>()
                        .ok()
                })
                .collect()
        })
        .unwrap_or_default();
    for (l, g) in ts.loops.iter().zip(&loop_guards) {
        let nums: Vec<usize> = l
            .head
            .iter()
            .filter(|(c, _)| c.width > 1)
            .filter_map(|(c, _)| vars.iter().position(|v| v.name == c.name))
            .collect();
        for row in extra_rows.iter().filter(|r| r.len() == nums.len()) {
            let mut coeffs = vec![0i64; n];
            for (&i, &c) in nums.iter().zip(row) {
                coeffs[i] = c;
            }
            rows.push(TemplateRow { guard: g.clone(), coeffs });
        }
        if nums.len() > MAX_PAIR_VARS {
            continue;
        }
        for (k, &a) in nums.iter().enumerate() {
            for &b in &nums[k + 1..] {
                for (sa, sb) in [(1i64, 1i64), (-1, -1), (1, -1), (-1, 1)] {
                    let mut coeffs = vec![0i64; n];
                    coeffs[a] = sa;
                    coeffs[b] = sb;
                    rows.push(TemplateRow { guard: g.clone(), coeffs });
                }
            }
        }
    }
    Template::new(TemplateKind::LoopHead, vars, rows)
}

/// Summary template: interval rows over the frozen input copies and the
/// output variables.
pub fn io_template(ts: &ProcedureTS) -> Template {
    let mut vars: Vec<(Term, VarRef)> =
        ts.input_copies.iter().map(|(_, c)| (Term::tt(), c.clone())).collect();
    vars.extend(ts.outputs.iter().map(|o| (Term::tt(), o.clone())));
    vars.truncate(MAX_TEMPLATE_VARS);
    Template::intervals(TemplateKind::Io, vars)
}

/// Precondition template: interval rows over the frozen input copies only.
pub fn precond_template(ts: &ProcedureTS) -> Template {
    let vars: Vec<(Term, VarRef)> =
        ts.input_copies.iter().map(|(_, c)| (Term::tt(), c.clone())).collect();
    Template::intervals(TemplateKind::Io, vars)
}

/// Calling-context template over the callee's formal inputs and outputs.
pub fn callctx_template(callee: &ProcedureTS) -> Template {
    let mut vars: Vec<(Term, VarRef)> =
        callee.inputs.iter().map(|i| (Term::tt(), i.clone())).collect();
    vars.extend(callee.outputs.iter().map(|o| (Term::tt(), o.clone())));
    vars.truncate(MAX_TEMPLATE_VARS);
    Template::intervals(TemplateKind::Call, vars)
}
