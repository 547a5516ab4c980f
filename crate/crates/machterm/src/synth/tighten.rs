//! Model-guided bound tightening: the one inference engine behind
//! invariants, summaries, calling contexts and backward preconditions.
//!
//! Given a template and a set of inclusion "flows", find a small abstract
//! value `d` making every flow valid:
//!
//!   premise (∧ T(d) if the flow is inductive)  ⟹  T(d)[subst]
//!
//! Starting from bottom, while some flow's negation is satisfiable, the
//! model tells which rows are violated and by how much; bounds are raised
//! to the model value and then probed upward (exponential then binary) to
//! the row's supremum under the current premise, which skips the
//! one-model-per-step crawl. Rows raised too often are widened to top, so
//! the loop terminates. The exit condition — every flow's negation
//! unsatisfiable — is exactly the soundness check of the result.

use std::collections::HashMap;

use crate::absdom::{AbstractValue, Bound, Template};
use crate::logic::{BinOp, SatResult, SolverSession, Term, VarRef};

use super::SynthCtx;

pub struct Flow {
    pub premise: Term,
    /// Conjoin the current concretization to the premise (fixpoint step).
    pub include_current: bool,
    /// Renaming applied to the premise-side concretization; priming it here
    /// turns the flow into a pre-image step.
    pub current_subst: HashMap<String, Term>,
    /// Renaming applied to the conclusion (e.g. priming); empty = identity.
    pub subst: HashMap<String, Term>,
}

impl Flow {
    pub fn seed(premise: Term) -> Flow {
        Flow {
            premise,
            include_current: false,
            current_subst: HashMap::new(),
            subst: HashMap::new(),
        }
    }

    /// Post-image step: premise ∧ T(d) ⟹ T(d)[prime].
    pub fn inductive(premise: Term, prime: HashMap<String, Term>) -> Flow {
        Flow { premise, include_current: true, current_subst: HashMap::new(), subst: prime }
    }

    /// Pre-image step: premise ∧ T(d)[prime] ⟹ T(d).
    pub fn backward(premise: Term, prime: HashMap<String, Term>) -> Flow {
        Flow { premise, include_current: true, current_subst: prime, subst: HashMap::new() }
    }
}

fn min_val(t: &Template) -> i64 {
    -(1i64 << (t.ext_width - 1))
}

fn max_val(t: &Template) -> i64 {
    (1i64 << (t.ext_width - 1)) - 1
}

pub fn tighten(t: &Template, flows: &[Flow], ctx: &SynthCtx) -> AbstractValue {
    let nrows = t.rows.len();
    let mut s = ctx.session();
    let flow_acts: Vec<_> = flows
        .iter()
        .map(|f| {
            let a = s.activation();
            s.assert_under(a, &f.premise);
            a
        })
        .collect();
    // Substituted row expressions and guards, with their variables, per flow.
    let views: Vec<Vec<(Term, Term)>> = flows
        .iter()
        .map(|f| {
            (0..nrows)
                .map(|r| {
                    (t.rows[r].guard.substitute(&f.subst), t.row_expr(r).substitute(&f.subst))
                })
                .collect()
        })
        .collect();
    let model_vars: Vec<Vec<VarRef>> = views
        .iter()
        .map(|rows| {
            let mut vs: Vec<VarRef> = Vec::new();
            for (g, e) in rows {
                for v in g.free_vars().into_iter().chain(e.free_vars()) {
                    if !vs.contains(&v) {
                        vs.push(v);
                    }
                }
            }
            vs
        })
        .collect();

    let mut d = AbstractValue::Bottom;
    let mut raises = vec![0u32; nrows];
    // Progress: every satisfiable round raises at least one row, and each
    // row can rise at most max_tighten times before widening to top.
    let cap = nrows as u32 * (ctx.bounds.max_tighten + 2) + flows.len() as u32 + 8;
    for _ in 0..cap {
        let mut any_sat = false;
        for (fi, f) in flows.iter().enumerate() {
            let cur_act = s.activation();
            if f.include_current {
                if d.is_bottom() {
                    continue; // premise ∧ false is vacuously fine
                }
                s.assert_under(cur_act, &t.concretize(&d).substitute(&f.current_subst));
            }
            let neg_act = s.activation();
            let concl = t.concretize(&d).substitute(&f.subst);
            s.assert_under(neg_act, &Term::not(concl));
            match s.check(&[flow_acts[fi], cur_act, neg_act]) {
                SatResult::Unsat => continue,
                SatResult::Unknown => return AbstractValue::top(nrows),
                SatResult::Sat => {}
            }
            any_sat = true;
            let sigma = s.model_valuation(&model_vars[fi]);
            let mut bounds = match &d {
                AbstractValue::Bottom => vec![None; nrows],
                AbstractValue::Rows(b) => b.iter().map(|x| Some(*x)).collect(),
            };
            for r in 0..nrows {
                let (g, e) = &views[fi][r];
                if matches!(bounds[r], Some(Bound::Top)) {
                    continue;
                }
                let guard_holds = g.evaluate(&sigma).map(|b| b.is_true()).unwrap_or(false);
                if !guard_holds {
                    if bounds[r].is_none() {
                        bounds[r] = Some(Bound::Finite(min_val(t)));
                    }
                    continue;
                }
                let v = e.evaluate(&sigma).map(|b| b.to_i64()).unwrap_or_else(|_| max_val(t));
                let cur = match bounds[r] {
                    None => i64::MIN,
                    Some(Bound::Finite(c)) => c,
                    Some(Bound::Top) => unreachable!(),
                };
                if v > cur || bounds[r].is_none() {
                    raises[r] += 1;
                    if raises[r] > ctx.bounds.max_tighten {
                        bounds[r] = Some(Bound::Top);
                        continue;
                    }
                    let probed = probe_sup(
                        &mut s,
                        t,
                        &[flow_acts[fi], cur_act],
                        g,
                        e,
                        v.max(cur.saturating_add(1).min(v)),
                    );
                    bounds[r] = Some(match probed {
                        Some(p) => Bound::Finite(p),
                        None => Bound::Top,
                    });
                }
            }
            d = AbstractValue::Rows(bounds.into_iter().map(|b| b.unwrap()).collect());
        }
        if !any_sat {
            return d;
        }
        if ctx.out_of_time() {
            return AbstractValue::top(nrows);
        }
    }
    AbstractValue::top(nrows)
}

/// Largest attainable value of `expr` under the flow premise and guard,
/// starting from the known-attainable `lo`. Returns None when the row is
/// unbounded up to the extended range.
fn probe_sup(
    s: &mut SolverSession,
    t: &Template,
    acts: &[crate::logic::Lit],
    guard: &Term,
    expr: &Term,
    lo0: i64,
) -> Option<i64> {
    let maxv = max_val(t);
    let mut lo = lo0.min(maxv);
    let mut step: i64 = 1;
    let attempt = |s: &mut SolverSession, c: i64| -> Option<bool> {
        let a = s.activation();
        let q = Term::and(
            guard.clone(),
            Term::binary(BinOp::Sle, Term::iconst(t.ext_width, c), expr.clone()),
        );
        s.assert_under(a, &q);
        let mut assume = acts.to_vec();
        assume.push(a);
        match s.check(&assume) {
            SatResult::Sat => Some(true),
            SatResult::Unsat => Some(false),
            SatResult::Unknown => None,
        }
    };
    // Exponential ascent.
    loop {
        if lo >= maxv {
            return Some(maxv);
        }
        let c = lo.saturating_add(step).min(maxv);
        match attempt(s, c) {
            Some(true) => {
                lo = c;
                if c == maxv {
                    return Some(maxv);
                }
                step = step.saturating_mul(2);
            }
            Some(false) => {
                if step == 1 {
                    return Some(lo);
                }
                // Binary descent in (lo, c).
                let mut hi = c; // first unattainable as a ≥-threshold
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    match attempt(s, mid) {
                        Some(true) => lo = mid,
                        Some(false) => hi = mid,
                        None => return Some(lo),
                    }
                }
                return Some(lo);
            }
            None => return Some(lo),
        }
    }
}
