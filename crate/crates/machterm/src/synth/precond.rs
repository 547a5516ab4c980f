//! Conditional termination: bootstrap a sufficient precondition by
//! analysing one candidate input at a time and generalising each success
//! backwards.

use std::collections::HashMap;

use crate::logic::{SatResult, Term};
use crate::ssa::ProcedureTS;

use super::backward::comp_nec_precond;
use super::forward::infer_invariant;
use super::ranking::{comp_term_arg, ranking_bad, LexRanking};
use super::templates::inv_template_for;
use super::SynthCtx;

pub struct PrecondTermResult {
    /// Sufficient termination precondition over the frozen input copies.
    pub precond: Term,
    /// The last complete ranking witness, if any iteration succeeded.
    pub ranking: Option<LexRanking>,
}

/// Rename a formula over the input copies to one over the formal inputs.
pub fn copies_to_formals(ts: &ProcedureTS, t: &Term) -> Term {
    let map: HashMap<String, Term> = ts
        .input_copies
        .iter()
        .map(|(i, c)| (c.name.to_string(), Term::var_ref(i.clone())))
        .collect();
    t.substitute(&map)
}

/// Under-approximate the terminating inputs of `ts`.
///
/// Each round picks a not-yet-covered input vector, infers an invariant
/// specific to it, and synthesises a ranking under that invariant. On
/// success the witness is generalised: a backward analysis under the
/// *global* invariant over-approximates the inputs (within the uncovered
/// region) that could still reach a ranking-violating step or a call with
/// an unmet callee precondition (`site_bad`); everything else joins the
/// precondition. Candidates that fail or yield no new coverage are only
/// excluded from candidate selection, never from the soundness reasoning.
pub fn comp_precond_term(
    ts: &ProcedureTS,
    extra: &Term,
    site_bad: &Term,
    ctx: &SynthCtx,
) -> PrecondTermResult {
    let inv_t = inv_template_for(ts, &ctx.bounds);
    let inv_global = infer_invariant(ts, &inv_t, extra, ctx);
    let mut precond = Term::ff();
    let mut blocked: Vec<Term> = Vec::new();
    let mut ranking = None;

    for _ in 0..ctx.bounds.max_iter {
        if ctx.out_of_time() {
            break;
        }
        // An input not yet covered and not yet blocked.
        let mut s = ctx.session();
        s.assert_term(&Term::and_all(
            [
                ts.init.clone(),
                ts.assumptions.clone(),
                extra.clone(),
                Term::not(precond.clone()),
            ]
            .into_iter()
            .chain(blocked.iter().cloned()),
        ));
        match s.check(&[]) {
            SatResult::Unsat => break,
            SatResult::Unknown => break,
            SatResult::Sat => {}
        }
        let copies: Vec<_> = ts.input_copies.iter().map(|(_, c)| c.clone()).collect();
        let nu = s.model_valuation(&copies);
        let nu_term = Term::and_all(
            copies
                .iter()
                .map(|c| Term::eq(Term::var_ref(c.clone()), Term::constant(nu[c.name.as_ref()]))),
        );

        // Prove termination for exactly this input.
        let local_extra = Term::and(extra.clone(), nu_term.clone());
        let inv_nu = infer_invariant(ts, &inv_t, &local_extra, ctx);
        let lr = comp_term_arg(
            ts,
            &Term::and(inv_t.concretize(&inv_nu), local_extra.clone()),
            ctx,
        );
        if !lr.is_complete() {
            blocked.push(Term::not(nu_term));
            continue;
        }

        // Generalise under the global invariant, restricted to the
        // still-uncovered region.
        let bad = Term::or(ranking_bad(ts, &lr, ctx.bounds.width_extension), site_bad.clone());
        let region = Term::not(precond.clone());
        let pre = comp_nec_precond(ts, &inv_t, &inv_global, extra, &bad, &region, ctx);
        let progress = !pre.evaluate(&nu).map(|b| b.is_true()).unwrap_or(true);
        precond = Term::or(precond, Term::not(pre));
        ranking = Some(lr);
        if !progress {
            blocked.push(Term::not(nu_term));
        }
    }

    PrecondTermResult { precond, ranking }
}
