//! Backward inference: over-approximation of the inputs that can reach a
//! bad transition, and the (deliberately coarse) under-approximating
//! calling contexts.

use crate::absdom::{AbstractValue, Template};
use crate::logic::{SatResult, Term};
use crate::ssa::{CallSite, Place, ProcedureTS};

use super::templates::{inv_template_for, precond_template};
use super::tighten::{tighten, Flow};
use super::SynthCtx;

/// Inputs from which a bad transition may be reachable.
///
/// `bad` is a formula over the current and primed state (e.g. a
/// ranking-violating step, or a call whose precondition may fail);
/// `region` restricts attention to executions whose frozen input copies
/// satisfy it. The result over-approximates the bad inputs within the
/// region as a formula over the input copies, so its negation (within the
/// region) is a sound termination precondition.
///
/// The fixpoint runs under the procedure's global invariant — using an
/// input-specific invariant here would be unsound.
pub fn comp_nec_precond(
    ts: &ProcedureTS,
    inv_t: &Template,
    inv: &AbstractValue,
    extra: &Term,
    bad: &Term,
    region: &Term,
    ctx: &SynthCtx,
) -> Term {
    let inv_f = inv_t.concretize(inv);
    let frame = Term::and_all([
        inv_f,
        ts.trans.clone(),
        ts.assumptions.clone(),
        extra.clone(),
        region.clone(),
    ]);
    let b_t = inv_template_for(ts, &ctx.bounds);
    let seed = Flow::seed(Term::and(frame.clone(), bad.clone()));
    // A state that can still reach a bad transition must take another
    // step, so the pre-image may insist the successor has one enabled.
    // Without this, post-exit states (where every row guard is false) sit
    // vacuously inside the cover and their predecessors flood it.
    //
    // Entry steps are excluded from the pre-image: the state before one
    // has arbitrary junk at the loop heads, and every state after one is
    // also an initial state (the entry step replays the same body from
    // the same frozen copies), so the projection below recovers them.
    let prime = ts.prime_map();
    let stepable = Term::or_all(ts.loops.iter().map(|l| {
        Term::and(Term::var_ref(l.guard.1.clone()), l.cond.substitute(&prime))
    }));
    let no_entry = Term::not(Term::var_ref(ts.entry_select.clone()));
    let step = Flow::backward(Term::and_all([frame, stepable, no_entry]), prime);
    let b = tighten(&b_t, &[seed, step], ctx);

    // Project the cover onto the inputs through the initial states.
    let p_t = precond_template(ts);
    let at_entry = Flow::seed(Term::and_all([
        ts.init.clone(),
        ts.assumptions.clone(),
        extra.clone(),
        region.clone(),
        b_t.concretize(&b),
    ]));
    let p = tighten(&p_t, &[at_entry], ctx);
    p_t.concretize(&p)
}

/// Under-approximating calling context of a site: `false` when no
/// occurrence of the site is reachable, `true` otherwise. Always sound;
/// refining it would only buy precision.
pub fn comp_callctx_u(
    ts: &ProcedureTS,
    inv_t: &Template,
    inv: &AbstractValue,
    extra: &Term,
    site: &CallSite,
    ctx: &SynthCtx,
) -> Term {
    let mut s = ctx.session();
    for inst in &site.instances {
        let base = match inst.place {
            Place::Init => ts.init.clone(),
            Place::Trans => Term::and(inv_t.concretize(inv), ts.trans.clone()),
        };
        let q = Term::and_all([
            base,
            ts.assumptions.clone(),
            extra.clone(),
            inst.guard.clone(),
        ]);
        let act = s.activation();
        s.assert_under(act, &q);
        if !matches!(s.check(&[act]), SatResult::Unsat) {
            return Term::tt();
        }
    }
    Term::ff()
}
