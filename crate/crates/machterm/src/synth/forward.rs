//! Forward inference: loop invariants, input/output summaries, and
//! over-approximating calling contexts, all by bound tightening.

use std::collections::HashMap;

use crate::absdom::{AbstractValue, Template};
use crate::logic::Term;
use crate::ssa::{CallSite, Place, ProcedureTS, Summary};

use super::templates::{callctx_template, inv_template_for, io_template};
use super::tighten::{tighten, Flow};
use super::SynthCtx;

/// Inductive invariant of `ts` over the template, valid for every
/// execution satisfying `extra` (calling context, summaries, assumed
/// input constraints — all formulas over the state/instance symbols).
pub fn infer_invariant(
    ts: &ProcedureTS,
    t: &Template,
    extra: &Term,
    ctx: &SynthCtx,
) -> AbstractValue {
    let seed = Flow::seed(Term::and_all([
        ts.init.clone(),
        ts.assumptions.clone(),
        extra.clone(),
    ]));
    let step = Flow::inductive(
        Term::and_all([ts.trans.clone(), ts.assumptions.clone(), extra.clone()]),
        ts.prime_map(),
    );
    tighten(t, &[seed, step], ctx)
}

/// Invariant and input/output summary of one procedure under `extra`.
pub struct ForwardResult {
    pub inv_t: Template,
    pub inv: AbstractValue,
    pub sum_t: Template,
    pub sum: AbstractValue,
}

impl ForwardResult {
    pub fn inv_formula(&self) -> Term {
        self.inv_t.concretize(&self.inv)
    }

    /// The summary as a formula over the callee's formal inputs and
    /// outputs, ready for instantiation at call sites.
    pub fn summary(&self, ts: &ProcedureTS) -> Summary {
        let map: HashMap<String, Term> = ts
            .input_copies
            .iter()
            .map(|(i, c)| (c.name.to_string(), Term::var_ref(i.clone())))
            .collect();
        Summary {
            inputs: ts.inputs.clone(),
            outputs: ts.outputs.clone(),
            formula: self.sum_t.concretize(&self.sum).substitute(&map),
        }
    }
}

pub fn comp_inv_sum_o(ts: &ProcedureTS, extra: &Term, ctx: &SynthCtx) -> ForwardResult {
    let inv_t = inv_template_for(ts, &ctx.bounds);
    let inv = infer_invariant(ts, &inv_t, extra, ctx);
    let sum_t = io_template(ts);
    // I/O pairs consistent with the invariant at an exit state. If the exit
    // is unreachable the premise is unsatisfiable and the summary stays
    // bottom, i.e. the call provably never returns.
    let at_exit = Flow::seed(Term::and_all([
        inv_t.concretize(&inv),
        ts.out.clone(),
        ts.assumptions.clone(),
        extra.clone(),
    ]));
    let sum = tighten(&sum_t, &[at_exit], ctx);
    ForwardResult { inv_t, inv, sum_t, sum }
}

/// Over-approximating calling context of `site` in `ts`: bounds on the
/// actual inputs and outputs over the callee's formals, joined over every
/// materialized occurrence of the site. Unreachable occurrences contribute
/// nothing; if none is reachable the context is bottom.
pub fn comp_callctx_o(
    ts: &ProcedureTS,
    inv_t: &Template,
    inv: &AbstractValue,
    extra: &Term,
    site: &CallSite,
    callee: &ProcedureTS,
    ctx: &SynthCtx,
) -> (Template, AbstractValue) {
    let t = callctx_template(callee);
    let mut flows = Vec::new();
    for inst in &site.instances {
        let base = match inst.place {
            Place::Init => ts.init.clone(),
            Place::Trans => Term::and(inv_t.concretize(inv), ts.trans.clone()),
        };
        let premise = Term::and_all([
            base,
            ts.assumptions.clone(),
            extra.clone(),
            inst.guard.clone(),
        ]);
        let mut subst: HashMap<String, Term> = HashMap::new();
        for (formal, actual) in callee.inputs.iter().zip(&inst.args) {
            subst.insert(formal.name.to_string(), actual.clone());
        }
        for (formal, actual) in callee.outputs.iter().zip(&inst.rets) {
            subst.insert(formal.name.to_string(), Term::var_ref(actual.clone()));
        }
        flows.push(Flow { premise, include_current: false, current_subst: HashMap::new(), subst });
    }
    let d = tighten(&t, &flows, ctx);
    (t, d)
}
