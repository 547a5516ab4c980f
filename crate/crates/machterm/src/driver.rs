//! Analysis orchestration over the call graph: forward summaries and
//! calling contexts, backward preconditions, verdict assembly, and the
//! monolithic (fully inlined) mode.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::absdom::{AbstractValue, Template};
use crate::frontend::{build_call_graph, normalize, Program};
use crate::logic::{SatResult, Term};
use crate::ssa::{encode, inline_program, instantiate_summaries, Place, ProcedureTS, Summary};
use crate::synth::{
    callctx_template, comp_callctx_o, comp_callctx_u, comp_inv_sum_o, comp_precond_term,
    comp_term_arg, copies_to_formals, infer_invariant, inv_template_for, precond_template, tighten,
    Flow, LexRanking, SynthCtx, SynthesisBounds,
};

/// Per-procedure termination status. The join order for callers is
/// `Terminating < PotentiallyNonTerminating`; `NonTerminating` is only
/// assigned on direct unreachable-output evidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Terminating,
    NonTerminating,
    PotentiallyNonTerminating,
    UnknownTimeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Terminating => "TERMINATING",
            Status::NonTerminating => "NON_TERMINATING",
            Status::PotentiallyNonTerminating => "POTENTIALLY_NON_TERMINATING",
            Status::UnknownTimeout => "UNKNOWN_TIMEOUT",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Terminating => 0,
            Status::NonTerminating => 10,
            Status::PotentiallyNonTerminating => 20,
            Status::UnknownTimeout => 30,
        }
    }

    /// Caller-side accumulation; non-termination is handled separately
    /// (it needs unavoidability evidence, not a join).
    fn join(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (UnknownTimeout, _) | (_, UnknownTimeout) => UnknownTimeout,
            (NonTerminating, _) | (_, NonTerminating) => NonTerminating,
            (PotentiallyNonTerminating, _) | (_, PotentiallyNonTerminating) => {
                PotentiallyNonTerminating
            }
            (Terminating, Terminating) => Terminating,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProcedureVerdict {
    pub name: String,
    pub status: Status,
    /// One entry per loop; each is the rendered component list.
    pub ranking: Vec<Option<Vec<String>>>,
    /// Sufficient termination precondition over the formal inputs
    /// (conditional mode only).
    pub precondition: Option<Term>,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub status: Status,
    /// Entry-procedure precondition over its formal inputs (conditional
    /// mode; `true` in universal mode when terminating).
    pub precondition: Term,
    pub procedures: Vec<ProcedureVerdict>,
    pub solver_calls: u64,
    pub wall: Duration,
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub bounds: SynthesisBounds,
    /// Per-procedure synthesis budget.
    pub timeout_proc: Duration,
    /// Whole-run budget.
    pub timeout: Duration,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bounds: SynthesisBounds::default(),
            timeout_proc: Duration::from_secs(60),
            timeout: Duration::from_secs(1800),
        }
    }
}

/// One procedure's accumulated analysis state.
struct Record {
    ts: ProcedureTS,
    /// Calling-context template over the formal inputs/outputs and the
    /// joined context under which the forward results hold.
    ctx_t: Template,
    ctx: AbstractValue,
    /// Contexts seen so far, for the subsumption check.
    seen_ctxs: Vec<AbstractValue>,
    inv_t: Template,
    inv: AbstractValue,
    summary: Option<Summary>,
    /// `Init ∧ Inv° ∧ Out` unsatisfiable: the procedure never reaches its
    /// output binding, hence never terminates.
    never_returns: bool,
    status: Option<Status>,
    ranking: Option<LexRanking>,
    /// Backward pass result, over the input copies.
    precond: Option<Term>,
}

pub struct Analyzer<'a> {
    program: Program,
    config: &'a AnalysisConfig,
    ctx: SynthCtx,
    records: HashMap<String, Record>,
    start: Instant,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum AnalysisError {
    #[error("{0}")]
    CallGraph(String),
    #[error("entry procedure `{0}` not found")]
    NoEntry(String),
}

/// Interprocedural analysis, universal check (Does every input terminate?).
pub fn analyze_universal(p: &Program, config: &AnalysisConfig) -> Result<Verdict, AnalysisError> {
    let mut a = Analyzer::new(p, config)?;
    a.forward_from_entry();
    let status = a.universal_status(&a.program.entry.clone());
    Ok(a.verdict(status, None))
}

/// Interprocedural analysis, conditional check (Which inputs terminate?).
pub fn analyze_conditional(
    p: &Program,
    config: &AnalysisConfig,
) -> Result<Verdict, AnalysisError> {
    let mut a = Analyzer::new(p, config)?;
    a.forward_from_entry();
    a.backward(&a.program.entry.clone());
    let entry = a.program.entry.clone();
    let rec = &a.records[&entry];
    let precond = copies_to_formals(&rec.ts, rec.precond.as_ref().unwrap());
    let status = a.conditional_status(&entry);
    Ok(a.verdict(status, Some(precond)))
}

/// Monolithic mode: inline everything into the entry procedure first.
pub fn analyze_monolithic(
    p: &Program,
    universal: bool,
    config: &AnalysisConfig,
) -> Result<Verdict, AnalysisError> {
    // The inlined program is already normalized; skip the second pass.
    let mono = inline_program(p);
    let mut a = Analyzer::new_normalized(mono, config)?;
    a.forward_from_entry();
    if universal {
        let status = a.universal_status(&a.program.entry.clone());
        Ok(a.verdict(status, None))
    } else {
        a.backward(&a.program.entry.clone());
        let entry = a.program.entry.clone();
        let rec = &a.records[&entry];
        let precond = copies_to_formals(&rec.ts, rec.precond.as_ref().unwrap());
        let status = a.conditional_status(&entry);
        Ok(a.verdict(status, Some(precond)))
    }
}

impl<'a> Analyzer<'a> {
    pub fn new(p: &Program, config: &'a AnalysisConfig) -> Result<Analyzer<'a>, AnalysisError> {
        Analyzer::new_normalized(normalize(p), config)
    }

    fn new_normalized(
        norm: Program,
        config: &'a AnalysisConfig,
    ) -> Result<Analyzer<'a>, AnalysisError> {
        build_call_graph(&norm).map_err(|e| AnalysisError::CallGraph(e.msg))?;
        if norm.procedure(&norm.entry).is_none() {
            return Err(AnalysisError::NoEntry(norm.entry.clone()));
        }
        let mut records = HashMap::new();
        for proc in &norm.procedures {
            let ts = encode(&norm, proc);
            let ctx_t = callctx_template(&ts);
            let inv_t = inv_template_for(&ts, &config.bounds);
            records.insert(proc.name.clone(), Record {
                ts,
                ctx_t,
                ctx: AbstractValue::Bottom,
                seen_ctxs: Vec::new(),
                inv_t,
                inv: AbstractValue::Bottom,
                summary: None,
                never_returns: false,
                status: None,
                ranking: None,
                precond: None,
            });
        }
        let mut ctx = SynthCtx::new(config.bounds.clone());
        ctx.deadline = Some(Instant::now() + config.timeout);
        Ok(Analyzer { program: norm, config, ctx, records, start: Instant::now() })
    }

    pub fn solver_calls(&self) -> u64 {
        self.ctx.calls.get()
    }

    fn out_of_budget(&self) -> bool {
        self.start.elapsed() >= self.config.timeout
    }

    /// Synthesis context with this procedure's budget applied.
    fn proc_ctx(&self) -> SynthCtx {
        let mut c = self.ctx.clone();
        let local = Instant::now() + self.config.timeout_proc;
        c.deadline = Some(match c.deadline {
            Some(d) => d.min(local),
            None => local,
        });
        c
    }

    pub fn forward_from_entry(&mut self) {
        let entry = self.program.entry.clone();
        let top = AbstractValue::top(self.records[&entry].ctx_t.rows.len());
        self.analyze_forward(&entry, top);
    }

    /// Forward pass: infer the procedure's invariant and summary under the
    /// given calling context, recursing into callees whose context is not
    /// subsumed by what they have already been analyzed for.
    fn analyze_forward(&mut self, name: &str, callctx: AbstractValue) {
        {
            let subsumed = {
                let rec = &self.records[name];
                rec.summary.is_some() && {
                    let mut s = self.ctx.session();
                    crate::absdom::is_subsumed(&rec.ctx_t, &callctx, &rec.ctx, &mut s)
                }
            };
            if subsumed {
                return; // seen a context at least as general
            }
            let rec = self.records.get_mut(name).expect("known procedure");
            rec.seen_ctxs.push(callctx.clone());
            rec.ctx = crate::absdom::join(&rec.ctx, &callctx);
        }
        let ctx = self.proc_ctx();
        let (ts, extra) = {
            let rec = &self.records[name];
            (rec.ts.clone(), self.context_formula(rec))
        };

        // First pass with callees havocked, to derive their contexts.
        let inv_t = self.records[name].inv_t.clone();
        let inv0 = infer_invariant(&ts, &inv_t, &extra, &ctx);
        for si in 0..ts.calls.len() {
            let site = ts.calls[si].clone();
            let callee_ts = self.records[&site.callee].ts.clone();
            let (_, d) =
                comp_callctx_o(&ts, &inv_t, &inv0, &extra, &site, &callee_ts, &ctx);
            self.analyze_forward(&site.callee, d);
        }

        // Second pass with the callees' summaries in place.
        let sums = self.summaries_formula(&ts);
        let fr = comp_inv_sum_o(&ts, &Term::and(extra.clone(), sums.clone()), &ctx);
        // The invariant over-approximates every reachable state, including
        // the ones where the exit guard has been raised; if none of those
        // fits Out, the procedure provably never reaches its output binding.
        let never_returns = {
            let mut s = ctx.session();
            s.assert_term(&Term::and_all([
                fr.inv_formula(),
                ts.out.clone(),
                ts.assumptions.clone(),
                extra.clone(),
                sums,
            ]));
            matches!(s.check(&[]), SatResult::Unsat)
        };
        let rec = self.records.get_mut(name).expect("known procedure");
        rec.inv = fr.inv.clone();
        rec.never_returns = never_returns;
        let summary = fr.summary(&ts);
        rec.summary = Some(match rec.summary.take() {
            // Joining at the formula level keeps the stored summary sound
            // for every context merged into `ctx`.
            Some(old) => Summary {
                inputs: old.inputs,
                outputs: old.outputs,
                formula: Term::or(old.formula, summary.formula),
            },
            None => summary,
        });
    }

    /// The procedure's accumulated calling context as an `extra` premise:
    /// inputs renamed to the frozen copies; output constraints dropped
    /// (outputs are unbound before `Out`, so rows over them say nothing
    /// usable inside Init/Trans).
    fn context_formula(&self, rec: &Record) -> Term {
        match &rec.ctx {
            AbstractValue::Bottom => Term::tt(),
            d => {
                let masked = rec.ctx_t.clone();
                let out_names: Vec<&str> =
                    rec.ts.outputs.iter().map(|o| o.name.as_ref()).collect();
                let rows = masked.rows.len();
                let mut keep = d.clone();
                if let AbstractValue::Rows(b) = &mut keep {
                    for r in 0..rows {
                        let touches_out = masked.rows[r]
                            .coeffs
                            .iter()
                            .zip(&masked.vars)
                            .any(|(c, v)| *c != 0 && out_names.contains(&v.name.as_ref()));
                        if touches_out {
                            b[r] = crate::absdom::Bound::Top;
                        }
                    }
                }
                let f = masked.concretize(&keep);
                let map: HashMap<String, Term> = rec
                    .ts
                    .input_copies
                    .iter()
                    .map(|(i, c)| (i.name.to_string(), Term::var_ref(c.clone())))
                    .collect();
                f.substitute(&map)
            }
        }
    }

    /// Conjunction of the known callee summaries instantiated at every call
    /// occurrence of `ts`. A callee that never returns is left havocked: its
    /// summary degenerates to `¬guard`, which as a premise would erase
    /// exactly the executions that take the call.
    fn summaries_formula(&self, ts: &ProcedureTS) -> Term {
        let sums: HashMap<String, Summary> = ts
            .calls
            .iter()
            .filter(|site| !self.records[&site.callee].never_returns)
            .filter_map(|site| {
                self.records[&site.callee]
                    .summary
                    .clone()
                    .map(|s| (site.callee.clone(), s))
            })
            .collect();
        instantiate_summaries(ts, &sums).expect("arities checked by the frontend")
    }

    /// Universal check per procedure: callee statuses joined per call site,
    /// then this procedure's own termination argument.
    fn universal_status(&mut self, name: &str) -> Status {
        if let Some(s) = self.records[name].status {
            return s;
        }
        let ctx = self.proc_ctx();
        let (ts, extra) = {
            let rec = &self.records[name];
            (rec.ts.clone(), self.context_formula(rec))
        };
        let sums = self.summaries_formula(&ts);
        let base = Term::and(extra.clone(), sums.clone());

        if self.records[name].never_returns {
            let rec = self.records.get_mut(name).expect("known procedure");
            rec.status = Some(Status::NonTerminating);
            return Status::NonTerminating;
        }

        let mut status = Status::Terminating;
        for si in 0..ts.calls.len() {
            let site = ts.calls[si].clone();
            // Gate on the context alone: a never-returning callee's summary
            // is `false` under its guard, which would make the very site we
            // are asking about look unreachable.
            let reachable = {
                let rec = &self.records[name];
                comp_callctx_u(&ts, &rec.inv_t, &rec.inv, &extra, &site, &ctx)
            };
            if matches!(reachable.as_const(), Some(b) if !b.is_true()) {
                continue; // no occurrence of this site is reachable
            }
            let callee = self.universal_status(&site.callee);
            let contribution = match callee {
                Status::NonTerminating => {
                    // Only fatal for the caller when some occurrence is
                    // taken on every execution; a conditionally guarded
                    // diverging call merely makes the caller potentially
                    // non-terminating.
                    if self.site_unavoidable(&ts, &site, &base, &ctx) {
                        Status::NonTerminating
                    } else {
                        Status::PotentiallyNonTerminating
                    }
                }
                s => s,
            };
            status = status.join(contribution);
        }

        if status == Status::Terminating && !ts.loops.is_empty() {
            let inv_f = {
                let rec = &self.records[name];
                rec.inv_t.concretize(&rec.inv)
            };
            let lr = comp_term_arg(&ts, &Term::and(inv_f, base), &ctx);
            if !lr.is_complete() {
                status = Status::PotentiallyNonTerminating;
            }
            let rec = self.records.get_mut(name).expect("known procedure");
            rec.ranking = Some(lr);
        }
        if status != Status::NonTerminating && ctx.out_of_time() && self.out_of_budget() {
            status = Status::UnknownTimeout;
        }
        let rec = self.records.get_mut(name).expect("known procedure");
        rec.status = Some(status);
        status
    }

    /// Does some occurrence of the site fire on every execution? True when
    /// an instance guard is implied by the invariant at its place.
    fn site_unavoidable(
        &self,
        ts: &ProcedureTS,
        site: &crate::ssa::CallSite,
        base: &Term,
        ctx: &SynthCtx,
    ) -> bool {
        let rec = &self.records[&ts.name];
        let inv_f = rec.inv_t.concretize(&rec.inv);
        for inst in &site.instances {
            let place_base = match inst.place {
                Place::Init => ts.init.clone(),
                Place::Trans => Term::and(inv_f.clone(), ts.trans.clone()),
            };
            let mut s = ctx.session();
            s.assert_term(&Term::and_all([
                place_base,
                ts.assumptions.clone(),
                base.clone(),
                Term::not(inst.guard.clone()),
            ]));
            if matches!(s.check(&[]), SatResult::Unsat) {
                return true;
            }
        }
        false
    }

    /// Backward pass: conjoin callee preconditions into the bad-state
    /// condition, then run the precondition bootstrap.
    fn backward(&mut self, name: &str) {
        if self.records[name].precond.is_some() {
            return;
        }
        let ctx = self.proc_ctx();
        let (ts, extra) = {
            let rec = &self.records[name];
            (rec.ts.clone(), self.context_formula(rec))
        };
        let sums = self.summaries_formula(&ts);
        let base = Term::and(extra.clone(), sums);

        if self.records[name].never_returns {
            // The procedure never reaches Out; conditional termination is
            // unachievable for every input.
            let rec = self.records.get_mut(name).expect("known procedure");
            rec.precond = Some(Term::ff());
            rec.status = Some(Status::NonTerminating);
            return;
        }

        // Callee preconditions, visited depth-first where reachable.
        let mut site_bad = Term::ff();
        let mut init_bad: Vec<Term> = Vec::new();
        for si in 0..ts.calls.len() {
            let site = ts.calls[si].clone();
            // As in the universal check, gate without the summaries so a
            // never-returning callee cannot mask its own call site.
            let reachable = {
                let rec = &self.records[name];
                comp_callctx_u(&ts, &rec.inv_t, &rec.inv, &extra, &site, &ctx)
            };
            if matches!(reachable.as_const(), Some(b) if !b.is_true()) {
                continue;
            }
            self.backward(&site.callee);
            let callee = &self.records[&site.callee];
            let p = copies_to_formals(&callee.ts, callee.precond.as_ref().unwrap());
            for inst in &site.instances {
                let mut map: HashMap<String, Term> = HashMap::new();
                for (formal, actual) in callee.ts.inputs.iter().zip(&inst.args) {
                    map.insert(formal.name.to_string(), actual.clone());
                }
                let violated = Term::and(inst.guard.clone(), Term::not(p.substitute(&map)));
                match inst.place {
                    Place::Trans => site_bad = Term::or(site_bad, violated),
                    Place::Init => init_bad.push(violated),
                }
            }
        }

        let mut r = comp_precond_term(&ts, &base, &site_bad, &ctx);
        // Calls that can already go wrong while Init runs: project the
        // offending inputs out directly and exclude them.
        for violated in init_bad {
            let p_t = precond_template(&ts);
            let at_entry = Flow::seed(Term::and_all([
                ts.init.clone(),
                ts.assumptions.clone(),
                base.clone(),
                violated,
            ]));
            let cover = tighten(&p_t, &[at_entry], &ctx);
            r.precond = Term::and(r.precond, Term::not(p_t.concretize(&cover)));
        }
        let rec = self.records.get_mut(name).expect("known procedure");
        rec.precond = Some(r.precond);
        rec.ranking = r.ranking;
    }

    /// Conditional verdict for one analyzed procedure: terminating if the
    /// precondition covers the whole (assumption-restricted) input space,
    /// non-terminating if Out is unreachable, else potentially
    /// non-terminating.
    fn conditional_status(&mut self, name: &str) -> Status {
        let rec = &self.records[name];
        if rec.never_returns {
            return Status::NonTerminating;
        }
        let precond = rec.precond.clone().expect("backward pass ran");
        let mut s = self.ctx.session();
        s.assert_term(&Term::and_all([
            rec.ts.init.clone(),
            rec.ts.assumptions.clone(),
            Term::not(precond),
        ]));
        match s.check(&[]) {
            SatResult::Unsat => Status::Terminating,
            SatResult::Sat => Status::PotentiallyNonTerminating,
            SatResult::Unknown => Status::UnknownTimeout,
        }
    }

    fn verdict(&mut self, status: Status, precond: Option<Term>) -> Verdict {
        let entry = self.program.entry.clone();
        let mut procedures = Vec::new();
        for proc in &self.program.procedures {
            let rec = &self.records[&proc.name];
            if rec.summary.is_none() && proc.name != entry {
                continue; // never reached from the entry
            }
            let status = if proc.name == entry {
                status
            } else {
                rec.status.unwrap_or(Status::PotentiallyNonTerminating)
            };
            procedures.push(ProcedureVerdict {
                name: proc.name.clone(),
                status,
                ranking: rendered_ranking(rec),
                precondition: rec
                    .precond
                    .as_ref()
                    .map(|p| copies_to_formals(&rec.ts, p)),
            });
        }
        Verdict {
            status,
            precondition: precond.unwrap_or_else(|| match status {
                Status::Terminating => Term::tt(),
                _ => Term::ff(),
            }),
            procedures,
            solver_calls: self.ctx.calls.get(),
            wall: self.start.elapsed(),
        }
    }

    pub fn record_ranking(&self, name: &str) -> Option<&LexRanking> {
        self.records.get(name).and_then(|r| r.ranking.as_ref())
    }

    pub fn record_ts(&self, name: &str) -> Option<&ProcedureTS> {
        self.records.get(name).map(|r| &r.ts)
    }

    /// Number of forward analyses actually performed (context not
    /// subsumed), for reuse accounting.
    pub fn forward_runs(&self, name: &str) -> usize {
        self.records.get(name).map(|r| r.seen_ctxs.len()).unwrap_or(0)
    }
}

fn rendered_ranking(rec: &Record) -> Vec<Option<Vec<String>>> {
    match &rec.ranking {
        None => Vec::new(),
        Some(lr) => lr
            .loops
            .iter()
            .map(|l| l.as_ref().map(|cs| cs.iter().map(|c| c.render()).collect()))
            .collect(),
    }
}

#[cfg(test)]
mod tests;
