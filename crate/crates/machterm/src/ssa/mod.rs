//! Symbolic transition systems extracted from normalized procedures.
//!
//! A procedure becomes a triple of formulas `(init, trans, out)` over an
//! explicit state vector. Loops are cut at their heads: each head gets one
//! phi symbol per variable in scope plus a reachability guard, and the
//! transition relation chooses which loop advances through a free
//! loop-select Boolean per cutpoint. Calls stay uninterpreted: each call
//! occurrence contributes fresh output symbols and is recorded so summaries
//! can strengthen the formulas later.

mod encode;
mod inline;
mod printer;
#[cfg(test)]
mod tests;

pub use encode::encode;
pub use inline::{inline_all, inline_program};
pub use printer::print_ts;

use std::collections::HashMap;

use crate::logic::{Term, VarRef};

/// Where a call occurrence was materialized.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Place {
    Init,
    Trans,
}

/// One materialized occurrence of a call site inside `init` or `trans`.
/// The same source-level site can occur several times because loop steps
/// re-derive the entry state of downstream loop heads.
#[derive(Clone, Debug)]
pub struct CallInstance {
    pub guard: Term,
    /// Actual inputs: argument values followed by the globals, in the
    /// callee's input order.
    pub args: Vec<Term>,
    /// Fresh symbols for the return value (if any) followed by the globals.
    pub rets: Vec<VarRef>,
    pub place: Place,
}

/// A source-level call site and all its materialized occurrences.
#[derive(Clone, Debug)]
pub struct CallSite {
    pub callee: String,
    pub site: usize,
    pub instances: Vec<CallInstance>,
}

/// One loop cut. `select` is a free Boolean in `trans`; choosing it makes
/// this loop the one that advances.
#[derive(Clone, Debug)]
pub struct LoopInfo {
    pub index: usize,
    pub select: VarRef,
    /// Reachability guard of the loop head, current and next.
    pub guard: (VarRef, VarRef),
    /// Loop condition over the current-state phi variables.
    pub cond: Term,
    /// Phi variables, current and next, in scope order.
    pub head: Vec<(VarRef, VarRef)>,
    /// Source names matching `head`, for reporting.
    pub head_names: Vec<String>,
}

/// Symbolic transition system of one procedure.
#[derive(Clone, Debug)]
pub struct ProcedureTS {
    pub name: String,
    /// Formal parameters followed by the globals.
    pub inputs: Vec<VarRef>,
    /// Return value (if any) followed by the globals.
    pub outputs: Vec<VarRef>,
    /// Entire state vector, current and next, in a fixed order: input
    /// copies, entry guard, per-loop phis and guards, exit guard, output
    /// snapshots.
    pub state: Vec<(VarRef, VarRef)>,
    pub init: Term,
    pub trans: Term,
    pub out: Term,
    pub loops: Vec<LoopInfo>,
    pub calls: Vec<CallSite>,
    pub assumptions: Term,
    pub assertions: Term,
    /// For each input, its frozen in-state copy (framed by every step).
    pub input_copies: Vec<(VarRef, VarRef)>,
    /// Entry cutpoint: one-shot select and its guard.
    pub entry_select: VarRef,
    pub entry_guard: (VarRef, VarRef),
    pub exit_guard: (VarRef, VarRef),
    /// For each output, the state snapshot it is read from.
    pub out_snapshot: Vec<(VarRef, VarRef)>,
}

impl ProcedureTS {
    /// Substitution map renaming every current-state variable to its primed
    /// partner.
    pub fn prime_map(&self) -> HashMap<String, Term> {
        self.state
            .iter()
            .map(|(c, n)| (c.name.to_string(), Term::var_ref(n.clone())))
            .collect()
    }

    pub fn state_copy(&self, input: &VarRef) -> &VarRef {
        &self.input_copies.iter().find(|(i, _)| i == input).expect("input").1
    }
}

/// A procedure summary as produced by the analysis: a formula over the
/// callee's formal inputs and outputs.
#[derive(Clone, Debug)]
pub struct Summary {
    pub inputs: Vec<VarRef>,
    pub outputs: Vec<VarRef>,
    pub formula: Term,
}

#[derive(Debug, Clone)]
pub struct ArityMismatch {
    pub callee: String,
    pub expected: usize,
    pub got: usize,
}

impl std::fmt::Display for ArityMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "summary for `{}` has {} parameters, call site provides {}",
            self.callee, self.expected, self.got
        )
    }
}

/// Conjunction of `guard ⟹ summary` over every call occurrence for which a
/// summary is known; occurrences of callees without a summary contribute
/// `true` (the call stays havocked).
pub fn instantiate_summaries(
    ts: &ProcedureTS,
    sums: &HashMap<String, Summary>,
) -> Result<Term, ArityMismatch> {
    let mut conj = Vec::new();
    for site in &ts.calls {
        let Some(sum) = sums.get(&site.callee) else { continue };
        for inst in &site.instances {
            if sum.inputs.len() != inst.args.len() || sum.outputs.len() != inst.rets.len() {
                return Err(ArityMismatch {
                    callee: site.callee.clone(),
                    expected: sum.inputs.len() + sum.outputs.len(),
                    got: inst.args.len() + inst.rets.len(),
                });
            }
            let mut map: HashMap<String, Term> = HashMap::new();
            for (formal, actual) in sum.inputs.iter().zip(&inst.args) {
                map.insert(formal.name.to_string(), actual.clone());
            }
            for (formal, actual) in sum.outputs.iter().zip(&inst.rets) {
                map.insert(formal.name.to_string(), Term::var_ref(actual.clone()));
            }
            conj.push(Term::implies(inst.guard.clone(), sum.formula.substitute(&map)));
        }
    }
    Ok(Term::and_all(conj))
}
