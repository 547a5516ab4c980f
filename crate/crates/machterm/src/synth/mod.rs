//! Second-order synthesis: model-guided parameter inference for invariants,
//! summaries and calling contexts, counterexample-guided lexicographic
//! ranking synthesis, and the precondition bootstrap loop.

mod backward;
mod forward;
mod precond;
mod ranking;
mod templates;
mod tighten;
#[cfg(test)]
mod tests;

pub use backward::{comp_callctx_u, comp_nec_precond};
pub use forward::{comp_callctx_o, comp_inv_sum_o, infer_invariant, ForwardResult};
pub use precond::{comp_precond_term, copies_to_formals, PrecondTermResult};
pub use ranking::{comp_term_arg, lr_formula, ranking_bad, LexRanking, RankComponent};
pub use templates::{
    callctx_template, inv_template, inv_template_for, io_template, precond_template,
};
pub use tighten::{tighten, Flow};

use std::cell::Cell;
use std::rc::Rc;
use std::time::Instant;

/// Coefficient range for one stage of the ranking search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffRange {
    /// Coefficients in [-n, n].
    Limit(i64),
    /// Full extended width.
    Full,
}

#[derive(Clone, Debug)]
pub struct SynthesisBounds {
    /// Maximum lexicographic components per loop.
    pub max_lex: u32,
    /// Outer iteration bound shared by the ranking and precondition loops.
    pub max_iter: u32,
    /// Widening threshold: raises of a single template row before it goes
    /// to top.
    pub max_tighten: u32,
    pub coeff_schedule: Vec<CoeffRange>,
    /// Sidecar invariant-template matrix: extra row coefficient vectors
    /// over each loop's numeric head variables (zones, octagons, ...).
    pub inv_matrix: Option<String>,
    /// Compute ranking arithmetic at an extended width so it cannot wrap.
    /// Turning this off is unsound; it exists so tests can assert the
    /// guard is load-bearing.
    pub width_extension: bool,
}

impl Default for SynthesisBounds {
    fn default() -> Self {
        SynthesisBounds {
            max_lex: 3,
            max_iter: 20,
            max_tighten: 20,
            coeff_schedule: vec![CoeffRange::Limit(1), CoeffRange::Limit(10), CoeffRange::Full],
            inv_matrix: None,
            width_extension: true,
        }
    }
}

/// Shared run context: bounds, deadline, and the cumulative solver-call
/// counter threaded into every session.
#[derive(Clone)]
pub struct SynthCtx {
    pub bounds: SynthesisBounds,
    pub deadline: Option<Instant>,
    pub calls: Rc<Cell<u64>>,
}

impl SynthCtx {
    pub fn new(bounds: SynthesisBounds) -> SynthCtx {
        SynthCtx { bounds, deadline: None, calls: Rc::new(Cell::new(0)) }
    }

    pub fn session(&self) -> crate::logic::SolverSession {
        let mut s = crate::logic::SolverSession::new();
        s.share_counter(self.calls.clone());
        s.set_deadline(self.deadline);
        s
    }

    pub fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}
