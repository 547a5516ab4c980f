//! Solver sessions: a bit-blaster paired with a propositional backend.
//!
//! All synthesis loops run against a `SolverSession`. Formulas are asserted
//! either permanently or guarded by an activation literal, and queries are
//! answered under assumptions, which is how per-iteration state is retracted
//! without solver push/pop.

use std::cell::Cell;
use std::io::Write;
use std::rc::Rc;
use std::time::Instant;

use super::blast::Blaster;
use super::cnf::{CnfFormula, Lit, Var};
use super::sat::{Limits, SatResult, Solver};
use super::term::{Term, Valuation, VarRef};

pub trait SatBackend {
    fn new_var(&mut self) -> Var;
    fn add_clause(&mut self, clause: &[Lit]);
    fn solve(&mut self, assumptions: &[Lit], limits: &Limits) -> SatResult;
    fn model_value(&self, l: Lit) -> bool;
}

impl SatBackend for Solver {
    fn new_var(&mut self) -> Var {
        Solver::new_var(self)
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        Solver::add_clause(self, clause);
    }

    fn solve(&mut self, assumptions: &[Lit], limits: &Limits) -> SatResult {
        Solver::solve_limited(self, assumptions, limits)
    }

    fn model_value(&self, l: Lit) -> bool {
        Solver::model_value(self, l)
    }
}

/// Non-incremental backend that shells out to a DIMACS solver binary
/// (`<cmd> <cnf-file>`, MiniSat-style `s`/`v` output). Assumptions are
/// appended as unit clauses per call.
pub struct ExternalDimacsSolver {
    cmd: String,
    formula: CnfFormula,
    model: Vec<bool>,
}

impl ExternalDimacsSolver {
    pub fn new(cmd: &str) -> Self {
        ExternalDimacsSolver { cmd: cmd.to_string(), formula: CnfFormula::default(), model: Vec::new() }
    }
}

impl SatBackend for ExternalDimacsSolver {
    fn new_var(&mut self) -> Var {
        let v = Var(self.formula.num_vars);
        self.formula.num_vars += 1;
        v
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        self.formula.add(clause);
    }

    fn solve(&mut self, assumptions: &[Lit], _limits: &Limits) -> SatResult {
        let mut f = self.formula.clone();
        for &a in assumptions {
            f.add(&[a]);
        }
        let mut file = match tempfile::NamedTempFile::new() {
            Ok(f) => f,
            Err(_) => return SatResult::Unknown,
        };
        if f.write_dimacs(&mut file).is_err() || file.flush().is_err() {
            return SatResult::Unknown;
        }
        let out = match std::process::Command::new(&self.cmd).arg(file.path()).output() {
            Ok(o) => o,
            Err(_) => return SatResult::Unknown,
        };
        let text = String::from_utf8_lossy(&out.stdout);
        let mut result = SatResult::Unknown;
        let mut model = vec![false; self.formula.num_vars as usize];
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("s ") {
                result = match rest.trim() {
                    "SATISFIABLE" => SatResult::Sat,
                    "UNSATISFIABLE" => SatResult::Unsat,
                    _ => SatResult::Unknown,
                };
            } else if let Some(rest) = line.strip_prefix("v ") {
                for tok in rest.split_whitespace() {
                    if let Ok(n) = tok.parse::<i64>() {
                        if n > 0 && (n as usize) <= model.len() {
                            model[n as usize - 1] = true;
                        }
                    }
                }
            }
        }
        if result == SatResult::Sat {
            self.model = model;
        }
        result
    }

    fn model_value(&self, l: Lit) -> bool {
        self.model.get(l.var().0 as usize).copied().unwrap_or(false) ^ l.is_neg()
    }
}

/// Backend wrapper that optionally mirrors every clause into a `CnfFormula`
/// so the instance can be dumped as DIMACS afterwards.
pub struct RecordingBackend {
    inner: Box<dyn SatBackend>,
    pub record: Option<CnfFormula>,
}

impl SatBackend for RecordingBackend {
    fn new_var(&mut self) -> Var {
        let v = self.inner.new_var();
        if let Some(r) = &mut self.record {
            r.num_vars = r.num_vars.max(v.0 + 1);
        }
        v
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        if let Some(r) = &mut self.record {
            r.add(clause);
        }
        self.inner.add_clause(clause);
    }

    fn solve(&mut self, assumptions: &[Lit], limits: &Limits) -> SatResult {
        self.inner.solve(assumptions, limits)
    }

    fn model_value(&self, l: Lit) -> bool {
        self.inner.model_value(l)
    }
}

pub struct SolverSession {
    backend: RecordingBackend,
    blaster: Blaster,
    /// Shared query counter, reported in run statistics.
    calls: Rc<Cell<u64>>,
    pub limits: Limits,
}

impl SolverSession {
    pub fn new() -> SolverSession {
        SolverSession::with_backend(Box::new(Solver::new()))
    }

    pub fn with_backend(backend: Box<dyn SatBackend>) -> SolverSession {
        SolverSession {
            backend: RecordingBackend { inner: backend, record: None },
            blaster: Blaster::new(),
            calls: Rc::new(Cell::new(0)),
            limits: Limits::default(),
        }
    }

    pub fn share_counter(&mut self, calls: Rc<Cell<u64>>) {
        self.calls = calls;
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.limits.deadline = deadline;
    }

    pub fn enable_recording(&mut self) {
        if self.backend.record.is_none() {
            self.backend.record = Some(CnfFormula::default());
        }
    }

    pub fn recorded(&self) -> Option<&CnfFormula> {
        self.backend.record.as_ref()
    }

    /// Assert `t` permanently.
    pub fn assert_term(&mut self, t: &Term) {
        let l = self.blaster.blast_bool(&mut self.backend, t);
        self.backend.add_clause(&[l]);
    }

    /// Fresh activation literal for retractable assertions.
    pub fn activation(&mut self) -> Lit {
        Lit::pos(self.backend.new_var())
    }

    /// Assert `act -> t`; the formula only bites while `act` is assumed.
    pub fn assert_under(&mut self, act: Lit, t: &Term) {
        let l = self.blaster.blast_bool(&mut self.backend, t);
        self.backend.add_clause(&[!act, l]);
    }

    pub fn check(&mut self, assumptions: &[Lit]) -> SatResult {
        self.calls.set(self.calls.get() + 1);
        self.backend.solve(assumptions, &self.limits)
    }

    /// One-off satisfiability of `t` conjoined with everything asserted.
    pub fn check_term(&mut self, t: &Term) -> SatResult {
        let act = self.activation();
        self.assert_under(act, t);
        self.check(&[act])
    }

    pub fn model_of(&mut self, v: &VarRef) -> super::bitvec::BitVec {
        self.blaster.model_of(&mut self.backend, v)
    }

    pub fn model_valuation(&mut self, vars: &[VarRef]) -> Valuation {
        self.blaster.model_valuation(&mut self.backend, vars)
    }

    pub fn write_dimacs<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        match self.recorded() {
            Some(f) => f.write_dimacs(w),
            None => Ok(()),
        }
    }
}

impl Default for SolverSession {
    fn default() -> Self {
        SolverSession::new()
    }
}
