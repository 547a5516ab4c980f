//! Incremental CDCL SAT solver with assumptions.
//!
//! A conventional conflict-driven solver: two watched literals, first-UIP
//! conflict analysis with backjumping, activity-ordered decisions with phase
//! saving, and geometric restarts. Incrementality is assumption-based:
//! problem clauses are only ever added, and per-query state is passed
//! through assumption literals, so no push/pop machinery is needed. The
//! learnt-clause database is periodically reduced, keeping low-LBD clauses,
//! so long-running queries stay within memory.

use std::time::Instant;

use super::cnf::{Lit, Var};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SatResult {
    Sat,
    Unsat,
    /// Resource limit hit before an answer was found.
    Unknown,
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct ClauseRef(u32);

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    /// Literal-block distance at learning time; lower is more valuable.
    lbd: u32,
}

#[derive(Default)]
pub struct Limits {
    /// Give up after this many conflicts in one `solve` call.
    pub max_conflicts: Option<u64>,
    /// Give up once this instant has passed (checked periodically).
    pub deadline: Option<Instant>,
}

pub struct Solver {
    clauses: Vec<Clause>,
    /// watches[l.idx()]: clauses currently watching literal l.
    watches: Vec<Vec<ClauseRef>>,
    assign: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<ClauseRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    /// Lazy max-heap of (activity bits, var); entries go stale when bumped.
    heap: std::collections::BinaryHeap<(u64, u32)>,
    phase: Vec<bool>,
    num_learnts: usize,
    max_learnts: usize,
    ok: bool,
    model: Vec<bool>,
    seen: Vec<bool>,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

const VAR_DECAY: f64 = 0.95;
const RESCALE: f64 = 1e100;

fn act_bits(a: f64) -> u64 {
    // Non-negative finite floats order correctly as raw bits.
    a.to_bits()
}

impl Solver {
    pub fn new() -> Solver {
        Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            heap: std::collections::BinaryHeap::new(),
            phase: Vec::new(),
            num_learnts: 0,
            max_learnts: 20_000,
            ok: true,
            model: Vec::new(),
            seen: Vec::new(),
            conflicts: 0,
            decisions: 0,
            propagations: 0,
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.assign.len() as u32);
        self.assign.push(None);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.push((0, v.0));
        v
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    fn value(&self, l: Lit) -> Option<bool> {
        self.assign[l.var().0 as usize].map(|b| b ^ l.is_neg())
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Add a clause at the top level. Returns false if the formula became
    /// trivially unsatisfiable.
    pub fn add_clause(&mut self, clause: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut lits: Vec<Lit> = Vec::with_capacity(clause.len());
        let mut sorted = clause.to_vec();
        sorted.sort();
        let mut prev: Option<Lit> = None;
        for &l in &sorted {
            if prev == Some(l) {
                continue;
            }
            if prev == Some(!l) || self.value(l) == Some(true) {
                return true; // tautology or already satisfied
            }
            if self.value(l) != Some(false) {
                lits.push(l);
            }
            prev = Some(l);
        }
        match lits.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(lits[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(lits, false, 0);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> ClauseRef {
        let cr = ClauseRef(self.clauses.len() as u32);
        self.watches[lits[0].idx()].push(cr);
        self.watches[lits[1].idx()].push(cr);
        self.clauses.push(Clause { lits, learnt, lbd });
        self.num_learnts += learnt as usize;
        cr
    }

    fn enqueue(&mut self, l: Lit, from: Option<ClauseRef>) {
        debug_assert!(self.value(l).is_none());
        let v = l.var().0 as usize;
        self.assign[v] = Some(!l.is_neg());
        self.level[v] = self.decision_level();
        self.reason[v] = from;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<ClauseRef> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.propagations += 1;
            // p became true, so clauses watching !p must be inspected.
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.idx()]);
            let mut i = 0;
            'clauses: while i < ws.len() {
                let cr = ws[i];
                let lits = &mut self.clauses[cr.0 as usize].lits;
                // Normalise so the false literal sits at position 1.
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                debug_assert_eq!(lits[1], false_lit);
                let first = lits[0];
                if self.assign[first.var().0 as usize].map(|b| b ^ first.is_neg()) == Some(true) {
                    i += 1;
                    continue;
                }
                for k in 2..lits.len() {
                    let l = lits[k];
                    if self.assign[l.var().0 as usize].map(|b| b ^ l.is_neg()) != Some(false) {
                        lits.swap(1, k);
                        let new_watch = lits[1];
                        self.watches[new_watch.idx()].push(cr);
                        ws.swap_remove(i);
                        continue 'clauses;
                    }
                }
                // Clause is unit or conflicting under the first literal.
                if self.value(first) == Some(false) {
                    self.watches[false_lit.idx()] = ws;
                    self.qhead = self.trail.len();
                    return Some(cr);
                }
                self.enqueue(first, Some(cr));
                i += 1;
            }
            self.watches[false_lit.idx()] = ws;
        }
        None
    }

    fn bump(&mut self, v: Var) {
        let a = &mut self.activity[v.0 as usize];
        *a += self.var_inc;
        if *a > RESCALE {
            for x in &mut self.activity {
                *x /= RESCALE;
            }
            self.var_inc /= RESCALE;
        }
        self.heap.push((act_bits(self.activity[v.0 as usize]), v.0));
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, confl: ClauseRef) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit::pos(Var(0))]; // placeholder for the UIP
        let mut counter = 0u32;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let mut cr = confl;
        loop {
            let start = if p.is_none() { 0 } else { 1 };
            // Borrow the clause literals by value to appease the borrow checker.
            let lits: Vec<Lit> = self.clauses[cr.0 as usize].lits[start..].to_vec();
            for q in lits {
                let v = q.var().0 as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(q.var());
                    if self.level[v] == self.decision_level() {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // Walk the trail backwards to the next marked literal.
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var().0 as usize] {
                    break;
                }
            }
            let lit = self.trail[idx];
            self.seen[lit.var().0 as usize] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = !lit;
                break;
            }
            cr = self.reason[lit.var().0 as usize].expect("non-decision implied literal");
            p = Some(lit);
        }
        // Cheap self-subsumption: drop literals implied by the rest.
        let mut j = 1;
        for i in 1..learnt.len() {
            let l = learnt[i];
            let redundant = match self.reason[l.var().0 as usize] {
                Some(r) => self.clauses[r.0 as usize].lits[1..]
                    .iter()
                    .all(|q| self.seen[q.var().0 as usize] || self.level[q.var().0 as usize] == 0),
                None => false,
            };
            if redundant {
                self.seen[l.var().0 as usize] = false;
            } else {
                learnt[j] = l;
                j += 1;
            }
        }
        learnt.truncate(j);
        for l in &learnt {
            self.seen[l.var().0 as usize] = false;
        }
        let bt = if learnt.len() == 1 {
            0
        } else {
            // Move the highest-level remaining literal to position 1.
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().0 as usize]
                    > self.level[learnt[max_i].var().0 as usize]
                {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var().0 as usize]
        };
        (learnt, bt)
    }

    /// Number of distinct decision levels among a clause's literals.
    fn lbd(&self, lits: &[Lit]) -> u32 {
        let mut levels: Vec<u32> =
            lits.iter().map(|l| self.level[l.var().0 as usize]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    /// Drop the less valuable half of the high-LBD learnt clauses and
    /// compact the arena. Must run at decision level zero with propagation
    /// complete, so the only live reasons belong to top-level assignments.
    fn reduce_db(&mut self) {
        debug_assert_eq!(self.decision_level(), 0);
        let mut is_reason = vec![false; self.clauses.len()];
        for v in 0..self.assign.len() {
            if self.assign[v].is_some() {
                if let Some(cr) = self.reason[v] {
                    is_reason[cr.0 as usize] = true;
                }
            }
        }
        let mut cands: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&i| {
                let c = &self.clauses[i as usize];
                c.learnt && c.lbd > 2 && !is_reason[i as usize]
            })
            .collect();
        cands.sort_by_key(|&i| {
            let c = &self.clauses[i as usize];
            (c.lbd, c.lits.len() as u32)
        });
        let mut drop = vec![false; self.clauses.len()];
        for &i in &cands[cands.len() / 2..] {
            drop[i as usize] = true;
        }
        let mut map: Vec<u32> = vec![u32::MAX; self.clauses.len()];
        let old = std::mem::take(&mut self.clauses);
        for (i, c) in old.into_iter().enumerate() {
            if drop[i] {
                continue;
            }
            map[i] = self.clauses.len() as u32;
            self.clauses.push(c);
        }
        for w in &mut self.watches {
            w.clear();
        }
        for (i, c) in self.clauses.iter().enumerate() {
            let cr = ClauseRef(i as u32);
            self.watches[c.lits[0].idx()].push(cr);
            self.watches[c.lits[1].idx()].push(cr);
        }
        for r in &mut self.reason {
            if let Some(cr) = *r {
                *r = Some(ClauseRef(map[cr.0 as usize]));
            }
        }
        self.num_learnts = self.clauses.iter().filter(|c| c.learnt).count();
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let bound = self.trail_lim[lvl as usize];
        while self.trail.len() > bound {
            let l = self.trail.pop().unwrap();
            let v = l.var().0 as usize;
            self.phase[v] = !l.is_neg();
            self.assign[v] = None;
            self.reason[v] = None;
            self.heap.push((act_bits(self.activity[v]), l.var().0));
        }
        self.trail_lim.truncate(lvl as usize);
        self.qhead = self.trail.len();
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some((bits, v)) = self.heap.pop() {
            let vi = v as usize;
            if self.assign[vi].is_none() && act_bits(self.activity[vi]) == bits {
                return Some(Lit::new(Var(v), !self.phase[vi]));
            }
        }
        // Stale-entry fallback: scan for any unassigned variable.
        for (vi, a) in self.assign.iter().enumerate() {
            if a.is_none() {
                return Some(Lit::new(Var(vi as u32), !self.phase[vi]));
            }
        }
        None
    }

    pub fn solve(&mut self, assumptions: &[Lit]) -> SatResult {
        self.solve_limited(assumptions, &Limits::default())
    }

    pub fn solve_limited(&mut self, assumptions: &[Lit], limits: &Limits) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        let start_conflicts = self.conflicts;
        let mut restart_limit = 100u64;
        let mut since_restart = 0u64;
        let result = loop {
            if let Some(cr) = self.propagate() {
                self.conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    break SatResult::Unsat;
                }
                if self.decision_level() <= assumptions.len() as u32 {
                    // Conflict forced by the assumptions alone.
                    break SatResult::Unsat;
                }
                let (learnt, bt) = self.analyze(cr);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let asserting = learnt[0];
                    let lbd = self.lbd(&learnt);
                    let cr = self.attach(learnt, true, lbd);
                    self.enqueue(asserting, Some(cr));
                }
                self.var_inc /= VAR_DECAY;
                if self.conflicts % 256 == 0 {
                    if let Some(max) = limits.max_conflicts {
                        if self.conflicts - start_conflicts >= max {
                            break SatResult::Unknown;
                        }
                    }
                    if let Some(dl) = limits.deadline {
                        if Instant::now() >= dl {
                            break SatResult::Unknown;
                        }
                    }
                }
            } else if (self.decision_level() as usize) < assumptions.len() {
                let p = assumptions[self.decision_level() as usize];
                match self.value(p) {
                    Some(false) => break SatResult::Unsat,
                    _ => {
                        self.trail_lim.push(self.trail.len());
                        if self.value(p).is_none() {
                            self.enqueue(p, None);
                        }
                    }
                }
            } else if since_restart >= restart_limit {
                since_restart = 0;
                restart_limit = restart_limit + restart_limit / 2;
                self.cancel_until(0);
                if self.num_learnts > self.max_learnts {
                    if self.propagate().is_some() {
                        self.ok = false;
                        break SatResult::Unsat;
                    }
                    self.reduce_db();
                    self.max_learnts += self.max_learnts / 10;
                }
            } else {
                match self.pick_branch() {
                    None => {
                        self.model = self.assign.iter().map(|a| a.unwrap_or(false)).collect();
                        break SatResult::Sat;
                    }
                    Some(l) => {
                        self.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        };
        self.cancel_until(0);
        result
    }

    /// Value of a literal in the most recent satisfying model. Variables
    /// allocated after that model was found read as false.
    pub fn model_value(&self, l: Lit) -> bool {
        self.model.get(l.var().0 as usize).copied().unwrap_or(false) ^ l.is_neg()
    }
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn lit(v: u32, neg: bool) -> Lit {
        Lit::new(Var(v), neg)
    }

    #[test]
    fn trivial_sat_unsat() {
        let mut s = Solver::new();
        let a = s.new_var();
        let b = s.new_var();
        assert!(s.add_clause(&[Lit::pos(a), Lit::pos(b)]));
        assert!(s.add_clause(&[Lit::neg(a)]));
        assert_eq!(s.solve(&[]), SatResult::Sat);
        assert!(!s.model_value(Lit::pos(a)));
        assert!(s.model_value(Lit::pos(b)));
        s.add_clause(&[Lit::neg(b)]);
        assert_eq!(s.solve(&[]), SatResult::Unsat);
    }

    #[test]
    fn assumptions_are_transient() {
        let mut s = Solver::new();
        let a = s.new_var();
        let b = s.new_var();
        s.add_clause(&[Lit::neg(a), Lit::pos(b)]);
        assert_eq!(s.solve(&[Lit::pos(a), Lit::neg(b)]), SatResult::Unsat);
        // The same formula stays satisfiable without the assumptions.
        assert_eq!(s.solve(&[]), SatResult::Sat);
        assert_eq!(s.solve(&[Lit::pos(a)]), SatResult::Sat);
        assert!(s.model_value(Lit::pos(b)));
    }

    #[test]
    fn pigeonhole_3_into_2_unsat() {
        // p[i][j]: pigeon i in hole j.
        let mut s = Solver::new();
        let p: Vec<Vec<Var>> =
            (0..3).map(|_| (0..2).map(|_| s.new_var()).collect()).collect();
        for i in 0..3 {
            s.add_clause(&[Lit::pos(p[i][0]), Lit::pos(p[i][1])]);
        }
        for j in 0..2 {
            for i in 0..3 {
                for k in i + 1..3 {
                    s.add_clause(&[Lit::neg(p[i][j]), Lit::neg(p[k][j])]);
                }
            }
        }
        assert_eq!(s.solve(&[]), SatResult::Unsat);
    }

    fn brute_force_sat(num_vars: u32, clauses: &[Vec<Lit>], fixed: &[Lit]) -> bool {
        'outer: for m in 0u64..1 << num_vars {
            let val = |l: Lit| (m >> l.var().0 & 1 == 1) ^ l.is_neg();
            if !fixed.iter().all(|&l| val(l)) {
                continue;
            }
            for c in clauses {
                if !c.iter().any(|&l| val(l)) {
                    continue 'outer;
                }
            }
            return true;
        }
        false
    }

    #[test]
    fn agrees_with_brute_force_on_random_cnf() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for round in 0..200 {
            let nv = 4 + round % 6;
            let nc = rng.gen_range(2..nv * 5);
            let clauses: Vec<Vec<Lit>> = (0..nc)
                .map(|_| {
                    let len = rng.gen_range(1..=3);
                    (0..len).map(|_| lit(rng.gen_range(0..nv as u32), rng.gen())).collect()
                })
                .collect();
            let assumps: Vec<Lit> = if round % 3 == 0 {
                vec![lit(rng.gen_range(0..nv as u32), rng.gen())]
            } else {
                vec![]
            };
            let mut s = Solver::new();
            for _ in 0..nv {
                s.new_var();
            }
            for c in &clauses {
                if !s.add_clause(c) {
                    break;
                }
            }
            let expect = brute_force_sat(nv as u32, &clauses, &assumps);
            let got = s.solve(&assumps);
            assert_eq!(
                got,
                if expect { SatResult::Sat } else { SatResult::Unsat },
                "round {round}: {clauses:?} assuming {assumps:?}"
            );
            if got == SatResult::Sat {
                for c in &clauses {
                    assert!(c.iter().any(|&l| s.model_value(l)), "model violates {c:?}");
                }
                for &l in &assumps {
                    assert!(s.model_value(l), "model violates assumption {l:?}");
                }
            }
        }
    }

    #[test]
    fn incremental_solving_reuses_state() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let nv = 8u32;
        let mut s = Solver::new();
        for _ in 0..nv {
            s.new_var();
        }
        let mut clauses: Vec<Vec<Lit>> = Vec::new();
        loop {
            let c: Vec<Lit> =
                (0..rng.gen_range(1..=3)).map(|_| lit(rng.gen_range(0..nv), rng.gen())).collect();
            clauses.push(c.clone());
            s.add_clause(&c);
            let expect = brute_force_sat(nv, &clauses, &[]);
            assert_eq!(
                s.solve(&[]),
                if expect { SatResult::Sat } else { SatResult::Unsat }
            );
            if !expect {
                break;
            }
        }
    }

    #[test]
    fn conflict_budget_returns_unknown() {
        // A hard pigeonhole instance with a one-conflict budget.
        let n = 7;
        let mut s = Solver::new();
        let p: Vec<Vec<Var>> =
            (0..n + 1).map(|_| (0..n).map(|_| s.new_var()).collect()).collect();
        for row in &p {
            let c: Vec<Lit> = row.iter().map(|&v| Lit::pos(v)).collect();
            s.add_clause(&c);
        }
        for j in 0..n {
            for i in 0..n + 1 {
                for k in i + 1..n + 1 {
                    s.add_clause(&[Lit::neg(p[i][j]), Lit::neg(p[k][j])]);
                }
            }
        }
        let r = s.solve_limited(
            &[],
            &Limits { max_conflicts: Some(256), deadline: None },
        );
        assert_eq!(r, SatResult::Unknown);
    }
}
