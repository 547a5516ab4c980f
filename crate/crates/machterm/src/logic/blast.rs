//! Tseitin bit-blasting of bit-vector terms into CNF.
//!
//! Each term node is translated once (pointer-keyed cache) into a vector of
//! literals, LSB first; width-1 terms become a single literal. Variables get
//! a stable bit assignment per name so that repeated assertions in one
//! session talk about the same propositional variables.

use std::collections::HashMap;
use std::rc::Rc;

use super::bitvec::BitVec;
use super::cnf::Lit;
use super::session::SatBackend;
use super::term::{BinOp, Term, TermKind, TermNode, UnOp, Valuation, VarRef};

#[derive(Default)]
pub struct Blaster {
    cache: HashMap<*const TermNode, Rc<Vec<Lit>>>,
    /// Keeps cached terms alive so cache keys cannot be reused addresses.
    retained: Vec<Term>,
    vars: HashMap<String, Rc<Vec<Lit>>>,
    lit_true: Option<Lit>,
}

impl Blaster {
    pub fn new() -> Blaster {
        Blaster::default()
    }

    fn tru(&mut self, s: &mut dyn SatBackend) -> Lit {
        match self.lit_true {
            Some(l) => l,
            None => {
                let l = Lit::pos(s.new_var());
                s.add_clause(&[l]);
                self.lit_true = Some(l);
                l
            }
        }
    }

    fn fls(&mut self, s: &mut dyn SatBackend) -> Lit {
        !self.tru(s)
    }

    /// Bits of `name`, allocating them on first use.
    pub fn var_bits(&mut self, s: &mut dyn SatBackend, v: &VarRef) -> Rc<Vec<Lit>> {
        if let Some(bits) = self.vars.get(v.name.as_ref()) {
            assert_eq!(bits.len(), v.width as usize, "width clash for variable {}", v.name);
            return bits.clone();
        }
        let bits: Rc<Vec<Lit>> =
            Rc::new((0..v.width).map(|_| Lit::pos(s.new_var())).collect());
        self.vars.insert(v.name.to_string(), bits.clone());
        bits
    }

    /// Blast to a single literal; the term must have width 1.
    pub fn blast_bool(&mut self, s: &mut dyn SatBackend, t: &Term) -> Lit {
        let bits = self.blast(s, t);
        debug_assert_eq!(bits.len(), 1);
        bits[0]
    }

    pub fn blast(&mut self, s: &mut dyn SatBackend, t: &Term) -> Rc<Vec<Lit>> {
        let key = t.ptr();
        if let Some(bits) = self.cache.get(&key) {
            return bits.clone();
        }
        let bits: Vec<Lit> = match t.kind() {
            TermKind::Const(v) => {
                let tl = self.tru(s);
                (0..v.width()).map(|i| if v.bit(i) { tl } else { !tl }).collect()
            }
            TermKind::Var(vr) => return self.blast_var(s, t, vr),
            TermKind::Unary(op, a) => {
                let a = self.blast(s, a);
                match op {
                    UnOp::Not => a.iter().map(|&l| !l).collect(),
                    UnOp::Neg => {
                        // -a = ~a + 1
                        let inv: Vec<Lit> = a.iter().map(|&l| !l).collect();
                        let one = {
                            let tl = self.tru(s);
                            let mut v = vec![tl];
                            v.resize(inv.len(), !tl);
                            v
                        };
                        self.adder(s, &inv, &one)
                    }
                }
            }
            TermKind::Binary(op, a, b) => {
                let x = self.blast(s, a);
                let y = self.blast(s, b);
                match op {
                    BinOp::Add => self.adder(s, &x, &y),
                    BinOp::Sub => {
                        let inv: Vec<Lit> = y.iter().map(|&l| !l).collect();
                        let sum = self.adder_carry(s, &x, &inv, true).0;
                        sum
                    }
                    BinOp::Mul => self.multiplier(s, &x, &y),
                    BinOp::And => self.map2(s, &x, &y, |s2, b2, p, q| b2.and_gate(s2, p, q)),
                    BinOp::Or => self.map2(s, &x, &y, |s2, b2, p, q| b2.or_gate(s2, p, q)),
                    BinOp::Xor => self.map2(s, &x, &y, |s2, b2, p, q| b2.xor_gate(s2, p, q)),
                    BinOp::Shl => self.shifter(s, &x, b, ShiftKind::Left),
                    BinOp::Lshr => self.shifter(s, &x, b, ShiftKind::RightLogical),
                    BinOp::Ashr => self.shifter(s, &x, b, ShiftKind::RightArith),
                    BinOp::Eq => vec![self.equal(s, &x, &y)],
                    BinOp::Ne => {
                        let e = self.equal(s, &x, &y);
                        vec![!e]
                    }
                    BinOp::Ult => vec![self.less(s, &x, &y, false, false)],
                    BinOp::Ule => vec![self.less(s, &x, &y, false, true)],
                    BinOp::Slt => vec![self.less(s, &x, &y, true, false)],
                    BinOp::Sle => vec![self.less(s, &x, &y, true, true)],
                }
            }
            TermKind::Ite(c, a, b) => {
                let cl = self.blast_bool(s, c);
                let x = self.blast(s, a);
                let y = self.blast(s, b);
                x.iter().zip(y.iter()).map(|(&p, &q)| self.mux(s, cl, p, q)).collect()
            }
            TermKind::Cast { to, sign_extend, arg } => {
                let a = self.blast(s, arg);
                let to = *to as usize;
                if to <= a.len() {
                    a[..to].to_vec()
                } else {
                    let pad = if *sign_extend { *a.last().unwrap() } else { self.fls(s) };
                    let mut v = a.to_vec();
                    v.resize(to, pad);
                    v
                }
            }
        };
        debug_assert_eq!(bits.len(), t.width() as usize);
        let bits = Rc::new(bits);
        self.cache.insert(key, bits.clone());
        self.retained.push(t.clone());
        bits
    }

    fn blast_var(&mut self, s: &mut dyn SatBackend, t: &Term, vr: &VarRef) -> Rc<Vec<Lit>> {
        let key = t.ptr();
        let bits = self.var_bits(s, vr);
        self.cache.insert(key, bits.clone());
        self.retained.push(t.clone());
        bits
    }

    // -- gate primitives ----------------------------------------------------

    /// The constant value of a literal, if it is the shared true/false lit.
    fn lit_const(&self, l: Lit) -> Option<bool> {
        let t = self.lit_true?;
        if l == t {
            Some(true)
        } else if l == !t {
            Some(false)
        } else {
            None
        }
    }

    fn and_gate(&mut self, s: &mut dyn SatBackend, a: Lit, b: Lit) -> Lit {
        if a == b {
            return a;
        }
        if a == !b {
            return self.fls(s);
        }
        match (self.lit_const(a), self.lit_const(b)) {
            (Some(true), _) => return b,
            (_, Some(true)) => return a,
            (Some(false), _) | (_, Some(false)) => return self.fls(s),
            _ => {}
        }
        let o = Lit::pos(s.new_var());
        s.add_clause(&[!o, a]);
        s.add_clause(&[!o, b]);
        s.add_clause(&[o, !a, !b]);
        o
    }

    fn or_gate(&mut self, s: &mut dyn SatBackend, a: Lit, b: Lit) -> Lit {
        !self.and_gate(s, !a, !b)
    }

    fn xor_gate(&mut self, s: &mut dyn SatBackend, a: Lit, b: Lit) -> Lit {
        if a == b {
            return self.fls(s);
        }
        if a == !b {
            return self.tru(s);
        }
        match (self.lit_const(a), self.lit_const(b)) {
            (Some(true), _) => return !b,
            (_, Some(true)) => return !a,
            (Some(false), _) => return b,
            (_, Some(false)) => return a,
            _ => {}
        }
        let o = Lit::pos(s.new_var());
        s.add_clause(&[!o, a, b]);
        s.add_clause(&[!o, !a, !b]);
        s.add_clause(&[o, !a, b]);
        s.add_clause(&[o, a, !b]);
        o
    }

    fn mux(&mut self, s: &mut dyn SatBackend, c: Lit, t: Lit, e: Lit) -> Lit {
        if t == e {
            return t;
        }
        match self.lit_const(c) {
            Some(true) => return t,
            Some(false) => return e,
            None => {}
        }
        match (self.lit_const(t), self.lit_const(e)) {
            (Some(true), _) => return self.or_gate(s, c, e),
            (Some(false), _) => return self.and_gate(s, !c, e),
            (_, Some(true)) => return self.or_gate(s, !c, t),
            (_, Some(false)) => return self.and_gate(s, c, t),
            _ => {}
        }
        let o = Lit::pos(s.new_var());
        s.add_clause(&[!c, !t, o]);
        s.add_clause(&[!c, t, !o]);
        s.add_clause(&[c, !e, o]);
        s.add_clause(&[c, e, !o]);
        o
    }

    fn map2(
        &mut self,
        s: &mut dyn SatBackend,
        x: &[Lit],
        y: &[Lit],
        f: impl Fn(&mut dyn SatBackend, &mut Self, Lit, Lit) -> Lit,
    ) -> Vec<Lit> {
        x.iter().zip(y.iter()).map(|(&p, &q)| f(s, self, p, q)).collect()
    }

    fn adder(&mut self, s: &mut dyn SatBackend, x: &[Lit], y: &[Lit]) -> Vec<Lit> {
        self.adder_carry(s, x, y, false).0
    }

    /// Ripple-carry adder; returns (sum, carry-out).
    fn adder_carry(
        &mut self,
        s: &mut dyn SatBackend,
        x: &[Lit],
        y: &[Lit],
        carry_in: bool,
    ) -> (Vec<Lit>, Lit) {
        debug_assert_eq!(x.len(), y.len());
        let mut carry = if carry_in { self.tru(s) } else { self.fls(s) };
        let mut sum = Vec::with_capacity(x.len());
        for (&a, &b) in x.iter().zip(y.iter()) {
            let axb = self.xor_gate(s, a, b);
            sum.push(self.xor_gate(s, axb, carry));
            let c1 = self.and_gate(s, a, b);
            let c2 = self.and_gate(s, axb, carry);
            carry = self.or_gate(s, c1, c2);
        }
        (sum, carry)
    }

    fn multiplier(&mut self, s: &mut dyn SatBackend, x: &[Lit], y: &[Lit]) -> Vec<Lit> {
        let w = x.len();
        let f = self.fls(s);
        let mut acc: Vec<Lit> = vec![f; w];
        for (i, &yi) in y.iter().enumerate() {
            // (x << i) & {w copies of y_i}, truncated to w bits.
            let mut addend: Vec<Lit> = vec![f; w];
            for j in 0..w - i {
                addend[i + j] = self.and_gate(s, x[j], yi);
            }
            acc = self.adder(s, &acc, &addend);
        }
        acc
    }

    fn equal(&mut self, s: &mut dyn SatBackend, x: &[Lit], y: &[Lit]) -> Lit {
        let mut acc = self.tru(s);
        for (&a, &b) in x.iter().zip(y.iter()) {
            let d = self.xor_gate(s, a, b);
            acc = self.and_gate(s, acc, !d);
        }
        acc
    }

    /// `x < y` (or <=) as a literal; signed comparison flips the MSBs.
    fn less(
        &mut self,
        s: &mut dyn SatBackend,
        x: &[Lit],
        y: &[Lit],
        signed: bool,
        or_equal: bool,
    ) -> Lit {
        let mut x = x.to_vec();
        let mut y = y.to_vec();
        if signed {
            let m = x.len() - 1;
            x[m] = !x[m];
            y[m] = !y[m];
        }
        // From the LSB up: lt = (a<b) | (a==b & lt_below).
        let mut lt = if or_equal { self.tru(s) } else { self.fls(s) };
        for (&a, &b) in x.iter().zip(y.iter()) {
            let a_lt_b = self.and_gate(s, !a, b);
            let neq = self.xor_gate(s, a, b);
            let keep = self.and_gate(s, !neq, lt);
            lt = self.or_gate(s, a_lt_b, keep);
        }
        lt
    }

    fn shifter(
        &mut self,
        s: &mut dyn SatBackend,
        x: &[Lit],
        amount: &Term,
        kind: ShiftKind,
    ) -> Vec<Lit> {
        let w = x.len();
        let fill_const = match kind {
            ShiftKind::RightArith => None, // sign bit, handled below
            _ => Some(self.fls(s)),
        };
        let fill = fill_const.unwrap_or(*x.last().unwrap());
        if let Some(c) = amount.as_const() {
            let sh = c.to_u64().min(w as u64) as usize;
            return (0..w)
                .map(|i| match kind {
                    ShiftKind::Left => {
                        if i >= sh {
                            x[i - sh]
                        } else {
                            fill
                        }
                    }
                    _ => {
                        if i + sh < w {
                            x[i + sh]
                        } else {
                            fill
                        }
                    }
                })
                .collect();
        }
        let amt = self.blast(s, amount);
        let mut cur = x.to_vec();
        let mut big_bits: Vec<Lit> = Vec::new();
        for (k, &ak) in amt.iter().enumerate() {
            if 1u64 << k >= w as u64 {
                big_bits.push(ak);
                continue;
            }
            let step = 1usize << k;
            let shifted: Vec<Lit> = (0..w)
                .map(|i| match kind {
                    ShiftKind::Left => {
                        if i >= step {
                            cur[i - step]
                        } else {
                            fill
                        }
                    }
                    _ => {
                        if i + step < w {
                            cur[i + step]
                        } else {
                            fill
                        }
                    }
                })
                .collect();
            cur = cur
                .iter()
                .zip(shifted.iter())
                .map(|(&keep, &sh)| self.mux(s, ak, sh, keep))
                .collect();
        }
        let mut big = self.fls(s);
        for b in big_bits {
            big = self.or_gate(s, big, b);
        }
        cur.iter().map(|&l| self.mux(s, big, fill, l)).collect()
    }

    /// Read back the value of `v` from the backend's current model.
    /// Bits never mentioned in any clause default to 0.
    pub fn model_of(&mut self, s: &mut dyn SatBackend, v: &VarRef) -> BitVec {
        let bits = self.var_bits(s, v);
        let mut raw = 0u64;
        for (i, &l) in bits.iter().enumerate() {
            if s.model_value(l) {
                raw |= 1 << i;
            }
        }
        BitVec::new(v.width, raw)
    }

    pub fn model_valuation(&mut self, s: &mut dyn SatBackend, vars: &[VarRef]) -> Valuation {
        vars.iter().map(|v| (v.name.to_string(), self.model_of(s, v))).collect()
    }
}

#[derive(Clone, Copy)]
enum ShiftKind {
    Left,
    RightLogical,
    RightArith,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::sat::{Limits, SatResult, Solver};
    use crate::logic::term::Sign;
    use rand::{Rng, SeedableRng};

    /// Check that blasting agrees with direct evaluation for every valuation
    /// of the (at most two) free variables.
    fn check_exhaustive(t: &Term) {
        let vars = t.free_vars();
        assert!(vars.len() <= 2, "test helper supports at most two variables");
        let mut s = Solver::new();
        let mut b = Blaster::new();
        let out = b.blast(&mut s, t);
        let var_bits: Vec<_> = vars.iter().map(|v| b.var_bits(&mut s, v)).collect();
        let total: u32 = vars.iter().map(|v| v.width).sum();
        for m in 0u64..1 << total {
            let mut sigma = Valuation::new();
            let mut assumps = Vec::new();
            let mut off = 0;
            for (v, bits) in vars.iter().zip(var_bits.iter()) {
                let val = (m >> off) & ((1 << v.width) - 1);
                sigma.insert(v.name.to_string(), BitVec::new(v.width, val));
                for (i, &l) in bits.iter().enumerate() {
                    assumps.push(if val >> i & 1 == 1 { l } else { !l });
                }
                off += v.width;
            }
            assert_eq!(s.solve_limited(&assumps, &Limits::default()), SatResult::Sat);
            let mut got = 0u64;
            for (i, &l) in out.iter().enumerate() {
                if s.model_value(l) {
                    got |= 1 << i;
                }
            }
            let want = t.evaluate(&sigma).unwrap();
            assert_eq!(got, want.to_u64(), "term {t} at {sigma:?}");
        }
    }

    fn xy(w: u32, sign: Sign) -> (Term, Term) {
        (Term::var("x", w, sign), Term::var("y", w, sign))
    }

    #[test]
    fn arithmetic_matches_evaluator() {
        let (x, y) = xy(3, Sign::Unsigned);
        for op in [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::And, BinOp::Or, BinOp::Xor] {
            check_exhaustive(&Term::binary(op, x.clone(), y.clone()));
        }
        check_exhaustive(&Term::unary(UnOp::Neg, x.clone()));
        check_exhaustive(&Term::unary(UnOp::Not, x));
    }

    #[test]
    fn shifts_match_evaluator() {
        let (x, y) = xy(3, Sign::Unsigned);
        for op in [BinOp::Shl, BinOp::Lshr, BinOp::Ashr] {
            check_exhaustive(&Term::binary(op, x.clone(), y.clone()));
            // Constant amounts take a separate path in the shifter.
            for sh in 0..5 {
                check_exhaustive(&Term::binary(op, x.clone(), Term::uconst(3, sh)));
            }
        }
    }

    #[test]
    fn comparisons_match_evaluator() {
        let (x, y) = xy(3, Sign::Unsigned);
        for op in [BinOp::Eq, BinOp::Ne, BinOp::Ult, BinOp::Ule, BinOp::Slt, BinOp::Sle] {
            check_exhaustive(&Term::binary(op, x.clone(), y.clone()));
        }
    }

    #[test]
    fn ite_and_casts_match_evaluator() {
        let (x, y) = xy(3, Sign::Unsigned);
        let c = Term::binary(BinOp::Ult, x.clone(), y.clone());
        check_exhaustive(&Term::ite(c, x.clone(), y.clone()));
        check_exhaustive(&Term::cast(x.clone(), 5, false));
        check_exhaustive(&Term::cast(x.clone(), 5, true));
        check_exhaustive(&Term::cast(x, 2, false));
    }

    #[test]
    fn equality_with_constant_pins_model() {
        let x = Term::var("x", 4, Sign::Unsigned);
        let t = Term::eq(x, Term::uconst(4, 5));
        let mut s = Solver::new();
        let mut b = Blaster::new();
        let l = b.blast_bool(&mut s, &t);
        s.add_clause(&[l]);
        assert_eq!(s.solve_limited(&[], &Limits::default()), SatResult::Sat);
        let v = b.model_of(&mut s, &VarRef { name: "x".into(), width: 4, sign: Sign::Unsigned });
        assert_eq!(v.to_u64(), 5);
    }

    #[test]
    fn unsat_contradiction() {
        let x = Term::var("x", 4, Sign::Unsigned);
        let t = Term::and(
            Term::binary(BinOp::Ult, x.clone(), Term::uconst(4, 3)),
            Term::binary(BinOp::Ult, Term::uconst(4, 7), x),
        );
        let mut s = Solver::new();
        let mut b = Blaster::new();
        let l = b.blast_bool(&mut s, &t);
        s.add_clause(&[l]);
        assert_eq!(s.solve_limited(&[], &Limits::default()), SatResult::Unsat);
    }

    fn random_term(rng: &mut impl Rng, vars: &[(Term, u32)], w: u32, depth: u32) -> Term {
        if depth == 0 || rng.gen_bool(0.25) {
            if rng.gen_bool(0.5) {
                let candidates: Vec<&Term> =
                    vars.iter().filter(|(_, vw)| *vw == w).map(|(t, _)| t).collect();
                if !candidates.is_empty() {
                    return candidates[rng.gen_range(0..candidates.len())].clone();
                }
            }
            return Term::uconst(w, rng.gen_range(0..1 << w));
        }
        match rng.gen_range(0..12) {
            0 => Term::unary(UnOp::Neg, random_term(rng, vars, w, depth - 1)),
            1 => Term::unary(UnOp::Not, random_term(rng, vars, w, depth - 1)),
            2 => {
                let from = rng.gen_range(1..=6);
                Term::cast(random_term(rng, vars, from, depth - 1), w, rng.gen())
            }
            3 => {
                let c = Term::binary(
                    BinOp::Ult,
                    random_term(rng, vars, w, depth - 1),
                    random_term(rng, vars, w, depth - 1),
                );
                Term::ite(
                    c,
                    random_term(rng, vars, w, depth - 1),
                    random_term(rng, vars, w, depth - 1),
                )
            }
            n => {
                let op = [
                    BinOp::Add,
                    BinOp::Sub,
                    BinOp::Mul,
                    BinOp::And,
                    BinOp::Or,
                    BinOp::Xor,
                    BinOp::Shl,
                    BinOp::Ashr,
                ][n - 4];
                Term::binary(
                    op,
                    random_term(rng, vars, w, depth - 1),
                    random_term(rng, vars, w, depth - 1),
                )
            }
        }
    }

    #[test]
    fn random_terms_match_evaluator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vars = vec![
            (Term::var("x", 4, Sign::Unsigned), 4),
            (Term::var("y", 3, Sign::Signed), 3),
        ];
        for _ in 0..60 {
            let w = rng.gen_range(1..=5);
            let t = random_term(&mut rng, &vars, w, 3);
            if t.free_vars().len() <= 2 {
                check_exhaustive(&t);
            }
        }
    }
}
