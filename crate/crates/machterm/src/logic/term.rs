//! Quantifier-free fixed-width bit-vector terms.
//!
//! Terms are immutable reference-counted DAG nodes. Boolean formulas are
//! width-1 terms. Arithmetic wraps modulo `2^width`; comparisons come in
//! unsigned and signed flavours.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use super::bitvec::BitVec;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Sign {
    Unsigned,
    Signed,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct VarRef {
    pub name: Rc<str>,
    pub width: u32,
    pub sign: Sign,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum UnOp {
    /// Bitwise complement; on width-1 terms this is Boolean negation.
    Not,
    Neg,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Ashr,
    Eq,
    Ne,
    Ult,
    Ule,
    Slt,
    Sle,
}

impl BinOp {
    pub fn is_compare(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Ult | BinOp::Ule | BinOp::Slt | BinOp::Sle)
    }
}

#[derive(Debug)]
pub enum TermKind {
    Const(BitVec),
    Var(VarRef),
    Unary(UnOp, Term),
    Binary(BinOp, Term, Term),
    Ite(Term, Term, Term),
    Cast { to: u32, sign_extend: bool, arg: Term },
}

#[derive(Debug)]
pub struct TermNode {
    pub kind: TermKind,
    pub width: u32,
}

/// Shared immutable term handle. Equality of handles is pointer equality;
/// use it only for memoisation, not for semantic comparison.
#[derive(Clone, Debug)]
pub struct Term(Rc<TermNode>);

#[derive(Debug, thiserror::Error)]
#[error("unbound variable `{0}` in valuation")]
pub struct UnboundVar(pub String);

pub type Valuation = HashMap<String, BitVec>;

impl Term {
    fn mk(kind: TermKind, width: u32) -> Term {
        Term(Rc::new(TermNode { kind, width }))
    }

    pub fn node(&self) -> &TermNode {
        &self.0
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub(crate) fn ptr(&self) -> *const TermNode {
        Rc::as_ptr(&self.0)
    }

    pub fn constant(v: BitVec) -> Term {
        Term::mk(TermKind::Const(v), v.width())
    }

    pub fn uconst(width: u32, v: u64) -> Term {
        Term::constant(BitVec::new(width, v))
    }

    pub fn iconst(width: u32, v: i64) -> Term {
        Term::constant(BitVec::from_i64(width, v))
    }

    pub fn tt() -> Term {
        Term::constant(BitVec::bool(true))
    }

    pub fn ff() -> Term {
        Term::constant(BitVec::bool(false))
    }

    pub fn var(name: &str, width: u32, sign: Sign) -> Term {
        Term::mk(TermKind::Var(VarRef { name: name.into(), width, sign }), width)
    }

    pub fn var_ref(v: VarRef) -> Term {
        let width = v.width;
        Term::mk(TermKind::Var(v), width)
    }

    pub fn as_const(&self) -> Option<BitVec> {
        match self.kind() {
            TermKind::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self.as_const(), Some(v) if v.width() == 1 && v.is_true())
    }

    pub fn is_false(&self) -> bool {
        matches!(self.as_const(), Some(v) if v.width() == 1 && !v.is_true())
    }

    pub fn unary(op: UnOp, a: Term) -> Term {
        if let Some(v) = a.as_const() {
            return Term::constant(match op {
                UnOp::Not => v.not(),
                UnOp::Neg => v.neg(),
            });
        }
        let w = a.width();
        Term::mk(TermKind::Unary(op, a), w)
    }

    pub fn binary(op: BinOp, a: Term, b: Term) -> Term {
        debug_assert_eq!(
            a.width(),
            if matches!(op, BinOp::Shl | BinOp::Lshr | BinOp::Ashr) { a.width() } else { b.width() },
            "operand width mismatch for {op:?}"
        );
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Term::constant(match op {
                BinOp::Add => x.add(y),
                BinOp::Sub => x.sub(y),
                BinOp::Mul => x.mul(y),
                BinOp::And => x.and(y),
                BinOp::Or => x.or(y),
                BinOp::Xor => x.xor(y),
                BinOp::Shl => x.shl(y),
                BinOp::Lshr => x.lshr(y),
                BinOp::Ashr => x.ashr(y),
                BinOp::Eq => BitVec::bool(x == y),
                BinOp::Ne => BitVec::bool(x != y),
                BinOp::Ult => BitVec::bool(x.ult(y)),
                BinOp::Ule => BitVec::bool(x.ule(y)),
                BinOp::Slt => BitVec::bool(x.slt(y)),
                BinOp::Sle => BitVec::bool(x.sle(y)),
            });
        }
        let w = if op.is_compare() { 1 } else { a.width() };
        Term::mk(TermKind::Binary(op, a, b), w)
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        debug_assert_eq!(c.width(), 1);
        debug_assert_eq!(a.width(), b.width());
        if c.is_true() {
            return a;
        }
        if c.is_false() {
            return b;
        }
        let w = a.width();
        Term::mk(TermKind::Ite(c, a, b), w)
    }

    pub fn cast(a: Term, to: u32, sign_extend: bool) -> Term {
        if a.width() == to {
            return a;
        }
        if let Some(v) = a.as_const() {
            return Term::constant(v.cast(to, sign_extend));
        }
        Term::mk(TermKind::Cast { to, sign_extend, arg: a }, to)
    }

    // Boolean connectives (width-1 sugar).

    pub fn not(a: Term) -> Term {
        debug_assert_eq!(a.width(), 1);
        Term::unary(UnOp::Not, a)
    }

    pub fn and(a: Term, b: Term) -> Term {
        if a.is_true() {
            return b;
        }
        if b.is_true() {
            return a;
        }
        if a.is_false() || b.is_false() {
            return Term::ff();
        }
        Term::binary(BinOp::And, a, b)
    }

    pub fn or(a: Term, b: Term) -> Term {
        if a.is_false() {
            return b;
        }
        if b.is_false() {
            return a;
        }
        if a.is_true() || b.is_true() {
            return Term::tt();
        }
        Term::binary(BinOp::Or, a, b)
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::or(Term::not(a), b)
    }

    pub fn and_all<I: IntoIterator<Item = Term>>(ts: I) -> Term {
        ts.into_iter().fold(Term::tt(), Term::and)
    }

    pub fn or_all<I: IntoIterator<Item = Term>>(ts: I) -> Term {
        ts.into_iter().fold(Term::ff(), Term::or)
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::binary(BinOp::Eq, a, b)
    }

    /// Wrap-around evaluation under a total valuation of the free variables.
    pub fn evaluate(&self, sigma: &Valuation) -> Result<BitVec, UnboundVar> {
        let mut memo: HashMap<*const TermNode, BitVec> = HashMap::new();
        self.eval_memo(sigma, &mut memo)
    }

    fn eval_memo(
        &self,
        sigma: &Valuation,
        memo: &mut HashMap<*const TermNode, BitVec>,
    ) -> Result<BitVec, UnboundVar> {
        if let Some(v) = memo.get(&self.ptr()) {
            return Ok(*v);
        }
        let v = match self.kind() {
            TermKind::Const(v) => *v,
            TermKind::Var(vr) => *sigma
                .get(vr.name.as_ref())
                .ok_or_else(|| UnboundVar(vr.name.to_string()))?,
            TermKind::Unary(op, a) => {
                let a = a.eval_memo(sigma, memo)?;
                match op {
                    UnOp::Not => a.not(),
                    UnOp::Neg => a.neg(),
                }
            }
            TermKind::Binary(op, a, b) => {
                let x = a.eval_memo(sigma, memo)?;
                let y = b.eval_memo(sigma, memo)?;
                match op {
                    BinOp::Add => x.add(y),
                    BinOp::Sub => x.sub(y),
                    BinOp::Mul => x.mul(y),
                    BinOp::And => x.and(y),
                    BinOp::Or => x.or(y),
                    BinOp::Xor => x.xor(y),
                    BinOp::Shl => x.shl(y),
                    BinOp::Lshr => x.lshr(y),
                    BinOp::Ashr => x.ashr(y),
                    BinOp::Eq => BitVec::bool(x == y),
                    BinOp::Ne => BitVec::bool(x != y),
                    BinOp::Ult => BitVec::bool(x.ult(y)),
                    BinOp::Ule => BitVec::bool(x.ule(y)),
                    BinOp::Slt => BitVec::bool(x.slt(y)),
                    BinOp::Sle => BitVec::bool(x.sle(y)),
                }
            }
            TermKind::Ite(c, a, b) => {
                if c.eval_memo(sigma, memo)?.is_true() {
                    a.eval_memo(sigma, memo)?
                } else {
                    b.eval_memo(sigma, memo)?
                }
            }
            TermKind::Cast { to, sign_extend, arg } => {
                arg.eval_memo(sigma, memo)?.cast(*to, *sign_extend)
            }
        };
        memo.insert(self.ptr(), v);
        Ok(v)
    }

    /// Replace variables by terms. Unmapped variables are kept.
    pub fn substitute(&self, map: &HashMap<String, Term>) -> Term {
        let mut memo: HashMap<*const TermNode, Term> = HashMap::new();
        self.subst_memo(map, &mut memo)
    }

    fn subst_memo(
        &self,
        map: &HashMap<String, Term>,
        memo: &mut HashMap<*const TermNode, Term>,
    ) -> Term {
        if let Some(t) = memo.get(&self.ptr()) {
            return t.clone();
        }
        let t = match self.kind() {
            TermKind::Const(_) => self.clone(),
            TermKind::Var(vr) => match map.get(vr.name.as_ref()) {
                Some(t) => {
                    debug_assert_eq!(t.width(), vr.width, "substitution width mismatch for {}", vr.name);
                    t.clone()
                }
                None => self.clone(),
            },
            TermKind::Unary(op, a) => Term::unary(*op, a.subst_memo(map, memo)),
            TermKind::Binary(op, a, b) => {
                Term::binary(*op, a.subst_memo(map, memo), b.subst_memo(map, memo))
            }
            TermKind::Ite(c, a, b) => Term::ite(
                c.subst_memo(map, memo),
                a.subst_memo(map, memo),
                b.subst_memo(map, memo),
            ),
            TermKind::Cast { to, sign_extend, arg } => {
                Term::cast(arg.subst_memo(map, memo), *to, *sign_extend)
            }
        };
        memo.insert(self.ptr(), t.clone());
        t
    }

    pub fn free_vars(&self) -> Vec<VarRef> {
        let mut seen: HashSet<*const TermNode> = HashSet::new();
        let mut names: HashSet<Rc<str>> = HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.ptr()) {
                continue;
            }
            match t.kind() {
                TermKind::Const(_) => {}
                TermKind::Var(vr) => {
                    if names.insert(vr.name.clone()) {
                        out.push(vr.clone());
                    }
                }
                TermKind::Unary(_, a) => stack.push(a.clone()),
                TermKind::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                TermKind::Ite(c, a, b) => {
                    stack.push(c.clone());
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                TermKind::Cast { arg, .. } => stack.push(arg.clone()),
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }
}

/// Widen a linear template expression by `extra` bits so that its internal
/// arithmetic cannot overflow: every variable occurrence is re-read at the
/// wider signed width (unsigned sources zero-extend, signed sources
/// sign-extend), constants are sign-extended, and comparisons become signed
/// comparisons at the wider width.
pub fn extend_width(t: &Term, extra: u32) -> Term {
    let mut memo: HashMap<*const TermNode, Term> = HashMap::new();
    extend_memo(t, extra, &mut memo)
}

fn extend_memo(t: &Term, extra: u32, memo: &mut HashMap<*const TermNode, Term>) -> Term {
    if let Some(r) = memo.get(&t.ptr()) {
        return r.clone();
    }
    let r = match t.kind() {
        TermKind::Const(v) => {
            Term::constant(v.cast(v.width() + extra, true))
        }
        TermKind::Var(vr) => Term::cast(
            Term::var_ref(vr.clone()),
            vr.width + extra,
            vr.sign == Sign::Signed,
        ),
        TermKind::Unary(op, a) => Term::unary(*op, extend_memo(a, extra, memo)),
        TermKind::Binary(op, a, b) => {
            let x = extend_memo(a, extra, memo);
            let y = extend_memo(b, extra, memo);
            let (x, y) = unify_widths(x, y);
            let op = match op {
                BinOp::Ult => BinOp::Slt,
                BinOp::Ule => BinOp::Sle,
                other => *other,
            };
            Term::binary(op, x, y)
        }
        TermKind::Ite(c, a, b) => {
            let c = extend_memo(c, extra, memo);
            let x = extend_memo(a, extra, memo);
            let y = extend_memo(b, extra, memo);
            let (x, y) = unify_widths(x, y);
            Term::ite(c, x, y)
        }
        TermKind::Cast { to, sign_extend, arg } => {
            Term::cast(extend_memo(arg, extra, memo), to + extra, *sign_extend)
        }
    };
    memo.insert(t.ptr(), r.clone());
    r
}

fn unify_widths(a: Term, b: Term) -> (Term, Term) {
    if a.width() == 1 && b.width() == 1 {
        return (a, b);
    }
    let w = a.width().max(b.width());
    (Term::cast(a, w, true), Term::cast(b, w, true))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            TermKind::Const(v) => {
                if v.width() == 1 {
                    write!(f, "{}", if v.is_true() { "true" } else { "false" })
                } else {
                    write!(f, "{}", v.to_u64())
                }
            }
            TermKind::Var(vr) => write!(f, "{}", vr.name),
            TermKind::Unary(op, a) => {
                let s = match op {
                    UnOp::Not => {
                        if a.width() == 1 {
                            "!"
                        } else {
                            "~"
                        }
                    }
                    UnOp::Neg => "-",
                };
                write!(f, "{s}{a}")
            }
            TermKind::Binary(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::And => {
                        if self.width() == 1 {
                            "&&"
                        } else {
                            "&"
                        }
                    }
                    BinOp::Or => {
                        if self.width() == 1 {
                            "||"
                        } else {
                            "|"
                        }
                    }
                    BinOp::Xor => "^",
                    BinOp::Shl => "<<",
                    BinOp::Lshr => ">>u",
                    BinOp::Ashr => ">>s",
                    BinOp::Eq => "==",
                    BinOp::Ne => "!=",
                    BinOp::Ult => "<u",
                    BinOp::Ule => "<=u",
                    BinOp::Slt => "<s",
                    BinOp::Sle => "<=s",
                };
                write!(f, "({a} {s} {b})")
            }
            TermKind::Ite(c, a, b) => write!(f, "({c} ? {a} : {b})"),
            TermKind::Cast { to, sign_extend, arg } => {
                write!(f, "({}{}){}", if *sign_extend { "s" } else { "u" }, to, arg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(pairs: &[(&str, BitVec)]) -> Valuation {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn eval_wraps_unsigned() {
        let x = Term::var("x", 8, Sign::Unsigned);
        let t = Term::binary(BinOp::Add, x, Term::uconst(8, 1));
        let v = t.evaluate(&val(&[("x", BitVec::new(8, 255))])).unwrap();
        assert_eq!(v.to_u64(), 0);
    }

    #[test]
    fn eval_wraps_signed() {
        let x = Term::var("x", 8, Sign::Signed);
        let t = Term::binary(BinOp::Add, x, Term::iconst(8, 1));
        let v = t.evaluate(&val(&[("x", BitVec::from_i64(8, 127))])).unwrap();
        assert_eq!(v.to_i64(), -128);
    }

    #[test]
    fn contradiction_is_false() {
        let x = Term::var("b", 1, Sign::Unsigned);
        let t = Term::and(x.clone(), Term::not(x));
        for b in [false, true] {
            let v = t.evaluate(&val(&[("b", BitVec::bool(b))])).unwrap();
            assert!(!v.is_true());
        }
    }

    #[test]
    fn unbound_variable_errors() {
        let x = Term::var("x", 8, Sign::Unsigned);
        assert!(x.evaluate(&Valuation::new()).is_err());
    }

    #[test]
    fn extension_defeats_template_overflow() {
        // -1*(x - x') > 0 with x=127, x'=-128 (signed 8-bit): at width 8 the
        // difference overflows to -1 and the negated product compares 1 > 0;
        // at width 9 the product evaluates to 255 > 0 as well, but for
        // x=255, x'=0 unsigned the two widths disagree.
        let x = Term::var("x", 8, Sign::Unsigned);
        let xp = Term::var("x'", 8, Sign::Unsigned);
        let diff = Term::binary(BinOp::Sub, x, xp);
        let prod = Term::binary(BinOp::Mul, Term::iconst(8, -1), diff);
        let gt0 = Term::binary(BinOp::Slt, Term::iconst(8, 0), prod);
        let sigma = val(&[("x", BitVec::new(8, 255)), ("x'", BitVec::new(8, 0))]);
        // Narrow evaluation is fooled by the wrap-around.
        assert!(gt0.evaluate(&sigma).unwrap().is_true());
        // Extended evaluation is exact: -1*(255-0) = -255 < 0.
        let wide = extend_width(&gt0, 2);
        assert!(!wide.evaluate(&sigma).unwrap().is_true());
    }

    #[test]
    fn extension_preserves_exact_products() {
        // l*x for l in {-1,0,1} over u4 evaluated at width 5+ equals the
        // exact integer product.
        for l in [-1i64, 0, 1] {
            for x in 0u64..16 {
                let xv = Term::var("x", 4, Sign::Unsigned);
                let t = Term::binary(BinOp::Mul, Term::iconst(4, l), xv);
                let wide = extend_width(&t, 2);
                let v = wide.evaluate(&val(&[("x", BitVec::new(4, x))])).unwrap();
                assert_eq!(v.to_i64(), l * x as i64);
            }
        }
    }

    #[test]
    fn constant_only_extension_is_value_stable() {
        let t = Term::binary(BinOp::Add, Term::iconst(8, 3), Term::iconst(8, 4));
        let wide = extend_width(&t, 3);
        assert_eq!(wide.as_const().unwrap().to_i64(), 7);
    }

    #[test]
    fn substitution_renames() {
        let x = Term::var("x", 8, Sign::Unsigned);
        let t = Term::binary(BinOp::Add, x, Term::uconst(8, 1));
        let map: HashMap<String, Term> =
            [("x".to_string(), Term::var("y", 8, Sign::Unsigned))].into();
        let r = t.substitute(&map);
        assert_eq!(r.free_vars()[0].name.as_ref(), "y");
    }
}
