//! Propositional literals, clauses, and DIMACS output.

use std::fmt;
use std::io::{self, Write};

/// Variable index, 0-based.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Var(pub u32);

/// Literal encoded as `var << 1 | sign` where sign 1 means negated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, negated: bool) -> Lit {
        Lit(v.0 << 1 | negated as u32)
    }

    pub fn pos(v: Var) -> Lit {
        Lit::new(v, false)
    }

    pub fn neg(v: Var) -> Lit {
        Lit::new(v, true)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_neg(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn idx(self) -> usize {
        self.0 as usize
    }

    /// 1-based signed DIMACS encoding.
    pub fn to_dimacs(self) -> i64 {
        let v = (self.var().0 + 1) as i64;
        if self.is_neg() {
            -v
        } else {
            v
        }
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A clause set kept purely for export and replay; the solver keeps its own
/// internal representation.
#[derive(Default, Clone)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn add(&mut self, clause: &[Lit]) {
        for l in clause {
            self.num_vars = self.num_vars.max(l.var().0 + 1);
        }
        self.clauses.push(clause.to_vec());
    }

    pub fn write_dimacs<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            for l in c {
                write!(w, "{} ", l.to_dimacs())?;
            }
            writeln!(w, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_roundtrip() {
        let v = Var(7);
        let p = Lit::pos(v);
        assert_eq!(p.var(), v);
        assert!(!p.is_neg());
        assert!((!p).is_neg());
        assert_eq!(!!p, p);
        assert_eq!(p.to_dimacs(), 8);
        assert_eq!((!p).to_dimacs(), -8);
    }

    #[test]
    fn dimacs_output() {
        let mut f = CnfFormula::default();
        f.add(&[Lit::pos(Var(0)), Lit::neg(Var(1))]);
        f.add(&[Lit::neg(Var(0))]);
        let mut buf = Vec::new();
        f.write_dimacs(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "p cnf 2 2\n1 -2 0\n-1 0\n");
    }
}
