//! Bit-vector terms and the propositional backend they are solved with.

pub mod bitvec;
pub mod blast;
pub mod cnf;
pub mod sat;
pub mod session;
pub mod term;

pub use bitvec::BitVec;
pub use cnf::{CnfFormula, Lit, Var};
pub use sat::{SatResult, Solver};
pub use session::SolverSession;
pub use term::{extend_width, BinOp, Sign, Term, TermKind, UnOp, Valuation, VarRef};
