//! Bit-precise interprocedural termination analysis for a small imperative
//! language with fixed-width machine-integer semantics.
//!
//! The pipeline: parse (`frontend`) -> symbolic transition systems (`ssa`)
//! -> template-based synthesis over a propositional solver (`logic`,
//! `absdom`, `synth`) -> per-procedure verdicts (`driver`). The `oracle`
//! module holds an exhaustive-state termination oracle used for testing at
//! small bit-widths.

pub mod absdom;
pub mod corpus;
pub mod driver;
pub mod frontend;
pub mod logic;
pub mod oracle;
pub mod report;
pub mod ssa;
pub mod synth;
