//! Parsing, type checking, normalization, and call-graph construction for
//! the input language (`.mc` files).

pub mod ast;
pub mod callgraph;
pub mod lexer;
pub mod normalize;
pub mod parser;
pub mod pretty;

pub use ast::{Program, ProcedureAST, TypeWidths};
pub use callgraph::build_call_graph;
pub use normalize::normalize;
pub use parser::parse;
pub use pretty::print_program;

use ast::Loc;

/// A frontend error with source position, rendered `file:line:col: message`.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{file}:{loc}: {msg}")]
pub struct Diagnostic {
    pub file: String,
    pub loc: Loc,
    pub msg: String,
}

impl Diagnostic {
    pub fn new(file: &str, loc: Loc, msg: &str) -> Diagnostic {
        Diagnostic { file: file.to_string(), loc, msg: msg.to_string() }
    }
}
