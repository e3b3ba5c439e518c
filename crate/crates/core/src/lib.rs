//! Loop IR, C-subset frontend, loop transformations, tracing interpreter and
//! benchmark kernel generator.

pub mod frontend;
pub mod ir;
pub mod kernelgen;
pub mod oracle;
pub mod randprog;
pub mod scalar;
pub mod transforms;
pub mod validate;

pub use frontend::{emit_source, parse_program, ParseError};
pub use ir::{Directive, Expr, Loop, LoopSite, Program, Stmt};
pub use validate::{validate, ValidationReport};

/// Interpreter store with the default 64-bit float model.
pub type Store = oracle::Store<f64>;
/// Interpreter value with the default 64-bit float model.
pub type Value = oracle::Value<f64>;
