//! Relational cost analysis for a small functional language.
//!
//! The checker takes two expressions (or one expression against itself) and
//! a relational type with a cost bound, and produces an arithmetic
//! obligation whose validity certifies the bound on the difference in
//! evaluation cost. Unary types bound the absolute cost of a single
//! expression from below and above; relational types additionally track
//! which parts of the two runs are known to be identical.
//!
//! Crate layout:
//! - [`ast`]: index terms, constraints, unary and relational types, expressions
//! - [`pretty`]: display impls for the concrete syntax
//! - [`wf`]: sorting of index terms and well-formedness of types
//! - [`subty`]: constraint-emitting subtyping for both type layers
//! - [`constraint`]: normalization and existential elimination
//! - [`solve`]: bounded grounding solver and SMT-LIB2 export
//! - [`eval`]: cost-instrumented interpreter
//! - [`coerce`]: subtyping witnesses as ordinary programs
//! - [`bidi`]: the bidirectional checker itself
//! - [`surface`]: parser for the `.brc` source format
//! - [`driver`]: file checking, reports, benchmark runner

pub mod ast;
pub mod bidi;
pub mod coerce;
pub mod driver;
pub mod surface;
pub mod constraint;
pub mod eval;
pub mod pretty;
pub mod solve;
pub mod subty;
pub mod wf;
