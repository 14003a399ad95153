//! mergeguard: verifies *semantic conflict-freedom* of three-way program
//! merges over a small imperative language.
//!
//! Given a base program O, two variants A and B, and a merge candidate M,
//! the verifier proves (or refutes) that M preserves each variant's semantic
//! changes on the observable output and introduces no new behavior. The
//! pipeline is: n-way AST differencing into a shared program with holes plus
//! one edit per version, then compositional relational verification over the
//! four versions (uninterpreted-function summaries for shared code, lockstep
//! product programs at the holes, Houdini invariant inference for loops),
//! discharged by an external SMT solver.

pub mod ast;
pub mod deps;
pub mod interp;
pub mod logic;
pub mod ndiff;
pub mod oracle;
pub mod parse;
pub mod pretty;
pub mod product;
pub mod report;
pub mod rpc;
pub mod smt;
