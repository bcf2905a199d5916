//! Verifier and interleaving explorer for a small concurrent language with
//! per-variable mover specifications.
//!
//! The pipeline: parse a program, compile its mover clauses into an
//! effect-assignment over atomic actions, check each function and thread with
//! a strongest-postcondition proof search, and (independently) enumerate the
//! program's interleavings to test assertions directly.

pub mod ast;
pub mod effects;
pub mod parser;
pub mod printer;
pub mod space;
pub mod rel;
pub mod action;
pub mod moverspec;
pub mod checker;
pub mod explorer;
pub mod cli;
