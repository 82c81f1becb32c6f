//! Toolkit for synthesizing backtracking-rich SAT reasoning traces with
//! controlled error injection, deriving matched monotonic control corpora,
//! and measuring self-correction behavior in arbitrary model output.
//!
//! The crate is organized around a small data model:
//!
//! - [`cnf`] — CNF formulas, partial assignments, exact clause evaluation,
//!   DIMACS I/O, and seeded generation of satisfiable instances.
//! - [`trace`] — event-level reasoning traces plus a line-oriented text
//!   grammar with strict and lenient parsers.
//! - [`engine`] — a witness-guided backtracking engine that emits traces
//!   containing deliberate wrong decisions, explicit conflicts, and repairs.
//! - [`verifier`] — final-assignment judging and full-trace auditing.
//! - [`linearize`] — control-corpus construction by removing conflict and
//!   backtracking spans.
//! - [`analyze`] — backtracking detection and corpus metrics over arbitrary
//!   response text.
//! - [`dataset`] — exportable training-record schema shared by corpora.

pub mod analyze;
pub mod cnf;
pub mod dataset;
pub mod engine;
pub mod linearize;
pub mod trace;
pub mod verifier;

pub use cnf::{Assignment, Clause, ClauseStatus, CnfError, Formula, Literal};
pub use trace::{Trace, TraceEvent};
