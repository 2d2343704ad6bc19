//! Nurse-rostering engine: instance model, constraint evaluation,
//! lexicographic anytime search, an exhaustive oracle for tiny instances,
//! a seeded instance generator and a benchmark harness.

pub mod bench;
pub mod constraints;
pub mod model;
pub mod generator;
pub mod oracle;
pub mod search;

#[cfg(test)]
mod testutil;

pub use constraints::{evaluate, Evaluation, PenaltyVector, Report, Violation};
pub use model::{Instance, Roster};
pub use search::{solve, CellDirectives, Incumbent, SearchConfig, SearchOutcome, Strategy};
