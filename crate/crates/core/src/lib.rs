//! Pipeline for generating verified embedded C from mixed natural-language
//! and ACSL specifications.
//!
//! The library is organized around the flow of one experiment cell:
//!
//! 1. [`bundle`] loads a case-study bundle (interface context, specification
//!    items, optional reference program).
//! 2. [`prompt`] renders system/user/feedback prompts from a specification
//!    selection.
//! 3. [`gateway`] sends prompts to an LLM backend (HTTP or replayable mock)
//!    and extracts a C candidate from the response.
//! 4. [`critics`] runs the external tools: compiler, deductive verifier, and
//!    equivalence checker.
//! 5. [`quality`] is the internal critic: C lexing, LoC, and the adapted
//!    power-of-10 rule set (rule 5 excluded).
//! 6. [`pipeline`] orchestrates cells and the full experiment matrix.
//! 7. [`dataset`] and [`report`] turn result sets into fine-tuning datasets
//!    and result tables.

pub mod bundle;
pub mod config;
pub mod critics;
pub mod dataset;
pub mod gateway;
pub mod pipeline;
pub mod prompt;
pub mod quality;
pub mod report;

pub use bundle::{CaseBundle, InterfaceContext, SpecCombination, SpecItem, SpecKind};
pub use gateway::{GeneratedCandidate, GenerationParams, RawResponse};
pub use pipeline::{CellConfig, CellResult, ResultSet, Verdict};
