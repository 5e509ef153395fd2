//! Driver for the mmtrace toolkit: example geometries, seeded test
//! functions, invariant suites and the command implementations behind the
//! `mmtrace` binary.

pub mod checks;
pub mod commands;
pub mod eval;
pub mod geometry;
pub mod suite;

use thiserror::Error;

pub use geometry::{Geometry, GeometrySpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mmtrace::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad input: {0}")]
    Input(String),
}

/// Exit status: every error is an input problem; invariant failures are
/// reported through [`commands::Outcome`] instead.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
