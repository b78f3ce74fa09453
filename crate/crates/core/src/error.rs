use thiserror::Error;

use crate::netgen::TracedLine;

/// Errors raised by the curvature-net library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("immersion degenerates at parameter ({u}, {v})")]
    Immersion { u: f64, v: f64 },

    #[error("principal direction is ambiguous at umbilic parameter ({u}, {v})")]
    UmbilicAmbiguity { u: f64, v: f64 },

    #[error("chart `{chart}` does not support {operation}")]
    UnsupportedChart {
        chart: String,
        operation: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("principal line trace failed: {reason}")]
    TraceFailure {
        reason: String,
        partial: Box<TracedLine>,
    },

    #[error("net construction failed: {0}")]
    NetConstruction(String),

    #[error("cubic does not realize the {expected} pattern (found {found})")]
    PatternMismatch { expected: String, found: String },

    #[error("degenerate vertex star at vertex {vertex}: {reason}")]
    DegenerateStar { vertex: usize, reason: String },

    #[error("edge {edge} at vertex {vertex} has no second face")]
    NoSecondFace { vertex: usize, edge: usize },

    #[error("degenerate triangle at vertex {vertex}")]
    DegenerateTriangle { vertex: usize },

    #[error("tan variant overflows for dihedral angle {theta}")]
    VariantOverflow { theta: f64 },

    #[error("area maximizing edge {edge} at vertex {vertex} has non-positive circumcentric area {area:e}")]
    AreaPositivity { vertex: usize, edge: usize, area: f64 },

    #[error("rate fit needs at least two usable points, got {0}")]
    FitUnavailable(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
