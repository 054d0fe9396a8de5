//! reprorag — a benchmarking toolkit that quantifies the reproducibility of
//! vector-retrieval pipelines.
//!
//! The library builds ANN indexes under controlled randomness, executes
//! repeated or perturbed retrieval runs, and scores the agreement between
//! runs with a suite of list-comparison metrics (exact match rate, Jaccard,
//! Kendall's tau, rank-biased overlap, score stability, embedding drift).
//!
//! Modules:
//! - [`core`]: domain types, canonical result ordering, config fingerprints,
//!   and the seeded synthetic corpus generator.
//! - [`metrics`]: the reproducibility metric suite.
//! - [`index`]: exact and approximate vector indexes (Flat, IVF, HNSW, LSH)
//!   with explicit seeded randomness and append-only insertion.
//! - [`precision`]: floating-point grid quantization (FP32/FP16/BF16/TF32)
//!   and drift measurement.
//! - [`distributed`]: deterministic scatter-gather retrieval over sharded
//!   corpora with a versioned wire protocol.
//! - [`harness`]: scenario runners that orchestrate the experiments and
//!   produce serializable reports.
//! - [`io`]: embedding file ingestion, report serialization, plot-data CSVs.
//! - [`cli`]: the command-line surface.
//!
//! All randomness flows through [`rng::SplitMix64`], a counter-based 64-bit
//! generator with fixed published constants, so every result is reproducible
//! from a single seed.

pub mod cli;
pub mod core;
pub mod distributed;
pub mod harness;
pub mod index;
pub mod io;
pub mod metrics;
pub mod parallel;
pub mod precision;
pub mod rng;
pub(crate) mod wire;

use thiserror::Error;

/// Error type shared across the toolkit.
///
/// Variants map onto the CLI exit-code contract: anything that reflects bad
/// input (arguments, shapes, values, file contents) is a validation error
/// (exit 2), while I/O failures are runtime errors (exit 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate id: {0:?}")]
    DuplicateId(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadMismatch { expected: u64, found: u64 },

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
