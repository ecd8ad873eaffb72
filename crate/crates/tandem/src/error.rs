use crate::pathspace::Sign;
use crate::predict::Timing;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Arm lengths, splitter speeds or delay lines violate a physical bound.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Operation defined only for detectable paths was given a lost one.
    #[error("{operation} is undefined for a lost path (photon 2 left by the unused port)")]
    LostPath { operation: &'static str },

    /// A timing class for which Multisimultaneity states no combination rule.
    #[error("unsupported timing class {0}: no outcome rule is specified for it")]
    UnsupportedTiming(String),

    /// A Multisimultaneity joint probability left [0, 1] at these phases.
    #[error(
        "invalid probability for timing {timing}: joint({sigma},{omega}) = {value} lies outside [0, 1]"
    )]
    InvalidProbability {
        timing: Timing,
        sigma: Sign,
        omega: Sign,
        value: f64,
    },

    /// Run configuration violates an invariant (trial count, window, jitter).
    #[error("invalid run configuration: {0}")]
    InvalidRunConfig(String),

    /// Histogram bins must resolve the four spectral peaks.
    #[error(
        "bin width {bin_width_s} s too coarse: must be below half the peak separation ({max_allowed_s} s)"
    )]
    BinWidthTooCoarse {
        bin_width_s: f64,
        max_allowed_s: f64,
    },

    /// Correlators cannot be estimated from zero selected coincidences.
    #[error("empty selection: no coincident events to estimate correlators from")]
    EmptySelection,
}
