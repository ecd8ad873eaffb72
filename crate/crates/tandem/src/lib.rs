//! Simulator and analytic prediction engine for two-photon experiments with
//! interferometers in series.
//!
//! Energy-time entangled photon pairs are analyzed by a chain of unbalanced
//! 50-50 interferometers: photon 1 crosses one (recombiner BS11), photon 2
//! crosses two in series (recombiners BS21 and BS22). The crate computes and
//! contrasts the predictions of standard quantum mechanics with those of
//! Multisimultaneity, a relativistic nonlocal-causality model in which the
//! joint statistics depend on the frame-dependent time ordering of the
//! beam-splitter impacts.
//!
//! Modules:
//! - [`pathspace`]: joint paths, time-delay subensembles, complex amplitudes;
//! - [`relativity`]: impact schedules, Lorentz transforms, before/non-before
//!   classification of the splitter impacts;
//! - [`predict`]: closed-form joint probabilities and correlation
//!   coefficients for both theories, scenario evaluators, no-signaling audit;
//! - [`montecarlo`]: seeded event generation, time-delay spectra, coincidence
//!   window post-selection, correlator estimation.
//!
//! Units are meters, seconds and radians throughout; beam-splitter velocities
//! are fractions of the speed of light.

pub mod montecarlo;
pub mod pathspace;
pub mod predict;
pub mod relativity;

mod error;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
