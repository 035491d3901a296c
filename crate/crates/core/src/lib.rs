//! Exact dynamics of a two-level emitter coupled to a bosonic bath at zero
//! temperature, the bound states of the emitter+bath spectrum, and the
//! quantum-speed-limit time and non-Markovianity derived from the emitter
//! population.
//!
//! Frequencies are measured in units of the bath cutoff (or resonator)
//! frequency and times in its inverse.

pub mod checks;
pub mod cli;
pub mod dynamics;
pub mod metrics;
pub mod quad;
pub mod spectral;
pub mod spectrum;

pub use num_complex::Complex64 as C64;
