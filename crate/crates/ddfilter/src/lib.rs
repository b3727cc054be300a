//! Dynamical-decoupling pulse schedules and their noise filter functions.
//!
//! This crate builds multi-qubit pulse schedules (collective symmetric
//! sequences, nested Uhrig sequences, custom timing lists), evaluates the
//! complex sampling function of each qubit's switching history, assembles
//! coherence-element filter functions for common and independent reservoirs
//! with ideal or finite-width pulses, and integrates them against power-law
//! or thermal noise spectra to produce decoherence figures of merit.
//!
//! The layering is bottom-up:
//!
//! - [`schedule`] — pulse schedule construction and validation
//! - [`sampling`] — per-qubit sampling functions `f(z)`, `z = omega * T`
//! - [`filter`] — filter functions `F(z)` per coherence element, plus
//!   finite-width/ideal ratio diagnostics
//! - [`spectra`] — noise models, the convergent improper integral
//!   `I = integral of F(z) / z^(alpha+2)`, and decoherence functions
//! - [`analysis`] — rolloff fits, spectral peaks, decoherence-free-subspace
//!   detection, and sweep tables
//! - [`oracle`] — independent brute-force cross-checks (time-domain
//!   quadrature, switching traces, discrete baths, trapezoid integration)
//!
//! Everything here is pure and deterministic: the same inputs produce
//! bit-identical outputs regardless of evaluation order.

pub mod analysis;
pub mod doubledouble;
pub mod filter;
pub mod oracle;
mod quad;
pub mod sampling;
pub mod schedule;
pub mod spectra;

pub use filter::{FilterLabel, FilterSpec, PulseModel, Topology};
pub use sampling::FrequencyGrid;
pub use schedule::{NuddLevelCounts, PulseSchedule, SchemeTag};
pub use spectra::{FactorResult, NoiseModel};
