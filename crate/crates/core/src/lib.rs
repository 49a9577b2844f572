//! Simulation and reconstruction toolkit for a 12-electrode electrical
//! capacitance tomography (ECT) sensor.
//!
//! The crate covers the measurement side end to end: sensor geometry and
//! discretization ([`sensor`]), electrostatic forward solves and sensitivity
//! matrices ([`forward`]), stochastic two-phase flow phantoms ([`phantom`]),
//! the rotate-right capacitance modulator ([`modulator`]), classical inverse
//! solvers ([`recon`]), image-quality metrics ([`metrics`]), and binary
//! dataset generation with train/test splitting ([`dataset`]).

pub mod dataset;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod modulator;
pub mod phantom;
pub mod recon;
pub mod sensor;
