//! Decomposition of thermal bosonic bath correlation functions into
//! artificial decay modes, hierarchical equations of motion (HEOM)
//! propagation for each mode family, and the independent references used to
//! validate them: quadrature oracles, analytic pure-dephasing decoherence and
//! a dense thermalized chain-mapping propagator.
//!
//! Everything is in atomic units (ħ = 1). Conversions live in [`units`].

pub mod aaa;
pub mod chain;
pub mod discretize;
pub mod error;
pub mod expfit;
pub mod heom;
pub mod linalg;
pub mod models;
pub mod modes;
pub mod oracles;
pub mod quadrature;
pub mod spectral;
pub mod tm;
pub mod units;

pub use error::{Error, Result};
pub use modes::{correlation_from_modes, DecayMode, ModeFamily};
pub use num_complex::Complex64;
pub use spectral::{
    bose_occupancy, eval_thermal_sd, reorganization_energy, BathSpec, SpectralDensity,
    TabulatedDensity, TannorMeierTerm,
};
pub use units::UnitSystem;

/// Complex `n × n` operator on the system Hilbert space.
pub type Operator = nalgebra::DMatrix<Complex64>;
