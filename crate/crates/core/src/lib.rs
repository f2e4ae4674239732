//! Thermodynamic functions, soliton ground states and the phase curve of
//! the focusing discrete nonlinear Schrödinger equation on `d`-dimensional
//! tori, with samplers for the Gaussian free field and the Gibbs measure.

pub mod error;
pub mod field;
pub mod gff_sampler;
pub mod gibbs_sampler;
pub mod lattice_spectrum;
pub mod numerics;
pub mod phase_diagram;
pub mod soliton;
pub mod thermo;

pub use error::{Error, Result};
pub use field::ComplexField;
pub use lattice_spectrum::TorusSpec;
pub use thermo::ThermoFunctions;
