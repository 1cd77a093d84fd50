//! Generalized-ensemble statistical mechanics.
//!
//! Discrete degeneracy spectra are turned into characteristic functions,
//! probabilities, entropies and fluctuation moments under a squeezing
//! deformation of Boltzmann-Gibbs statistics. The crate also integrates a
//! squeezed discrete-velocity Boltzmann equation and infers the squeezing
//! function from temperature-ratio data.

// `!(a < b)` is used on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod fluctuation;
pub mod inference;
pub mod io;
pub mod kinetics;
pub mod models;
pub mod numeric;
pub mod squeeze;
pub mod surface;
pub mod thermo;

pub use ensemble::{characteristic_class, ClassTable, DegeneracySpectrum, ProbabilityTable, SpectrumRow};
pub use error::{Error, Result};
pub use models::{Model, ModelDescriptor};
pub use squeeze::{FamilyKind, LogValue, Slope, SqueezeConfig, SqueezeFamily};
pub use surface::EnsembleSurface;
pub use thermo::{EnsembleSpec, EnvironmentSplit, PhiSurface, ThermoPoint, VariablePair};
