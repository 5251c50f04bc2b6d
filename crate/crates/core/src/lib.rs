//! Nonparametric estimation of the Levy density of a multivariate Levy
//! process from equidistant observations of its increments.
//!
//! The estimator inverts the identity `lap(psi)(u) = -tr(Sigma) - F[|x|^2 nu](u)`
//! with the empirical characteristic function plugged in, a band-limiting
//! Fourier kernel, and an FFT back to state space.

pub mod bandwidth;
pub mod error;
pub mod estimator;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod quadrature;
pub mod reference;
pub mod region;
pub mod registry;
pub mod run;
pub mod sim;
pub mod spectral;

pub use bandwidth::BandwidthSpec;
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, SpectralEstimator};
pub use grid::{ComplexField, DensityField, FreqGrid, Quantity, SpaceGrid};
pub use kernels::{KernelSpec, WeightSpec};
pub use reference::ReferenceModel;
pub use region::{Region, TestFunction};
pub use sim::{IncrementSample, LevyModelSpec};
