//! Spatial Schmidt-mode characterization of high-gain parametric
//! down-conversion.
//!
//! The crate covers both halves of the workflow:
//!
//! * theory: dispersion and phase matching ([`optics`]), a radially reduced
//!   quadrature of the signal's first-order correlation on a single
//!   transverse axis ([`spdc`]), and its one-dimensional diagonalization
//!   followed by a tensor product into the full two-dimensional Schmidt
//!   spectrum and modes ([`schmidt`]);
//! * experiment: synthetic thermal far-field frames ([`thermal`]), the
//!   slice-averaged intensity-covariance reconstruction ([`recon`]), and the
//!   full four-dimensional reference method used to measure the speedup
//!   ([`baseline`]).
//!
//! [`io`] holds the binary stack format, the key=value run configuration and
//! the delimited-text result bundles consumed by the command-line tool.

pub mod baseline;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optics;
pub mod recon;
pub mod schmidt;
pub mod special;
pub mod spdc;
pub mod thermal;

pub use baseline::{
    compare_methods, full4d_decompose, full4d_estimate, BenchReport, CompareConfig, Full4DResult,
};
pub use error::{Error, Result};
pub use optics::{CrystalPumpConfig, GainCalibration, MismatchModel, Wavevectors};
pub use recon::{
    reconstruct_pipeline, CenterPolicy, CovariancePair, Estimator, ReconConfig, Reconstruction,
    SliceSet,
};
pub use schmidt::{
    diagonalize_1d, mode_fwhm, schmidt_number, tensor_mode, tensor_spectrum, OneDDecomposition,
    SchmidtResult,
};
pub use spdc::{
    coherence_degree, far_field_intensity, g1_slice, CorrelationMatrix, IntensityProfile,
    Provenance, QuadratureSettings, WavevectorGrid,
};
pub use thermal::{synthesize_stack, ImageStack, NoiseModel, StackMetadata, SynthesisSpec};

/// Re-exported so downstream crates can name matrix types without a direct
/// dependency.
pub use faer::Mat;
