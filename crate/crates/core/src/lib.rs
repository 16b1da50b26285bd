//! Numerical laboratory for the random entire function whose zeros are a
//! unit-intensity Poisson process on the real line, and for the zeros of
//! its high-order derivatives.

pub mod calibration;
pub mod cli;
pub mod contour;
pub mod error;
pub mod logcomplex;
pub mod montecarlo;
pub mod numeric;
pub mod precision;
pub mod quadrature;
pub mod saddle;
pub mod sampler;
pub mod series;
pub mod stats;
pub mod zeros;

pub use error::{LabError, Result};
pub use logcomplex::LogComplex;
pub use precision::PrecisionConfig;
pub use sampler::{rescale_sample, sample_poisson, shift_sample, PoissonSample, RescaledSample};
