//! Deformed Wigner matrices: sampling, outlier extraction, the reference
//! limiting law for rescaled outliers, and Monte Carlo comparison.

pub mod checks;
pub mod config;
pub mod ensemble;
pub mod error;
mod lanczos;
pub mod matrix;
pub mod montecarlo;
pub mod outliers;
pub mod quadrature;
pub mod reference;
pub mod rng;
pub mod semicircle;
pub mod spectra;
pub mod tensor;

pub use error::{Error, Result};
pub use lanczos::LanczosOptions;
