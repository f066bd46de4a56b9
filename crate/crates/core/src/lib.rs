pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod par;
pub mod perturbation;
pub mod propagator;
pub mod pulses;
pub mod spectra;

pub use error::{Error, Result};
