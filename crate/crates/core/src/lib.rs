pub mod error;
pub mod experiment;
pub mod config;
pub mod field;
pub mod fronts;
pub mod gallery;
pub mod kernel;
pub mod linear_ops;
pub mod quadrature;
pub mod reaction;
pub mod semiflow;
pub mod speeds;
pub mod validation;
pub mod weinberger;

pub use error::{Error, Result};

/// Size the global rayon pool used by the convolution. Fails if it is already built.
pub fn set_global_threads(n: usize) -> std::result::Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
}
