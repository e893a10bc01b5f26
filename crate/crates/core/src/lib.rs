pub mod acceptance;
pub mod analytic;
pub mod correlate;
pub mod error;
pub mod ginibre;
pub mod linalg;
pub mod permlat;
pub mod spectral;

pub use error::{Error, Result};
