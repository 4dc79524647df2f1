pub mod abp;
pub mod dpp;
pub mod error;
pub mod field;
pub mod geometry;
pub mod gridfn;
pub mod lab;
pub mod measures;
pub mod quadrature;
pub mod regularity;
pub mod rng;
pub mod scenario;
pub mod walker;

pub use error::{LabError, Result};
