pub mod config;
pub mod error;
pub mod functional;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod postprocess;
pub mod robust;
pub mod sampler;
pub mod seed;
pub mod simulate;

pub use error::{BrandError, Result};
