pub mod arbdetect;
pub mod error;
pub mod growthopt;
pub mod linalg;
pub mod measure;
pub mod mc;
pub mod model;
pub mod rng;
pub mod stochexp;

pub use error::{Error, Result};
