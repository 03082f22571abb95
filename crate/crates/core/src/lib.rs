pub mod bridge;
pub mod cli;
pub mod data;
pub mod error;
pub mod ideal_points;
pub mod identify;
pub mod math;
pub mod oracle;
pub mod polya_gamma;
pub mod runner;
pub mod summary;

pub use error::{Error, Result};
