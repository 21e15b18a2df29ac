pub mod attention;
pub mod autodiff;
pub mod data;
pub mod embed;
pub mod error;
pub mod lstm;
pub mod model;
pub mod train;

pub use error::{Error, ErrorClass, Result};
