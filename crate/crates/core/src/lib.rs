pub mod bench;
pub mod conformal;
pub mod data;
pub mod error;
pub mod family;
pub mod forest;
pub mod rank;
pub mod set;

pub use error::{Error, Result};
