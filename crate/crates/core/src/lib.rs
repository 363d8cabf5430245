//! Lohe tensor aggregation models, their reductions, and numerical checks of their
//! conservation laws, monotonicity properties and decay rates.

pub mod config;
pub mod error;
pub mod init;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod observe;
pub mod output;
pub mod simulate;
pub mod verify;

pub use error::{LoheError, Result};
