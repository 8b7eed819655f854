pub mod acceptance;
pub mod curves;
pub mod error;
pub mod finitefield;
pub mod obstructions;
pub mod parallel;
pub mod quadfield;
pub mod report;
pub mod sieve;
pub mod symbols;

pub use error::{Error, Result};
