//! Finite-radius diagnostics for coset graphs of marked groups.

pub mod amenability;
pub mod cogrowth;
pub mod error;
pub mod geometry;
pub mod presentations;
pub mod report;
pub mod schreier;
pub mod separation;
pub mod words;

pub use error::{Error, Result};
pub use presentations::{BallDistance, BallGraph, OracleKind, Presentation, WordOracle};
pub use words::{Letter, MarkedAlphabet, Word};
