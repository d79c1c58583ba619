//! Embedding + variational eigensolver workbench for small molecules.

pub mod circuits;
pub mod dmet;
pub mod error;
pub mod integrals;
pub mod operators;
pub mod oracle;
pub mod pipeline;
pub mod refine;
pub mod simulator;
pub mod vqe;

pub use error::{Error, Result};
