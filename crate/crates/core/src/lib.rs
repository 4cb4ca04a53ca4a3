//! Rank-minimized sparse semidefinite programs via chordal decomposition.

pub mod admm;
pub mod chordal;
pub mod cli;
pub mod completion;
pub mod error;
pub mod io;
pub mod linalg;
pub mod problem;
pub mod problems;
pub mod reweight;
pub mod symsparse;

pub use error::{Error, Result};
