//! Revenue calculus for partial selfish mining (PSM) and its advanced variant
//! (A-PSM): closed forms, Markov-chain oracles, a seeded Monte Carlo
//! simulator, strategy selection and attack economics.

pub mod analytic;
pub mod chains;
pub mod cli;
pub mod decision;
pub mod economics;
pub mod error;
pub mod harness;
pub mod model;
pub mod montecarlo;

pub use error::{Error, Result};
