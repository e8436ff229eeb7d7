//! Decentralized oracle simulator: threshold aggregation with source
//! provenance and diversity, a simulated oracle contract, node selection
//! strategies and a discrete-event engine.

pub mod cli;
pub mod config;
pub mod crypto;
pub mod error;
pub mod ledger;
pub mod metrics;
pub mod sim;
pub mod strategies;
pub mod tbls;
pub mod types;

pub use error::{Error, Result};
