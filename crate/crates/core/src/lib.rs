pub mod algorithms;
pub mod config;
pub mod audit;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod vector;

pub use error::{LabError, Result};
