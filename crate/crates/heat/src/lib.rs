//! File formats, parallel scoring and the command-line front end for
//! [`heat_core`].

pub mod cli;
pub mod ingest;
pub mod output;
pub mod parallel;

pub use parallel::RayonExecutor;
