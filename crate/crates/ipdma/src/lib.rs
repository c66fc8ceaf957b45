//! File formats, run configuration, a thread-pool executor and the `ipdma`
//! command line built on [`ipdma_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;

pub use error::CliError;
pub use exec::Pool;
