//! Library half of the `longseq` binary: configuration, file formats, the
//! verification suites and the subcommands.

pub mod checks;
pub mod commands;
pub mod config;
pub mod io;

pub use commands::run;
pub use config::RunConfig;
