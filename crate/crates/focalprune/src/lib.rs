//! File formats, reports and the command-line front end for
//! [`focalprune_core`].

pub mod cli;
pub mod io;
pub mod report;

pub use cli::run;
