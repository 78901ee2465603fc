//! Command line front end: subcommands for scripting and an arrow-key menu
//! that runs the same techniques.

pub mod args;
pub mod menu;
pub mod run;

pub use args::{Cli, Command};
