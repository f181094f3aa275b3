//! Library side of the `qdist` command-line tool.

pub mod commands;
pub mod suites;
