//! Command-line pipeline around `dpc-core`: configuration layering and
//! the stage implementations shared by the `dpc` binary and its tests.

pub mod config;
pub mod pipeline;
