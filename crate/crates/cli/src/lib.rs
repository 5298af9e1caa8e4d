//! Command-line front end for `tnoisemod`: configuration layering, sweep orchestration and
//! CSV/manifest output.

pub mod app;
pub mod config;
pub mod report;
pub mod selftest;
