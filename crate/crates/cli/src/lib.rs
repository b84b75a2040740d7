//! Batch front end for the small-body experiments.

pub mod commands;
pub mod config;
