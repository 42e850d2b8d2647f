//! Command-line front end: loading TREC-format runs and qrels, evaluating
//! stopping methods over them, and writing text and JSON Lines reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod fetch;
pub mod harness;
pub mod report;
pub mod svg;
