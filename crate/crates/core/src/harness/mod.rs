//! Experiment harness: configuration, data, pipeline and reports.

pub mod config;
pub mod data;
pub mod pipeline;
pub mod report;
