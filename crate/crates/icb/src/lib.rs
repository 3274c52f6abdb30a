//! Standard-library side of the IoT compression bench: the push/pull link,
//! datasets, the validating sink, the timing harness, reports and the CLI.

pub mod cli;
pub mod codecs;
pub mod config;
pub mod dataset;
pub mod harness;
pub mod report;
pub mod sink;
pub mod transport;
