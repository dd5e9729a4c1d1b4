//! Operator tooling around `hema_core`: scenario files, run reports and the
//! `hema` command line.

pub mod app;
pub mod oracle;
pub mod report;
pub mod scenario;
