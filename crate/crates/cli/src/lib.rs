//! Problem-file parsing, task execution, and report rendering for the
//! `hvnm` binary. Split out as a library so integration tests can parse the
//! reports the binary emits.

pub mod problem;
pub mod report;
pub mod tasks;
