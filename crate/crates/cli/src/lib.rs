//! Command-line front end for the CellAnalyzer toolkit.

use std::fmt;

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

/// Bad arguments, config or manifest. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Evaluation finished and the prediction is not valid.
    Invalid,
    /// Some frames failed; the rest were written.
    PartialFailure,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Invalid | Outcome::PartialFailure => 1,
        }
    }
}

pub fn error_exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}
