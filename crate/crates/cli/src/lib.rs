//! Experiment runner for the adaptive scaling Metropolis sampler: config
//! parsing, seeded replicas, trace and summary files, sweeps and the
//! verification suites.

pub mod config;
pub mod run;
pub mod sweep;
pub mod verify;

use std::fmt;

/// Marks an error as a failed check or run rather than a usage or I/O problem.
#[derive(Debug)]
pub struct CheckFailed {
    pub what: String,
}

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed", self.what)
    }
}

impl std::error::Error for CheckFailed {}

impl CheckFailed {
    pub fn wrap(e: anyhow::Error, what: &str) -> anyhow::Error {
        e.context(CheckFailed { what: what.into() })
    }

    pub fn new(what: impl Into<String>) -> anyhow::Error {
        anyhow::Error::new(CheckFailed { what: what.into() })
    }
}

/// 1 for failed checks or runs, 2 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<CheckFailed>()) {
        1
    } else {
        2
    }
}
