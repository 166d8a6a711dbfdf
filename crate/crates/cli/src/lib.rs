//! Driver for the `symprep` binary: problem/result files, built-in strip
//! functions and the subcommands.
//!
//! Exit codes: 0 success, 1 I/O or schema error, 2 violated precondition,
//! 3 verification failure.

pub mod commands;
pub mod files;
pub mod samplers;

use commands::Status;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

/// True when the chain of `err` contains a violated precondition.
pub fn is_precondition(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<symprep_core::Error>())
        .any(symprep_core::Error::is_precondition)
}

pub fn exit_code(outcome: &anyhow::Result<Status>) -> u8 {
    match outcome {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::VerificationFailed) => EXIT_VERIFY,
        Err(e) if is_precondition(e) => EXIT_PRECONDITION,
        Err(_) => EXIT_IO,
    }
}
