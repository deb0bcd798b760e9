//! Library half of the `pendavg` command: configuration, report formatting
//! and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod report;

/// Process exit status for an error: 2 for bad input, 3 for numerical failure.
pub fn exit_code(err: &pendavg::Error) -> i32 {
    if err.is_config() {
        2
    } else {
        3
    }
}
