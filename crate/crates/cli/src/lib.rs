//! `dynres` command line: plans, corpus comparisons, pipeline simulation,
//! sweeps, memory estimates and downsampler checks.
//!
//! Exit codes: 0 success, 2 usage error, 3 input error, 4 internal
//! invariant violation. Failures print one JSON object
//! `{"category": ..., "message": ...}` on stderr.

mod args;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::Parser;

pub use args::Cli;

/// Environment variable naming the default calibration file.
pub const CALIBRATION_ENV: &str = "DYNRES_CALIBRATION";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Input,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 2,
            Category::Input => 3,
            Category::Internal => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Input => "input",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            category: Category::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Self {
            category: Category::Internal,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self {
            category: Category::Input,
            error: e.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn report(stderr: &mut dyn Write, category: Category, message: &str) -> i32 {
    let body = serde_json::json!({ "category": category.name(), "message": message });
    let _ = writeln!(stderr, "{body}");
    category.exit_code()
}

/// Parses `argv` (including the program name) and runs one subcommand.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            return report(stderr, Category::Usage, e.to_string().trim());
        }
    };
    match commands::dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => report(stderr, e.category, &format!("{:#}", e.error)),
    }
}
