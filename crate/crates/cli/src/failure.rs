use std::fmt;
use std::path::Path;

use songattn::Error;

/// Exit status for invalid configuration, missing inputs or mismatched options.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for unreadable, malformed or rejected data.
pub const EXIT_DATA: i32 = 3;
/// Exit status for a failed optimisation run.
pub const EXIT_TRAINING: i32 = 4;

/// A command failure carrying its process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Contract(_) | Error::Shape { .. } => EXIT_CONFIG,
        Error::Training(_) => EXIT_TRAINING,
        Error::Parse { .. }
        | Error::Corpus(_)
        | Error::Format(_)
        | Error::Rejected { .. }
        | Error::Evaluation(_)
        | Error::Integrity(_)
        | Error::Version { .. }
        | Error::Metric(_)
        | Error::Store(_)
        | Error::Io(_) => EXIT_DATA,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Self {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

/// Attaches the offending path to a library error.
pub fn at_path(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |err| Failure {
        code: exit_code(&err),
        message: format!("{}: {err}", path.display()),
    }
}

/// Fails with the configuration status unless `path` names an existing file.
pub fn require_file(what: &str, path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::config(format!(
            "{what} not found: {}",
            path.display()
        )))
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
