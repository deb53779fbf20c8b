//! Exit-status classification.

use std::fmt;
use std::path::{Path, PathBuf};

pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

/// A file could not be read or written.
#[derive(Debug)]
pub struct IoFailure {
    action: &'static str,
    path: PathBuf,
}

impl IoFailure {
    pub fn read(path: &Path) -> Self {
        IoFailure {
            action: "cannot read",
            path: path.to_path_buf(),
        }
    }

    pub fn write(path: &Path) -> Self {
        IoFailure {
            action: "cannot write",
            path: path.to_path_buf(),
        }
    }

    pub fn missing(path: &Path) -> Self {
        IoFailure {
            action: "missing input",
            path: path.to_path_buf(),
        }
    }
}

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.action, self.path.display())
    }
}

impl std::error::Error for IoFailure {}

/// The command ran but its result is empty or otherwise unusable.
#[derive(Debug)]
pub struct Degenerate(pub String);

impl fmt::Display for Degenerate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Degenerate {}

/// Degenerate results map to 3, file problems to 1 and everything else
/// (bad configuration, malformed input, invalid parameters) to 2.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<Degenerate>().is_some() {
        EXIT_DEGENERATE
    } else if err.downcast_ref::<IoFailure>().is_some() {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}
