//! Config-file loading and flag merging.
//!
//! Every command accepts `--config <json>`; explicit flags override file
//! values, which override built-in defaults. The fully resolved config is
//! echoed to stderr as a single JSON line, and re-running with that JSON as
//! the config file reproduces the run.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// A bad invocation (missing or contradictory parameters): exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Loads a command's optional config file; unknown keys are rejected by the
/// target type's `deny_unknown_fields`.
pub fn load_file<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", path.display())))
        }
    }
}

/// Prints the resolved config as one JSON line on stderr.
pub fn echo<T: Serialize>(resolved: &T) -> anyhow::Result<()> {
    eprintln!("{}", serde_json::to_string(resolved)?);
    Ok(())
}

/// Flag value, then config-file value, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag value, then config-file value; an error naming the flag otherwise.
pub fn need<T>(flag: Option<T>, file: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(file)
        .ok_or_else(|| usage(format!("missing --{name} (or config key {})", name.replace('-', "_"))))
}
