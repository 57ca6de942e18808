use thiserror::Error;

/// Process exit codes.
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}{}: {key}{}{message}", line.map(|l| format!(":{l}")).unwrap_or_default(), if key.is_empty() { "" } else { ": " })]
    Config {
        path: String,
        line: Option<usize>,
        key: String,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(phasefilter::Error),
    #[error("run failed: {0}")]
    Runtime(phasefilter::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Validation(_) => EXIT_VALIDATION,
            Self::Runtime(_) => EXIT_UNSTABLE,
            Self::Io(_) => EXIT_IO,
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            Self::Config { .. } => "config",
            Self::Validation(_) => "validation",
            Self::Runtime(_) => "instability",
            Self::Io(_) => "io",
        };
        let mut v = serde_json::json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() });
        if let Self::Config { line, key, .. } = self {
            v["line"] = serde_json::json!(line);
            v["key"] = serde_json::json!(key);
        }
        v
    }
}

pub fn io_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}
