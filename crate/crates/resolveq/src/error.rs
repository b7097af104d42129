use std::path::PathBuf;

use resolveq_core::ErrorKind as CoreKind;
use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Solver,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Solver => 2,
            ErrorKind::Io => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed or schema-violating input. `location` is a JSON path such as
    /// `modes[1].freq_ghz` or a CSV line.
    #[error("{source_name}: {location}: {message}")]
    Schema {
        source_name: String,
        location: String,
        message: String,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: resolveq_core::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Schema { .. } | Error::Usage(_) => ErrorKind::Validation,
            Error::Core { source, .. } => match source.kind() {
                CoreKind::Validation => ErrorKind::Validation,
                CoreKind::Solver => ErrorKind::Solver,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: resolveq_core::Error) -> Self {
        Error::Core {
            context: context.into(),
            source,
        }
    }

    pub fn schema(source_name: impl Into<String>, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            source_name: source_name.into(),
            location: location.into(),
            message: message.into(),
        }
    }

    /// Machine-readable form written to stderr by the command-line tool.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
            }
        });
        if let Error::Schema { source_name, location, .. } = self {
            v["error"]["source"] = source_name.clone().into();
            v["error"]["location"] = location.clone().into();
        }
        v
    }
}

/// Attaches a context string to core errors.
pub trait CoreContext<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> CoreContext<T> for resolveq_core::Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| Error::core(context, e))
    }
}
