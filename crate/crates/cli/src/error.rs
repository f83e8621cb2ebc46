use std::path::PathBuf;

use skysim_core::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ConfigError),
    #[error("trace {source_name}: {message}")]
    Trace { source_name: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Trace { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }

    /// Field name of a validation error.
    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Validation(e) => Some(&e.field),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn toml(source_name: &str, text: &str, err: &toml::de::Error) -> Self {
        let offset = err.span().map_or(0, |s| s.start).min(text.len());
        let (line, column) = line_col(text, offset);
        CliError::Parse {
            source_name: source_name.to_string(),
            line,
            column,
            message: err.message().trim().to_string(),
        }
    }
}

/// 1-based line and column (in characters) of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

/// Prefix a validation error's field with the section it came from.
pub(crate) fn in_section(section: &str) -> impl Fn(ConfigError) -> ConfigError + '_ {
    move |e| ConfigError::new(format!("{section}.{}", e.field), e.message)
}
