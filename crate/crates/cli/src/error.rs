use thiserror::Error;

/// Failures surfaced by the command-line tool, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    Check(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] tdmpc_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(origin: &str, line: Option<usize>, msg: impl Into<String>) -> Self {
        match line {
            Some(l) => CliError::Config(format!("{origin}:{l}: {}", msg.into())),
            None => CliError::Config(format!("{origin}: {}", msg.into())),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 1 config, 2 check failure, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Check(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
