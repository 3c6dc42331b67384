use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Front-end and engine errors, prefixed with the source name so parse
    /// errors read `file:line:col: message`.
    #[error("{}", located(.file, .source))]
    Lang {
        file: String,
        source: qif_lang::LangError,
    },

    #[error("{0}")]
    Estimation(#[from] qif_core::Error),

    #[error("analysis exceeded the time limit of {secs} s")]
    TimeoutExceeded { secs: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fixture {0} does not exist")]
    FixtureMissing(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn located(file: &str, e: &qif_lang::LangError) -> String {
    match e {
        qif_lang::LangError::Lex { .. } | qif_lang::LangError::Parse { .. } => format!("{file}:{e}"),
        _ => format!("{file}: {e}"),
    }
}

impl PipelineError {
    pub fn lang(&self) -> Option<&qif_lang::LangError> {
        match self {
            PipelineError::Lang { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
