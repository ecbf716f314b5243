use std::fmt;

/// Errors raised anywhere in the compression pipeline.
///
/// Every variant maps to a stable, kebab-case error class (see [`Error::class`])
/// that the CLI and HTTP front ends surface to callers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error("tokenizer capability missing: {0}")]
    Capability(String),
    #[error("bad attention dump format: {0}")]
    Format(String),
    #[error("corrupt attention dump: {0}")]
    Corruption(String),
    #[error("provider protocol violation: {0}")]
    Protocol(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("draft context exceeded: prompt has {seq_len} draft tokens, limit is {limit}")]
    DraftContextExceeded { seq_len: usize, limit: usize },
    #[error("tokenizer error: {0}")]
    Tokenizer(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error category, stable across releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    InvalidInput,
    InvalidConfig,
    EmptySelection,
    Capability,
    Format,
    Corruption,
    Protocol,
    Transport,
    DraftContext,
    Tokenizer,
    Io,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::InvalidInput => "invalid-input",
            Self::InvalidConfig => "invalid-config",
            Self::EmptySelection => "empty-selection",
            Self::Capability => "capability",
            Self::Format => "format",
            Self::Corruption => "corruption",
            Self::Protocol => "protocol",
            Self::Transport => "transport",
            Self::DraftContext => "draft-context",
            Self::Tokenizer => "tokenizer",
            Self::Io => "io",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Self::InvalidInput(_) => ErrorClass::InvalidInput,
            Self::InvalidConfig(_) => ErrorClass::InvalidConfig,
            Self::EmptySelection(_) => ErrorClass::EmptySelection,
            Self::Capability(_) => ErrorClass::Capability,
            Self::Format(_) => ErrorClass::Format,
            Self::Corruption(_) => ErrorClass::Corruption,
            Self::Protocol(_) => ErrorClass::Protocol,
            Self::Transport { .. } => ErrorClass::Transport,
            Self::DraftContextExceeded { .. } => ErrorClass::DraftContext,
            Self::Tokenizer(_) => ErrorClass::Tokenizer,
            Self::Io(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::InvalidConfig(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
