//! Front end for `xfam-core`: argument handling, the `compress`/`sweep`/
//! `corpus` commands and the HTTP compression service.

pub mod args;
pub mod commands;
pub mod server;

use std::sync::Arc;

use thiserror::Error;
use xfam_core::attention::{FileProvider, HttpProvider};
use xfam_core::bench::ProviderSource;
use xfam_core::config::{ConfigOverrides, Profiles};
use xfam_core::pipeline::CompressionConfig;

pub use args::{Cli, Command, OutFormat, Settings};

/// Environment variable naming a profile file; takes precedence over `--config`.
pub const CONFIG_ENV: &str = "XFAM_CONFIG";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] xfam_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            Self::Core(e) => e.class().as_str(),
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| Self::Io { context, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Profiles from `XFAM_CONFIG`, else `--config`, else the built-ins.
pub fn load_profiles(settings: &Settings) -> Result<Profiles> {
    let path = std::env::var_os(CONFIG_ENV).map(Into::into).or_else(|| settings.config.clone());
    match path {
        Some(path) => Ok(Profiles::load(path)?),
        None => Ok(Profiles::default()),
    }
}

/// The selected profile with command-line overrides applied.
pub fn resolve_config(settings: &Settings, profiles: &Profiles) -> Result<CompressionConfig> {
    let base = profiles.get(&settings.profile)?;
    Ok(settings.overrides().apply(base)?)
}

/// Builds the attention source named by `--provider`.
///
/// Accepted forms: `synthetic`, `file:PATH`, `http:URL` (or a bare
/// `http://`/`https://` URL).
pub fn build_provider(spec: &str, seed: u64, model_id: Option<&str>) -> Result<ProviderSource> {
    if spec == "synthetic" {
        return Ok(ProviderSource::Synthetic { seed });
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let provider = FileProvider::open(path).map_err(|e| match e {
            xfam_core::Error::Io(source) => CliError::Io { context: format!("opening attention dump {path}"), source },
            other => other.into(),
        })?;
        return Ok(ProviderSource::Shared(Arc::new(provider)));
    }
    let url = if spec.starts_with("http://") || spec.starts_with("https://") {
        Some(spec)
    } else {
        spec.strip_prefix("http:")
    };
    if let Some(url) = url {
        let mut provider = HttpProvider::new(url)?;
        if let Some(id) = model_id {
            provider = provider.with_model_id(id);
        }
        return Ok(ProviderSource::Shared(Arc::new(provider)));
    }
    Err(CliError::Usage(format!(
        "unknown provider `{spec}`; expected synthetic, file:PATH or http:URL"
    )))
}

impl Settings {
    pub fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            n_lookahead: self.lookahead,
            chunk_size: self.chunk_size,
            pooling_kernel: self.kernel,
            delimiter: self.delimiter.clone(),
            keep_rate: self.keep_rate,
            target_length: self.target_length,
            block_align: self.block_align,
            draft_model_id: self.draft_model.clone(),
            ..ConfigOverrides::default()
        }
    }
}
