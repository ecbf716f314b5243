//! Profile configuration.
//!
//! A TOML document maps profile names to compression settings:
//!
//! ```toml
//! [profiles.default]
//! keep_rate = 0.3
//!
//! [profiles.code]
//! target_length = 16384
//! block_align = 4096
//! ```
//!
//! Profiles `default` and `code` always exist; a file entry overrides only the
//! keys it sets. Unknown profiles start from `default`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::Reduction;
use crate::error::{Error, Result};
use crate::pipeline::{CompressionConfig, KeepMode};

pub const DEFAULT_PROFILE: &str = "default";
pub const CODE_PROFILE: &str = "code";

/// Partial settings layered over a base [`CompressionConfig`].
///
/// `keep_rate` and `target_length` are mutually exclusive; `block_align = 0`
/// disables alignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub n_lookahead: Option<usize>,
    pub chunk_size: Option<usize>,
    pub pooling_kernel: Option<usize>,
    pub delimiter: Option<String>,
    pub forced_tail_tokens: Option<usize>,
    pub keep_rate: Option<f64>,
    pub target_length: Option<usize>,
    pub block_align: Option<usize>,
    pub reduction: Option<Reduction>,
    pub draft_model_id: Option<String>,
    pub slack: Option<f64>,
}

impl ConfigOverrides {
    pub fn apply(&self, base: &CompressionConfig) -> Result<CompressionConfig> {
        let mut cfg = base.clone();
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(n_lookahead, chunk_size, pooling_kernel, delimiter, reduction, draft_model_id, slack);
        if let Some(tail) = self.forced_tail_tokens {
            cfg.forced_tail_tokens = Some(tail);
        }
        match (self.keep_rate, self.target_length) {
            (Some(_), Some(_)) => {
                return Err(Error::config("keep_rate and target_length are mutually exclusive"));
            }
            (Some(rho), None) => cfg.keep.mode = KeepMode::Fraction(rho),
            (None, Some(len)) => cfg.keep.mode = KeepMode::TargetLength(len),
            (None, None) => {}
        }
        if let Some(block) = self.block_align {
            cfg.keep.block_align = (block > 0).then_some(block);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    profiles: BTreeMap<String, ConfigOverrides>,
}

/// Named compression profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    profiles: BTreeMap<String, CompressionConfig>,
}

impl Default for Profiles {
    fn default() -> Self {
        let mut profiles = BTreeMap::new();
        profiles.insert(DEFAULT_PROFILE.to_owned(), CompressionConfig::default());
        profiles.insert(CODE_PROFILE.to_owned(), CompressionConfig::code());
        Self { profiles }
    }
}

impl Profiles {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut out = Self::default();
        // `default` first so other profiles inherit its overrides.
        if let Some(ov) = file.profiles.get(DEFAULT_PROFILE) {
            let cfg = ov.apply(&out.profiles[DEFAULT_PROFILE])?;
            out.profiles.insert(DEFAULT_PROFILE.to_owned(), cfg);
        }
        for (name, ov) in file.profiles.iter().filter(|(n, _)| n.as_str() != DEFAULT_PROFILE) {
            let base = out.profiles.get(name).unwrap_or(&out.profiles[DEFAULT_PROFILE]).clone();
            let cfg = ov.apply(&base).map_err(|e| Error::config(format!("profile `{name}`: {e}")))?;
            out.profiles.insert(name.clone(), cfg);
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn get(&self, name: &str) -> Result<&CompressionConfig> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::config(format!("unknown profile `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}
