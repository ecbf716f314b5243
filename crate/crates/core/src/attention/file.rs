use std::path::{Path, PathBuf};

use super::{read_dump, AttentionProvider, AttentionRequest};
use crate::error::Result;
use crate::importance::LookaheadAttention;

/// Serves a single precomputed `.attn` dump.
#[derive(Debug, Clone)]
pub struct FileProvider {
    path: PathBuf,
    attn: LookaheadAttention,
}

impl FileProvider {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let attn = read_dump(&path)?;
        Ok(Self { path, attn })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn attention(&self) -> &LookaheadAttention {
        &self.attn
    }
}

impl AttentionProvider for FileProvider {
    fn provide(&self, req: &AttentionRequest) -> Result<LookaheadAttention> {
        req.validate()?;
        req.accept(self.attn.clone())
    }
}
