//! Sources of lookahead attention.
//!
//! A provider takes the draft token ids and returns the draft model's
//! attention over those positions for `n_lookahead` steps. Providers may
//! return the full `[N, L, H, S]` tensor or, when asked for
//! [`Reduction::PerStepReduced`], the `[N, 1, 1, S]` layer/head maxima; both
//! aggregate to the same importance vector.

mod dump;
mod file;
mod http;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use dump::{
    decode_dump, encode_dump, read_dump, write_dump, AttentionDumpHeader, DumpDType, DUMP_EXTENSION,
    DUMP_HEADER_LEN, DUMP_MAGIC, DUMP_VERSION,
};
pub use file::FileProvider;
pub use http::{AttentionWireRequest, HttpProvider, RetryPolicy, ATTENTION_PATH};
pub use synthetic::{Saliency, SyntheticProvider};

use crate::error::{Error, Result};
use crate::importance::LookaheadAttention;
use crate::tokenizer::TokenId;

pub const DEFAULT_LOOKAHEAD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    #[default]
    Full,
    PerStepReduced,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionRequest {
    pub draft_model_id: String,
    pub draft_token_ids: Vec<TokenId>,
    pub n_lookahead: usize,
    pub reduction: Reduction,
}

impl AttentionRequest {
    pub fn new(draft_token_ids: Vec<TokenId>) -> Self {
        Self {
            draft_model_id: String::new(),
            draft_token_ids,
            n_lookahead: DEFAULT_LOOKAHEAD,
            reduction: Reduction::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lookahead == 0 {
            return Err(Error::config("n_lookahead must be >= 1"));
        }
        if self.draft_token_ids.is_empty() {
            return Err(Error::input("attention request has no draft tokens"));
        }
        Ok(())
    }

    /// Checks a provider's answer against the request, reducing it locally if
    /// the provider sent a full tensor for a reduced request.
    pub fn accept(&self, attn: LookaheadAttention) -> Result<LookaheadAttention> {
        let dims = attn.dims();
        if dims.seq_len != self.draft_token_ids.len() {
            return Err(Error::Protocol(format!(
                "provider returned {} positions for {} draft tokens",
                dims.seq_len,
                self.draft_token_ids.len()
            )));
        }
        if dims.n_lookahead != self.n_lookahead {
            return Err(Error::Protocol(format!(
                "provider returned {} lookahead steps, {} requested",
                dims.n_lookahead, self.n_lookahead
            )));
        }
        match self.reduction {
            Reduction::PerStepReduced if !attn.is_reduced() => Ok(attn.reduce_per_step()),
            _ => Ok(attn),
        }
    }
}

pub trait AttentionProvider: Send + Sync {
    fn provide(&self, req: &AttentionRequest) -> Result<LookaheadAttention>;

    /// Longest draft sequence the backing model accepts, if bounded.
    fn max_context(&self) -> Option<usize> {
        None
    }
}

impl<P: AttentionProvider + ?Sized> AttentionProvider for std::sync::Arc<P> {
    fn provide(&self, req: &AttentionRequest) -> Result<LookaheadAttention> {
        (**self).provide(req)
    }

    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
}

impl<P: AttentionProvider + ?Sized> AttentionProvider for &P {
    fn provide(&self, req: &AttentionRequest) -> Result<LookaheadAttention> {
        (**self).provide(req)
    }

    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::AttentionDims;

    #[test]
    fn accept_checks_dims() {
        let mut req = AttentionRequest::new(vec![1, 2, 3]);
        req.n_lookahead = 2;
        let ok = LookaheadAttention::new(AttentionDims::new(2, 1, 1, 3), vec![0.1; 6]).unwrap();
        assert!(req.accept(ok).is_ok());
        let short = LookaheadAttention::new(AttentionDims::new(2, 1, 1, 2), vec![0.1; 4]).unwrap();
        assert!(matches!(req.accept(short), Err(Error::Protocol(_))));
        let steps = LookaheadAttention::new(AttentionDims::new(1, 1, 1, 3), vec![0.1; 3]).unwrap();
        assert!(matches!(req.accept(steps), Err(Error::Protocol(_))));
    }

    #[test]
    fn accept_reduces_full_tensor_when_asked() {
        let mut req = AttentionRequest::new(vec![1, 2]);
        req.n_lookahead = 1;
        req.reduction = Reduction::PerStepReduced;
        let full = LookaheadAttention::new(AttentionDims::new(1, 2, 1, 2), vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let got = req.accept(full).unwrap();
        assert!(got.is_reduced());
        assert_eq!(got.values(), &[0.3, 0.4]);
    }

    #[test]
    fn reduction_wire_names() {
        assert_eq!(serde_json::to_string(&Reduction::PerStepReduced).unwrap(), "\"per-step-reduced\"");
        assert_eq!(serde_json::to_string(&Reduction::Full).unwrap(), "\"full\"");
    }
}
