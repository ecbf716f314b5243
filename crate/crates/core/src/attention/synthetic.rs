use std::collections::HashSet;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttentionProvider, AttentionRequest, Reduction};
use crate::error::Result;
use crate::importance::{AttentionDims, LookaheadAttention};
use crate::tokenizer::TokenId;

/// Which draft positions the synthetic provider treats as salient.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Saliency {
    pub positions: Vec<Range<usize>>,
    pub token_ids: HashSet<TokenId>,
}

impl Saliency {
    pub fn positions(ranges: impl IntoIterator<Item = Range<usize>>) -> Self {
        Self { positions: ranges.into_iter().collect(), ..Self::default() }
    }

    pub fn token_ids(ids: impl IntoIterator<Item = TokenId>) -> Self {
        Self { token_ids: ids.into_iter().collect(), ..Self::default() }
    }

    fn is_salient(&self, pos: usize, id: TokenId) -> bool {
        self.token_ids.contains(&id) || self.positions.iter().any(|r| r.contains(&pos))
    }
}

/// Seeded attention generator for tests and benchmarks.
///
/// Background entries are uniform noise with mean `background`. At salient
/// positions one head per (step, layer), chosen at random, carries `peak`,
/// so the layer/head max there is exactly `peak`. Output depends only on
/// the seed and the request.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    seed: u64,
    n_layers: usize,
    n_heads: usize,
    background: f32,
    peak: f32,
    saliency: Saliency,
    max_context: Option<usize>,
}

impl SyntheticProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            n_layers: 2,
            n_heads: 4,
            background: 0.01,
            peak: 1.0,
            saliency: Saliency::default(),
            max_context: None,
        }
    }

    pub fn with_shape(mut self, n_layers: usize, n_heads: usize) -> Self {
        self.n_layers = n_layers.max(1);
        self.n_heads = n_heads.max(1);
        self
    }

    pub fn with_levels(mut self, background: f32, peak: f32) -> Self {
        self.background = background.max(0.0);
        self.peak = peak.max(0.0);
        self
    }

    pub fn with_saliency(mut self, saliency: Saliency) -> Self {
        self.saliency = saliency;
        self
    }

    pub fn with_max_context(mut self, limit: usize) -> Self {
        self.max_context = Some(limit);
        self
    }

    fn rng_for(&self, req: &AttentionRequest) -> ChaCha8Rng {
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for &id in &req.draft_token_ids {
            h = (h ^ u64::from(id)).wrapping_mul(0x0100_0000_01b3);
        }
        h ^= req.n_lookahead as u64;
        ChaCha8Rng::seed_from_u64(h)
    }
}

impl AttentionProvider for SyntheticProvider {
    fn provide(&self, req: &AttentionRequest) -> Result<LookaheadAttention> {
        req.validate()?;
        let s = req.draft_token_ids.len();
        let salient: Vec<bool> = req
            .draft_token_ids
            .iter()
            .enumerate()
            .map(|(pos, &id)| self.saliency.is_salient(pos, id))
            .collect();

        let mut rng = self.rng_for(req);
        let dims = AttentionDims::new(req.n_lookahead, self.n_layers, self.n_heads, s);
        let mut values = Vec::with_capacity(dims.element_count().unwrap_or(0));
        for _step in 0..dims.n_lookahead {
            for _layer in 0..dims.n_layers {
                let peak_head = rng.gen_range(0..dims.n_heads);
                for head in 0..dims.n_heads {
                    for &hot in &salient {
                        let noise = self.background * (0.5 + rng.gen::<f32>());
                        values.push(if hot && head == peak_head { self.peak } else { noise });
                    }
                }
            }
        }
        let attn = LookaheadAttention::new(dims, values)?;
        Ok(match req.reduction {
            Reduction::Full => attn,
            Reduction::PerStepReduced => attn.reduce_per_step(),
        })
    }

    fn max_context(&self) -> Option<usize> {
        self.max_context
    }
}
