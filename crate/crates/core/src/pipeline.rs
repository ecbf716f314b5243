//! End-to-end compression.
//!
//! The keep rate is fixed in the target tokenizer's domain, `rho = L̂ / L`,
//! and applied to the draft sequence as a budget of `ceil(rho * S)` draft
//! tokens. The kept text is re-tokenized by the target tokenizer and numbered
//! with fresh positions `0..|u|`.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionProvider, AttentionRequest, Reduction, DEFAULT_LOOKAHEAD};
use crate::error::{Error, Result};
use crate::importance::{aggregate_max_mean, smooth};
use crate::selection::{merge_adjacent, partition, score_chunks, select_top_k, ChunkScore, SelectedSpans};
use crate::span_text::{assemble, map_spans_to_byte_ranges, AssembledText};
use crate::tokenizer::{TokenId, TokenizationWithOffsets, Tokenizer};

pub const DEFAULT_CHUNK_SIZE: usize = 32;
pub const CODE_CHUNK_SIZE: usize = 128;
pub const DEFAULT_POOLING_KERNEL: usize = 13;
pub const DEFAULT_DELIMITER: &str = "[...]";
pub const CODE_DELIMITER: &str = "// omitted";
pub const DEFAULT_BLOCK_ALIGN: usize = 4096;
pub const DEFAULT_SLACK: f64 = 0.10;
pub const MAX_REFINE_PASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepMode {
    /// Keep this fraction of the target-side tokens.
    Fraction(f64),
    /// Aim for this many target-side tokens.
    TargetLength(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeepRateSpec {
    pub mode: KeepMode,
    /// Block size that target lengths are rounded to; `None` disables.
    pub block_align: Option<usize>,
}

impl Default for KeepRateSpec {
    fn default() -> Self {
        Self { mode: KeepMode::Fraction(1.0), block_align: Some(DEFAULT_BLOCK_ALIGN) }
    }
}

impl KeepRateSpec {
    pub fn fraction(rho: f64) -> Self {
        Self { mode: KeepMode::Fraction(rho), ..Self::default() }
    }

    pub fn target_length(tokens: usize) -> Self {
        Self { mode: KeepMode::TargetLength(tokens), ..Self::default() }
    }

    pub fn with_block_align(mut self, block: Option<usize>) -> Self {
        self.block_align = block;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            KeepMode::Fraction(rho) if !(rho > 0.0 && rho <= 1.0) => {
                return Err(Error::config(format!("keep rate must be in (0, 1], got {rho}")));
            }
            KeepMode::TargetLength(0) => return Err(Error::config("target length must be >= 1")),
            _ => {}
        }
        if self.block_align == Some(0) {
            return Err(Error::config("block alignment must be >= 1 when set"));
        }
        Ok(())
    }

    /// Requested target length after block alignment, for target-length mode.
    pub fn aligned_target_length(&self) -> Option<usize> {
        match self.mode {
            KeepMode::TargetLength(len) => Some(match self.block_align {
                Some(block) if block > 0 => align_to_block(len, block),
                _ => len,
            }),
            KeepMode::Fraction(_) => None,
        }
    }
}

/// Rounds to the nearest multiple of `block` (halves round up), never below
/// one block.
pub fn align_to_block(len: usize, block: usize) -> usize {
    let blocks = (len + block / 2) / block;
    blocks.max(1) * block
}

/// Keep rate for a prompt of `l_target` target-side tokens.
pub fn compute_keep_rate(l_target: usize, spec: &KeepRateSpec) -> Result<f64> {
    if l_target == 0 {
        return Err(Error::input("target-side prompt length is zero"));
    }
    spec.validate()?;
    Ok(match spec.mode {
        KeepMode::Fraction(rho) => rho,
        KeepMode::TargetLength(_) => {
            let aligned = spec.aligned_target_length().expect("target-length mode");
            if aligned >= l_target {
                1.0
            } else {
                aligned as f64 / l_target as f64
            }
        }
    })
}

/// Draft-side token budget, `ceil(rho * S)`.
///
/// Target-length budgets are computed in integers so exact ratios do not
/// pick up an extra token from rounding noise.
fn draft_budget(spec: &KeepRateSpec, rho: f64, l_target: usize, seq_len: usize) -> Result<usize> {
    let budget = match spec.aligned_target_length() {
        Some(aligned) if aligned < l_target => {
            let num = aligned as u128 * seq_len as u128;
            num.div_ceil(l_target as u128) as usize
        }
        Some(_) => seq_len,
        None => {
            let exact = rho * seq_len as f64;
            let nearest = exact.round();
            if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) {
                nearest as usize
            } else {
                exact.ceil() as usize
            }
        }
    };
    if budget == 0 || rho * (seq_len as f64) < 1.0 - 1e-12 {
        return Err(Error::EmptySelection(format!(
            "keep rate {rho} over {seq_len} draft tokens keeps less than one token"
        )));
    }
    Ok(budget.min(seq_len))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionConfig {
    pub n_lookahead: usize,
    pub chunk_size: usize,
    pub pooling_kernel: usize,
    pub delimiter: String,
    /// Tail tokens always kept; `None` means one chunk.
    pub forced_tail_tokens: Option<usize>,
    pub keep: KeepRateSpec,
    pub reduction: Reduction,
    pub draft_model_id: String,
    /// Allowed relative overshoot of the target length before refinement.
    pub slack: f64,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            n_lookahead: DEFAULT_LOOKAHEAD,
            chunk_size: DEFAULT_CHUNK_SIZE,
            pooling_kernel: DEFAULT_POOLING_KERNEL,
            delimiter: DEFAULT_DELIMITER.to_owned(),
            forced_tail_tokens: None,
            keep: KeepRateSpec::default(),
            reduction: Reduction::PerStepReduced,
            draft_model_id: String::new(),
            slack: DEFAULT_SLACK,
        }
    }
}

impl CompressionConfig {
    /// Settings for long code inputs: wider chunks and a code-comment delimiter.
    pub fn code() -> Self {
        Self { chunk_size: CODE_CHUNK_SIZE, delimiter: CODE_DELIMITER.to_owned(), ..Self::default() }
    }

    pub fn with_keep(mut self, keep: KeepRateSpec) -> Self {
        self.keep = keep;
        self
    }

    pub fn forced_tail(&self) -> usize {
        self.forced_tail_tokens.unwrap_or(self.chunk_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lookahead == 0 {
            return Err(Error::config("n_lookahead must be >= 1"));
        }
        if self.chunk_size == 0 {
            return Err(Error::config("chunk_size must be >= 1"));
        }
        if self.pooling_kernel == 0 || self.pooling_kernel.is_multiple_of(2) {
            return Err(Error::config(format!("pooling kernel must be odd and >= 1, got {}", self.pooling_kernel)));
        }
        if self.delimiter.is_empty() {
            return Err(Error::config("delimiter must be non-empty"));
        }
        if !(self.slack >= 0.0 && self.slack.is_finite()) {
            return Err(Error::config(format!("slack must be finite and >= 0, got {}", self.slack)));
        }
        self.keep.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    /// Draft tokens including special tokens.
    pub draft_tokens: usize,
    /// Draft tokens eligible for selection.
    pub draft_content_tokens: usize,
    /// `L_target`: target-side content tokens of the original prompt.
    pub original_target_tokens: usize,
    /// `|u|` counted without special tokens.
    pub compressed_target_tokens: usize,
    /// `L̂`: target-side length the keep rate aims for.
    pub requested_target_tokens: f64,
    /// `|u| / L̂ - 1`.
    pub target_deviation: f64,
    pub draft_budget: usize,
    pub kept_draft_tokens: usize,
    pub chunk_count: usize,
    pub selected_chunks: usize,
    pub forced_chunks: usize,
    pub segment_count: usize,
    pub delimiter_count: usize,
    pub refine_passes: usize,
    pub budget_clamped: bool,
    /// Compression skipped: the prompt is too short or nothing needs dropping.
    pub bypassed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedPrompt {
    pub text: String,
    pub target_token_ids: Vec<TokenId>,
    pub position_ids: Vec<usize>,
    pub requested_keep_rate: f64,
    pub achieved_keep_rate: f64,
    /// Kept draft-token intervals, in draft-token indices.
    pub draft_spans: SelectedSpans,
    pub stats: CompressionStats,
}

/// Wall-clock milliseconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub target_count_ms: f64,
    pub draft_tokenize_ms: f64,
    pub attention_ms: f64,
    pub select_ms: f64,
    pub assemble_ms: f64,
    pub target_tokenize_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.target_count_ms
            + self.draft_tokenize_ms
            + self.attention_ms
            + self.select_ms
            + self.assemble_ms
            + self.target_tokenize_ms
    }
}

/// Fresh contiguous positions `0..len`.
pub fn assign_position_ids(u: &[TokenId]) -> Vec<usize> {
    (0..u.len()).collect()
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn compress(
    prompt: &str,
    config: &CompressionConfig,
    provider: &dyn AttentionProvider,
    draft: &dyn Tokenizer,
    target: &dyn Tokenizer,
) -> Result<CompressedPrompt> {
    compress_timed(prompt, config, provider, draft, target).map(|(out, _)| out)
}

/// [`compress`] that also reports per-stage wall time.
pub fn compress_timed(
    prompt: &str,
    config: &CompressionConfig,
    provider: &dyn AttentionProvider,
    draft: &dyn Tokenizer,
    target: &dyn Tokenizer,
) -> Result<(CompressedPrompt, StageTimings)> {
    config.validate()?;
    if prompt.is_empty() {
        return Err(Error::input("prompt is empty"));
    }
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let l_target = target.count_tokens(prompt)?;
    let rho = compute_keep_rate(l_target, &config.keep)?;
    let requested_target = config.keep.aligned_target_length().map_or(rho * l_target as f64, |a| {
        if a >= l_target {
            l_target as f64
        } else {
            a as f64
        }
    });
    timings.target_count_ms = elapsed_ms(t);

    let t = Instant::now();
    let draft_tok = crate::tokenizer::encode_with_offsets(draft, prompt.as_bytes())?;
    let content = draft_tok.content_positions();
    timings.draft_tokenize_ms = elapsed_ms(t);

    let content_len = content.len();
    let mut stats = CompressionStats {
        draft_tokens: draft_tok.len(),
        draft_content_tokens: content_len,
        original_target_tokens: l_target,
        requested_target_tokens: requested_target,
        ..CompressionStats::default()
    };

    let forced_tail = config.forced_tail();
    if content_len < config.chunk_size || content_len <= forced_tail {
        return passthrough(prompt, rho, stats, &content, target, timings);
    }
    let budget = draft_budget(&config.keep, rho, l_target, content_len)?;
    stats.draft_budget = budget;
    if budget >= content_len {
        return passthrough(prompt, rho, stats, &content, target, timings);
    }

    if let Some(limit) = provider.max_context() {
        if draft_tok.len() > limit {
            return Err(Error::DraftContextExceeded { seq_len: draft_tok.len(), limit });
        }
    }

    let t = Instant::now();
    let request = AttentionRequest {
        draft_model_id: config.draft_model_id.clone(),
        draft_token_ids: draft_tok.token_ids().to_vec(),
        n_lookahead: config.n_lookahead,
        reduction: config.reduction,
    };
    let attn = request.accept(provider.provide(&request)?)?;
    timings.attention_ms = elapsed_ms(t);

    let t = Instant::now();
    let importance = aggregate_max_mean(&attn).gather(&content)?;
    let smoothed = smooth(&importance, config.pooling_kernel)?;
    let ranges = partition(content_len, config.chunk_size)?;
    let chunks = score_chunks(&smoothed, &ranges)?;
    let selection = select_top_k(&chunks, budget, forced_tail.min(budget))?;
    timings.select_ms = elapsed_ms(t);

    stats.chunk_count = chunks.len();
    stats.forced_chunks = selection.forced.len();
    stats.budget_clamped = selection.budget_clamped;

    let mut selected = selection.indices;
    let mut current = render_and_count(prompt, &draft_tok, &content, &ranges, &selected, config, target, &mut timings)?;
    let mut passes = 0;
    // A drop is kept only if it moves |u| closer to the requested length.
    while passes < MAX_REFINE_PASSES && current.u_len as f64 > requested_target * (1.0 + config.slack) {
        let Some(victim) = lowest_droppable(&chunks, &selected, &selection.forced) else { break };
        let trial: Vec<usize> = selected.iter().copied().filter(|&i| i != victim).collect();
        let candidate = render_and_count(prompt, &draft_tok, &content, &ranges, &trial, config, target, &mut timings)?;
        let distance = |u: usize| (u as f64 - requested_target).abs();
        if distance(candidate.u_len) >= distance(current.u_len) {
            break;
        }
        selected = trial;
        current = candidate;
        passes += 1;
    }
    let Counted { rendered, encoded, u_len } = current;

    stats.compressed_target_tokens = u_len;
    stats.target_deviation = u_len as f64 / requested_target - 1.0;
    stats.kept_draft_tokens = rendered.content_spans.kept_tokens();
    stats.selected_chunks = selected.len();
    stats.segment_count = rendered.assembled.segment_count;
    stats.delimiter_count = rendered.assembled.delimiter_count;
    stats.refine_passes = passes;

    let target_token_ids = encoded.token_ids().to_vec();
    let prompt_out = CompressedPrompt {
        position_ids: assign_position_ids(&target_token_ids),
        target_token_ids,
        text: rendered.assembled.text,
        requested_keep_rate: rho,
        achieved_keep_rate: u_len as f64 / l_target as f64,
        draft_spans: rendered.draft_spans,
        stats,
    };
    Ok((prompt_out, timings))
}

struct Counted {
    rendered: Rendered,
    encoded: TokenizationWithOffsets,
    u_len: usize,
}

#[allow(clippy::too_many_arguments)]
fn render_and_count(
    prompt: &str,
    draft_tok: &TokenizationWithOffsets,
    content: &[usize],
    ranges: &[std::ops::Range<usize>],
    selected: &[usize],
    config: &CompressionConfig,
    target: &dyn Tokenizer,
    timings: &mut StageTimings,
) -> Result<Counted> {
    let t = Instant::now();
    let rendered = render(prompt, draft_tok, content, ranges, selected, &config.delimiter)?;
    timings.assemble_ms += elapsed_ms(t);
    let t = Instant::now();
    let encoded = target.encode(&rendered.assembled.text)?;
    timings.target_tokenize_ms += elapsed_ms(t);
    let u_len = encoded.content_len();
    Ok(Counted { rendered, encoded, u_len })
}

struct Rendered {
    content_spans: SelectedSpans,
    draft_spans: SelectedSpans,
    assembled: AssembledText,
}

fn render(
    prompt: &str,
    draft_tok: &TokenizationWithOffsets,
    content: &[usize],
    ranges: &[std::ops::Range<usize>],
    selected: &[usize],
    delimiter: &str,
) -> Result<Rendered> {
    let content_spans = merge_adjacent(selected, ranges)?;
    let draft_spans = to_draft_spans(&content_spans, content)?;
    let byte_ranges = map_spans_to_byte_ranges(draft_tok, prompt, &draft_spans)?;
    let assembled = assemble(prompt, &byte_ranges, delimiter)?;
    Ok(Rendered { content_spans, draft_spans, assembled })
}

/// Maps spans over content-token indices to spans over draft-token indices.
fn to_draft_spans(spans: &SelectedSpans, content: &[usize]) -> Result<SelectedSpans> {
    SelectedSpans::new(
        spans
            .spans()
            .iter()
            .map(|s| content[s.start]..content[s.end - 1] + 1)
            .collect(),
    )
}

fn lowest_droppable(chunks: &[ChunkScore], selected: &[usize], forced: &[usize]) -> Option<usize> {
    selected
        .iter()
        .filter(|i| !forced.contains(i))
        .map(|&i| &chunks[i])
        .min_by(|a, b| a.score.total_cmp(&b.score).then(b.index.cmp(&a.index)))
        .map(|c| c.index)
}

fn passthrough(
    prompt: &str,
    rho: f64,
    mut stats: CompressionStats,
    content: &[usize],
    target: &dyn Tokenizer,
    mut timings: StageTimings,
) -> Result<(CompressedPrompt, StageTimings)> {
    let t = Instant::now();
    let encoded = target.encode(prompt)?;
    timings.target_tokenize_ms = elapsed_ms(t);
    let u_len = encoded.content_len();
    let draft_spans = match (content.first(), content.last()) {
        (Some(&first), Some(&last)) => SelectedSpans::new(vec![first..last + 1])?,
        _ => SelectedSpans::new(Vec::new())?,
    };
    stats.bypassed = true;
    stats.compressed_target_tokens = u_len;
    stats.target_deviation = u_len as f64 / stats.requested_target_tokens - 1.0;
    stats.kept_draft_tokens = draft_spans.kept_tokens();
    stats.segment_count = usize::from(!prompt.is_empty());
    stats.chunk_count = 0;
    let target_token_ids = encoded.token_ids().to_vec();
    let out = CompressedPrompt {
        text: prompt.to_owned(),
        position_ids: assign_position_ids(&target_token_ids),
        target_token_ids,
        requested_keep_rate: rho,
        achieved_keep_rate: u_len as f64 / stats.original_target_tokens as f64,
        draft_spans,
        stats,
    };
    Ok((out, timings))
}

/// Shared handles for repeated compressions.
#[derive(Clone)]
pub struct Compressor {
    pub provider: Arc<dyn AttentionProvider>,
    pub draft: Arc<dyn Tokenizer>,
    pub target: Arc<dyn Tokenizer>,
}

impl Compressor {
    pub fn new(
        provider: Arc<dyn AttentionProvider>,
        draft: Arc<dyn Tokenizer>,
        target: Arc<dyn Tokenizer>,
    ) -> Self {
        Self { provider, draft, target }
    }

    pub fn compress(&self, prompt: &str, config: &CompressionConfig) -> Result<CompressedPrompt> {
        compress(prompt, config, self.provider.as_ref(), self.draft.as_ref(), self.target.as_ref())
    }

    pub fn compress_timed(
        &self,
        prompt: &str,
        config: &CompressionConfig,
    ) -> Result<(CompressedPrompt, StageTimings)> {
        compress_timed(prompt, config, self.provider.as_ref(), self.draft.as_ref(), self.target.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::SyntheticProvider;
    use crate::tokenizer::{ByteTokenizer, WhitespaceTokenizer};

    fn no_align(mode: KeepMode) -> KeepRateSpec {
        KeepRateSpec { mode, block_align: None }
    }

    #[test]
    fn keep_rate_reference_values() {
        assert_eq!(compute_keep_rate(110_000, &no_align(KeepMode::TargetLength(33_000))).unwrap(), 0.30);
        assert_eq!(compute_keep_rate(128_000, &no_align(KeepMode::TargetLength(16_000))).unwrap(), 0.125);
        assert_eq!(compute_keep_rate(1000, &no_align(KeepMode::TargetLength(5000))).unwrap(), 1.0);
        assert_eq!(compute_keep_rate(1000, &no_align(KeepMode::TargetLength(1000))).unwrap(), 1.0);
        assert_eq!(compute_keep_rate(1234, &KeepRateSpec::fraction(0.2)).unwrap(), 0.2);
        assert!(matches!(compute_keep_rate(0, &KeepRateSpec::fraction(0.2)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn block_alignment() {
        assert_eq!(align_to_block(16_384, 4096), 16_384);
        assert_eq!(align_to_block(16_000, 4096), 16_384);
        assert_eq!(align_to_block(10, 4096), 4096);
        assert_eq!(align_to_block(6144, 4096), 8192);
        assert_eq!(align_to_block(6143, 4096), 4096);
        let spec = KeepRateSpec::target_length(16_000);
        assert_eq!(spec.aligned_target_length(), Some(16_384));
        assert_eq!(compute_keep_rate(131_072, &spec).unwrap(), 0.125);
    }

    #[test]
    fn invalid_keep_specs() {
        assert!(KeepRateSpec::fraction(0.0).validate().is_err());
        assert!(KeepRateSpec::fraction(1.5).validate().is_err());
        assert!(KeepRateSpec::fraction(f64::NAN).validate().is_err());
        assert!(KeepRateSpec::target_length(0).validate().is_err());
        assert!(KeepRateSpec::fraction(0.5).with_block_align(Some(0)).validate().is_err());
    }

    #[test]
    fn draft_budget_rounding() {
        let spec = KeepRateSpec::fraction(0.3);
        assert_eq!(draft_budget(&spec, 0.3, 1000, 1000).unwrap(), 300);
        assert_eq!(draft_budget(&spec, 0.3, 1000, 1001).unwrap(), 301);
        let spec = no_align(KeepMode::TargetLength(33_000));
        assert_eq!(draft_budget(&spec, 0.3, 110_000, 1000).unwrap(), 300);
        let tiny = KeepRateSpec::fraction(0.001);
        assert!(matches!(draft_budget(&tiny, 0.001, 100, 100), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn position_ids() {
        assert!(assign_position_ids(&[]).is_empty());
        assert_eq!(assign_position_ids(&[9, 9, 9]), vec![0, 1, 2]);
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{}", i % 97)).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn full_keep_is_identity() {
        let text = format!("  {}\n", words(500));
        let out = compress(
            &text,
            &CompressionConfig::default(),
            &SyntheticProvider::new(0),
            &WhitespaceTokenizer::new(),
            &ByteTokenizer::new(3).unwrap(),
        )
        .unwrap();
        assert_eq!(out.text, text);
        assert_eq!(out.achieved_keep_rate, 1.0);
        assert_eq!(out.stats.delimiter_count, 0);
    }

    #[test]
    fn short_prompt_bypasses() {
        let config = CompressionConfig::default().with_keep(KeepRateSpec::fraction(0.1));
        let out = compress(
            "only a few words here",
            &config,
            &SyntheticProvider::new(0),
            &WhitespaceTokenizer::new(),
            &WhitespaceTokenizer::new(),
        )
        .unwrap();
        assert!(out.stats.bypassed);
        assert_eq!(out.text, "only a few words here");
        assert_eq!(out.achieved_keep_rate, 1.0);
    }

    #[test]
    fn compresses_and_numbers_positions() {
        let text = words(2000);
        let config = CompressionConfig::default().with_keep(KeepRateSpec::fraction(0.25));
        let out = compress(
            &text,
            &config,
            &SyntheticProvider::new(5),
            &WhitespaceTokenizer::new(),
            &WhitespaceTokenizer::new(),
        )
        .unwrap();
        assert!(!out.stats.bypassed);
        assert_eq!(out.stats.draft_budget, 500);
        assert!(out.stats.kept_draft_tokens >= 500 && out.stats.kept_draft_tokens < 532);
        assert_eq!(out.position_ids, (0..out.target_token_ids.len()).collect::<Vec<_>>());
        assert_eq!(out.stats.delimiter_count, out.text.matches(DEFAULT_DELIMITER).count());
        assert!(text.ends_with(out.text.rsplit(DEFAULT_DELIMITER).next().unwrap()));
    }

    #[test]
    fn empty_prompt_and_bad_config() {
        let p = SyntheticProvider::new(0);
        let w = WhitespaceTokenizer::new();
        assert!(matches!(
            compress("", &CompressionConfig::default(), &p, &w, &w),
            Err(Error::InvalidInput(_))
        ));
        let bad = CompressionConfig { pooling_kernel: 4, ..CompressionConfig::default() };
        assert!(matches!(compress("a b", &bad, &p, &w, &w), Err(Error::InvalidConfig(_))));
        let bad = CompressionConfig { delimiter: String::new(), ..CompressionConfig::default() };
        assert!(matches!(compress("a b", &bad, &p, &w, &w), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn draft_context_limit_is_hard_error() {
        let text = words(300);
        let config = CompressionConfig::default().with_keep(KeepRateSpec::fraction(0.5));
        let p = SyntheticProvider::new(0).with_max_context(256);
        let w = WhitespaceTokenizer::new();
        match compress(&text, &config, &p, &w, &w) {
            Err(Error::DraftContextExceeded { seq_len, limit }) => assert_eq!((seq_len, limit), (300, 256)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refinement_drops_chunks_when_far_over_target() {
        // Delimiter much longer than a chunk pushes the target far over budget.
        let text = words(2000);
        let config = CompressionConfig {
            delimiter: " x ".repeat(40),
            chunk_size: 8,
            forced_tail_tokens: Some(0),
            ..CompressionConfig::default()
        }
        .with_keep(KeepRateSpec::fraction(0.2));
        let w = WhitespaceTokenizer::new();
        let out = compress(&text, &config, &SyntheticProvider::new(2), &w, &w).unwrap();
        assert_eq!(out.stats.refine_passes, MAX_REFINE_PASSES);
        assert_eq!(out.stats.selected_chunks, 50 - MAX_REFINE_PASSES);
    }
}
