//! Chunk partitioning, top-k selection under a token budget, and span merging.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::ImportanceVector;

/// One chunk of the draft sequence and its mean smoothed importance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkScore {
    pub index: usize,
    pub range: Range<usize>,
    pub score: f64,
}

impl ChunkScore {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Splits `[0, seq_len)` into consecutive ranges of `chunk_size`, the last one
/// possibly shorter.
pub fn partition(seq_len: usize, chunk_size: usize) -> Result<Vec<Range<usize>>> {
    if chunk_size == 0 {
        return Err(Error::config("chunk size must be >= 1"));
    }
    Ok((0..seq_len)
        .step_by(chunk_size)
        .map(|start| start..(start + chunk_size).min(seq_len))
        .collect())
}

/// Mean importance over each range.
pub fn score_chunks(scores: &ImportanceVector, ranges: &[Range<usize>]) -> Result<Vec<ChunkScore>> {
    let values = scores.as_slice();
    ranges
        .iter()
        .enumerate()
        .map(|(index, range)| {
            if range.is_empty() || range.end > values.len() {
                return Err(Error::input(format!(
                    "chunk {index} range {range:?} is empty or outside [0, {})",
                    values.len()
                )));
            }
            let sum: f64 = values[range.clone()].iter().sum();
            Ok(ChunkScore { index, range: range.clone(), score: sum / range.len() as f64 })
        })
        .collect()
}

/// Outcome of [`select_top_k`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKSelection {
    /// Selected chunk indices, ascending.
    pub indices: Vec<usize>,
    /// Indices that were admitted unconditionally to cover the tail.
    pub forced: Vec<usize>,
    pub kept_tokens: usize,
    /// Effective budget after clamping to the sequence length.
    pub budget_tokens: usize,
    /// Set when the requested budget exceeded the sequence and was clamped.
    pub budget_clamped: bool,
}

/// Picks chunks by descending score until the token budget is met.
///
/// Chunks intersecting the final `forced_tail_tokens` positions are admitted
/// first. The rest are ranked by score, ties going to the lower index, and
/// admitted one by one while fewer than `budget_tokens` tokens are kept, so
/// the last admitted chunk can overshoot the budget by at most `c - 1`.
pub fn select_top_k(
    chunks: &[ChunkScore],
    budget_tokens: usize,
    forced_tail_tokens: usize,
) -> Result<TopKSelection> {
    if budget_tokens == 0 {
        return Err(Error::config("token budget must be >= 1"));
    }
    if forced_tail_tokens > budget_tokens {
        return Err(Error::config(format!(
            "forced tail ({forced_tail_tokens}) exceeds token budget ({budget_tokens})"
        )));
    }
    let seq_len = chunks.iter().map(ChunkScore::len).sum::<usize>();
    if seq_len == 0 {
        return Err(Error::EmptySelection("no chunks to select from".into()));
    }
    let budget_clamped = budget_tokens > seq_len;
    if budget_clamped {
        log::warn!("token budget {budget_tokens} exceeds sequence length {seq_len}; clamping");
    }
    let budget = budget_tokens.min(seq_len);

    let tail_start = seq_len - forced_tail_tokens.min(seq_len);
    let mut selected = BTreeSet::new();
    let mut forced = Vec::new();
    let mut kept = 0usize;
    if forced_tail_tokens > 0 {
        for chunk in chunks.iter().filter(|c| c.range.end > tail_start) {
            selected.insert(chunk.index);
            forced.push(chunk.index);
            kept += chunk.len();
        }
    }

    let mut ranked: Vec<&ChunkScore> = chunks.iter().filter(|c| !selected.contains(&c.index)).collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    for chunk in ranked {
        if kept >= budget {
            break;
        }
        selected.insert(chunk.index);
        kept += chunk.len();
    }

    forced.sort_unstable();
    Ok(TopKSelection {
        indices: selected.into_iter().collect(),
        forced,
        kept_tokens: kept,
        budget_tokens: budget,
        budget_clamped,
    })
}

/// Sorted, disjoint, non-touching half-open token intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedSpans {
    spans: Vec<Range<usize>>,
    kept_tokens: usize,
}

impl SelectedSpans {
    /// Validates that spans are non-empty, strictly increasing and separated
    /// by at least one position.
    pub fn new(spans: Vec<Range<usize>>) -> Result<Self> {
        for (i, span) in spans.iter().enumerate() {
            if span.is_empty() {
                return Err(Error::input(format!("span {i} ({span:?}) is empty")));
            }
            if i > 0 && spans[i - 1].end >= span.start {
                return Err(Error::input(format!(
                    "spans {:?} and {:?} overlap, touch or are out of order",
                    spans[i - 1],
                    span
                )));
            }
        }
        let kept_tokens = spans.iter().map(|s| s.len()).sum();
        Ok(Self { spans, kept_tokens })
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn kept_tokens(&self) -> usize {
        self.kept_tokens
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// All kept positions in ascending order.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.spans.iter().flat_map(|s| s.clone())
    }
}

/// Joins runs of consecutive chunk indices into single spans.
pub fn merge_adjacent(selected: &[usize], ranges: &[Range<usize>]) -> Result<SelectedSpans> {
    if selected.is_empty() {
        return Err(Error::EmptySelection("no chunks selected".into()));
    }
    let indices: BTreeSet<usize> = selected.iter().copied().collect();
    if let Some(&bad) = indices.iter().find(|&&i| i >= ranges.len()) {
        return Err(Error::input(format!("chunk index {bad} out of range ({} chunks)", ranges.len())));
    }
    let mut spans: Vec<Range<usize>> = Vec::new();
    let mut prev: Option<usize> = None;
    for idx in indices {
        let range = ranges[idx].clone();
        match (prev, spans.last_mut()) {
            (Some(p), Some(last)) if p + 1 == idx => last.end = range.end,
            _ => spans.push(range),
        }
        prev = Some(idx);
    }
    SelectedSpans::new(spans)
}
