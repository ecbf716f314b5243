//! Brute-force reference implementations and input generators shared by the
//! integration tests. Nothing here calls into the library's scoring code; the
//! tensor layout `[step][layer][head][pos]` is indexed by hand.

#![allow(dead_code)]

use std::ops::Range;

use rand::Rng;
use xfam_core::importance::{AttentionDims, LookaheadAttention};

/// Max over layers and heads per step, then mean over steps, with plain loops.
pub fn naive_importance(attn: &LookaheadAttention) -> Vec<f64> {
    let d = attn.dims();
    let raw = attn.values();
    let mut out = Vec::with_capacity(d.seq_len);
    for pos in 0..d.seq_len {
        let mut total = 0.0f64;
        for step in 0..d.n_lookahead {
            let mut best = f64::NEG_INFINITY;
            for layer in 0..d.n_layers {
                for head in 0..d.n_heads {
                    let idx = ((step * d.n_layers + layer) * d.n_heads + head) * d.seq_len + pos;
                    best = best.max(f64::from(raw[idx]));
                }
            }
            total += best;
        }
        out.push(total / d.n_lookahead as f64);
    }
    out
}

/// Centered window mean that divides by the number of in-range positions.
pub fn naive_smooth(x: &[f64], kernel: usize) -> Vec<f64> {
    let r = kernel / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(x.len() - 1);
            let mut sum = 0.0;
            let mut count = 0usize;
            for v in &x[lo..=hi] {
                sum += v;
                count += 1;
            }
            sum / count as f64
        })
        .collect()
}

pub fn naive_chunks(seq_len: usize, chunk: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < seq_len {
        let end = if start + chunk < seq_len { start + chunk } else { seq_len };
        out.push(start..end);
        start = end;
    }
    out
}

pub fn naive_chunk_means(x: &[f64], chunks: &[Range<usize>]) -> Vec<f64> {
    chunks
        .iter()
        .map(|r| {
            let mut sum = 0.0;
            for i in r.clone() {
                sum += x[i];
            }
            sum / r.len() as f64
        })
        .collect()
}

/// Forced tail first, then an explicit sort by (score desc, index asc) and
/// admission while the kept count is under the clamped budget.
pub fn naive_select(scores: &[f64], chunks: &[Range<usize>], budget: usize, tail: usize) -> Vec<usize> {
    let seq_len = chunks.last().map_or(0, |r| r.end);
    let budget = budget.min(seq_len);
    let tail_start = seq_len - tail.min(seq_len);
    let mut chosen = vec![false; chunks.len()];
    let mut kept = 0;
    if tail > 0 {
        for (i, r) in chunks.iter().enumerate() {
            if r.end > tail_start {
                chosen[i] = true;
                kept += r.len();
            }
        }
    }
    let mut order: Vec<usize> = (0..chunks.len()).filter(|&i| !chosen[i]).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    for i in order {
        if kept >= budget {
            break;
        }
        chosen[i] = true;
        kept += chunks[i].len();
    }
    (0..chunks.len()).filter(|&i| chosen[i]).collect()
}

/// Groups consecutive chunk indices into token spans.
pub fn naive_merge(selected: &[usize], chunks: &[Range<usize>]) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = Vec::new();
    for (k, &i) in selected.iter().enumerate() {
        if k > 0 && selected[k - 1] + 1 == i {
            out.last_mut().unwrap().end = chunks[i].end;
        } else {
            out.push(chunks[i].clone());
        }
    }
    out
}

/// Whether two selections agree up to score differences within `tol`.
pub fn selections_equivalent(a: &[usize], b: &[usize], scores: &[f64], tol: f64) -> bool {
    let only_a: Vec<usize> = a.iter().copied().filter(|i| !b.contains(i)).collect();
    let only_b: Vec<usize> = b.iter().copied().filter(|i| !a.contains(i)).collect();
    if only_a.len() != only_b.len() {
        return false;
    }
    only_a
        .iter()
        .all(|&x| only_b.iter().all(|&y| (scores[x] - scores[y]).abs() <= tol))
}

/// Random tensor with every dimension drawn from the given ranges. A quarter
/// of the tensors use coarse quantized values so exact ties occur.
pub fn random_attention(rng: &mut impl Rng, max_dim: usize, max_seq: usize) -> LookaheadAttention {
    let dims = AttentionDims::new(
        rng.gen_range(1..=max_dim),
        rng.gen_range(1..=max_dim),
        rng.gen_range(1..=max_dim),
        rng.gen_range(1..=max_seq),
    );
    let quantized = rng.gen_ratio(1, 4);
    let values = (0..dims.element_count().unwrap())
        .map(|_| {
            if quantized {
                f32::from(rng.gen_range(0u8..8)) / 8.0
            } else {
                rng.gen::<f32>()
            }
        })
        .collect();
    LookaheadAttention::new(dims, values).unwrap()
}

const PIECES: &[&str] = &[
    "alpha", "beta", "gamma", "x", "yy", "zeta.", "naïve", "日本語", "emoji🙂", "a-b", "(c)", "1234", "[...]",
    "// omitted", "fn", "{", "}", "δ", "ok,", "--",
];
const GAPS: &[&str] = &[" ", " ", " ", "  ", "\n", "\t", "\n\n", " \u{00a0}"];

/// Random prompt of `words` pieces with mixed whitespace and multibyte text.
pub fn random_prompt(rng: &mut impl Rng, words: usize) -> String {
    let mut out = String::new();
    if rng.gen_ratio(1, 8) {
        out.push_str(GAPS[rng.gen_range(0..GAPS.len())]);
    }
    for i in 0..words {
        if i > 0 {
            out.push_str(GAPS[rng.gen_range(0..GAPS.len())]);
        }
        out.push_str(PIECES[rng.gen_range(0..PIECES.len())]);
    }
    if rng.gen_ratio(1, 8) {
        out.push('\n');
    }
    out
}

/// Whether `needle` occurs in `hay` as a (not necessarily contiguous) byte
/// subsequence.
pub fn is_byte_subsequence(needle: &[u8], hay: &[u8]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|b| it.any(|h| h == b))
}
