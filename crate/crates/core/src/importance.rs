//! Token importance from lookahead attention.
//!
//! The draft model's attention over the prompt is collected for `N` lookahead
//! steps, each step holding an `L x H x S` block. Importance at a prompt
//! position is the max over layers and heads, averaged over the steps. The
//! resulting vector is then smoothed with a count-normalized 1-D average pool.

use crate::error::{Error, Result};

/// Shape of a [`LookaheadAttention`] tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttentionDims {
    pub n_lookahead: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub seq_len: usize,
}

impl AttentionDims {
    pub fn new(n_lookahead: usize, n_layers: usize, n_heads: usize, seq_len: usize) -> Self {
        Self { n_lookahead, n_layers, n_heads, seq_len }
    }

    /// Total element count, or `None` on overflow.
    pub fn element_count(&self) -> Option<usize> {
        self.n_lookahead
            .checked_mul(self.n_layers)?
            .checked_mul(self.n_heads)?
            .checked_mul(self.seq_len)
    }

    fn validate(&self) -> Result<usize> {
        if self.n_lookahead == 0 || self.n_layers == 0 || self.n_heads == 0 || self.seq_len == 0 {
            return Err(Error::input(format!("attention dimensions must all be >= 1, got {self:?}")));
        }
        self.element_count()
            .ok_or_else(|| Error::input(format!("attention dimensions overflow: {self:?}")))
    }
}

/// Draft attention over the prompt, one `[layer][head][position]` block per
/// lookahead step.
///
/// Storage is a flat row-major buffer in `[step][layer][head][position]`
/// order. A per-step-reduced tensor is simply one with `n_layers == n_heads == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadAttention {
    dims: AttentionDims,
    values: Vec<f32>,
}

impl LookaheadAttention {
    pub fn new(dims: AttentionDims, values: Vec<f32>) -> Result<Self> {
        let expected = dims.validate()?;
        if values.len() != expected {
            return Err(Error::input(format!(
                "attention tensor has {} values, dims {:?} require {}",
                values.len(),
                dims,
                expected
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::input(format!(
                "attention value at flat index {pos} is {} (must be finite and >= 0)",
                values[pos]
            )));
        }
        Ok(Self { dims, values })
    }

    /// Builds a tensor by evaluating `f(step, layer, head, position)`.
    pub fn from_fn(
        dims: AttentionDims,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let count = dims.validate()?;
        let mut values = Vec::with_capacity(count);
        for step in 0..dims.n_lookahead {
            for layer in 0..dims.n_layers {
                for head in 0..dims.n_heads {
                    for pos in 0..dims.seq_len {
                        values.push(f(step, layer, head, pos));
                    }
                }
            }
        }
        Self::new(dims, values)
    }

    pub fn dims(&self) -> AttentionDims {
        self.dims
    }

    pub fn seq_len(&self) -> usize {
        self.dims.seq_len
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, step: usize, layer: usize, head: usize, pos: usize) -> f32 {
        let d = &self.dims;
        self.values[((step * d.n_layers + layer) * d.n_heads + head) * d.seq_len + pos]
    }

    /// Whether layer/head maxima have already been taken.
    pub fn is_reduced(&self) -> bool {
        self.dims.n_layers == 1 && self.dims.n_heads == 1
    }

    /// The `[layer][head][position]` block for one lookahead step.
    fn step_block(&self, step: usize) -> &[f32] {
        let block = self.dims.n_layers * self.dims.n_heads * self.dims.seq_len;
        &self.values[step * block..(step + 1) * block]
    }

    /// Collapses layers and heads by max, leaving an `[N, 1, 1, S]` tensor.
    ///
    /// Aggregating the reduced tensor yields exactly the same
    /// [`ImportanceVector`] as aggregating `self`.
    pub fn reduce_per_step(&self) -> LookaheadAttention {
        let s = self.dims.seq_len;
        let mut values = Vec::with_capacity(self.dims.n_lookahead * s);
        for step in 0..self.dims.n_lookahead {
            values.extend_from_slice(&step_max(self.step_block(step), s));
        }
        LookaheadAttention {
            dims: AttentionDims::new(self.dims.n_lookahead, 1, 1, s),
            values,
        }
    }
}

fn step_max(block: &[f32], seq_len: usize) -> Vec<f32> {
    let mut rows = block.chunks_exact(seq_len);
    let mut out = rows.next().expect("step block holds at least one row").to_vec();
    for row in rows {
        for (m, &v) in out.iter_mut().zip(row) {
            if v > *m {
                *m = v;
            }
        }
    }
    out
}

/// Per-token saliency over the draft sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector(Vec<f64>);

impl ImportanceVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(pos) = scores.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::input(format!(
                "importance score at {pos} is {} (must be finite and >= 0)",
                scores[pos]
            )));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Picks out the scores at `positions`, in the given order.
    pub fn gather(&self, positions: &[usize]) -> Result<ImportanceVector> {
        positions
            .iter()
            .map(|&p| {
                self.0.get(p).copied().ok_or_else(|| {
                    Error::input(format!("position {p} outside importance vector of length {}", self.0.len()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(ImportanceVector)
    }
}

/// Max over layers and heads, then mean over lookahead steps.
///
/// Per-step maxima are exact in `f32`; the mean is accumulated in `f64`, so a
/// full tensor and its [`LookaheadAttention::reduce_per_step`] form produce
/// bit-identical output.
pub fn aggregate_max_mean(attn: &LookaheadAttention) -> ImportanceVector {
    let d = attn.dims;
    let mut acc = vec![0.0f64; d.seq_len];
    for step in 0..d.n_lookahead {
        let maxes = step_max(attn.step_block(step), d.seq_len);
        for (a, m) in acc.iter_mut().zip(maxes) {
            *a += f64::from(m);
        }
    }
    let n = d.n_lookahead as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    ImportanceVector(acc)
}

/// Centered 1-D average pooling with count-normalized edges.
///
/// Each output is the mean of the inputs in `[s - k/2, s + k/2]` clipped to
/// the sequence, divided by the number of in-range positions. A kernel wider
/// than the sequence simply clips on both sides.
pub fn smooth(scores: &ImportanceVector, kernel: usize) -> Result<ImportanceVector> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::config(format!("pooling kernel must be odd and >= 1, got {kernel}")));
    }
    let input = &scores.0;
    if kernel == 1 || input.is_empty() {
        return Ok(scores.clone());
    }
    let half = kernel / 2;
    let n = input.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    let mut running = 0.0;
    for &v in input {
        running += v;
        prefix.push(running);
    }
    let out = (0..n)
        .map(|s| {
            let lo = s.saturating_sub(half);
            let hi = (s + half + 1).min(n);
            // Clamp: prefix differences can dip a hair below zero.
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0)
        })
        .collect();
    Ok(ImportanceVector(out))
}
