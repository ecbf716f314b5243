//! Cross-family speculative prefill.
//!
//! A small draft model scores every token of a long prompt through its
//! attention over a few lookahead decoding steps. The highest-scoring chunks
//! of the prompt are kept, stitched back together as text with a delimiter
//! marking each cut, and re-tokenized for a target model that may use a
//! completely different tokenizer. The target receives fresh contiguous
//! position ids, so no alignment between the two vocabularies is needed.
//!
//! ```text
//!  prompt ──draft tokenize──▶ provider (N lookahead steps) ──▶ max over layer/head,
//!         mean over steps ──▶ avg-pool ──▶ chunk means ──▶ top-k under budget
//!         ──▶ merge runs ──▶ byte ranges ──▶ text + delimiters ──▶ target tokenize
//! ```
//!
//! Module map:
//!
//! - [`importance`]: attention tensor to per-token saliency
//! - [`selection`]: chunking, top-k under a token budget, span merging
//! - [`span_text`]: token spans to byte ranges, text assembly
//! - [`tokenizer`]: tokenizer trait, test doubles, `tokenizer.json` adapter
//! - [`attention`]: attention providers and the `.attn` dump format
//! - [`pipeline`]: keep-rate arithmetic and the end-to-end `compress`
//! - [`config`]: profile configuration files
//! - [`bench`] / [`corpus`]: benchmark records, reports and synthetic corpora

pub mod attention;
pub mod bench;
pub mod config;
pub mod corpus;
mod error;
pub mod importance;
pub mod pipeline;
pub mod selection;
pub mod span_text;
pub mod tokenizer;

pub use error::{Error, ErrorClass, Result};
