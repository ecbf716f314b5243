//! JSONL corpora and seeded synthetic generators.
//!
//! Each corpus line is a JSON object with a `prompt` and optional `id`,
//! `needle` (text that must survive compression) and `question`.

use std::io::BufRead;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::Saliency;
use crate::error::Result;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(default)]
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

impl Sample {
    /// Whether the needle appears verbatim in `text`. `None` without a needle.
    pub fn needle_retained(&self, text: &str) -> Option<bool> {
        self.needle.as_deref().map(|n| text.contains(n))
    }

    /// Byte range of the needle's first occurrence in the prompt.
    pub fn needle_bytes(&self) -> Option<Range<usize>> {
        let needle = self.needle.as_deref()?;
        let start = self.prompt.find(needle)?;
        Some(start..start + needle.len())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCorpus {
    pub samples: Vec<Sample>,
    /// 1-based line numbers that could not be parsed.
    pub skipped_lines: Vec<usize>,
}

/// Reads JSONL, skipping blank lines and logging malformed ones.
pub fn parse_jsonl(reader: impl BufRead) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Sample>(&line) {
            Ok(mut sample) => {
                if sample.id.is_empty() {
                    sample.id = format!("line-{}", i + 1);
                }
                out.samples.push(sample);
            }
            Err(e) => {
                log::warn!("skipping corpus line {}: {e}", i + 1);
                out.skipped_lines.push(i + 1);
            }
        }
    }
    Ok(out)
}

pub fn to_jsonl(samples: &[Sample]) -> String {
    samples
        .iter()
        .map(|s| serde_json::to_string(s).expect("sample serializes") + "\n")
        .collect()
}

/// Draft-token positions overlapping the needle, as a saliency map.
pub fn needle_saliency(sample: &Sample, draft: &dyn Tokenizer) -> Result<Saliency> {
    let Some(bytes) = sample.needle_bytes() else {
        return Ok(Saliency::default());
    };
    let enc = draft.encode(&sample.prompt)?;
    let hits: Vec<usize> = enc
        .offsets()
        .iter()
        .enumerate()
        .filter(|(_, &(s, e))| s < e && s < bytes.end && e > bytes.start)
        .map(|(i, _)| i)
        .collect();
    Ok(match (hits.first(), hits.last()) {
        (Some(&a), Some(&b)) => Saliency::positions([a..b + 1]),
        _ => Saliency::default(),
    })
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ter", "san", "vo", "rin", "da", "pe", "shu", "gal", "ne", "or", "bi", "tu", "qua", "zel",
    "fa", "mor", "it", "ex", "ul", "ren", "cy",
];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=4);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn filler(rng: &mut ChaCha8Rng, words: usize) -> String {
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push(if rng.gen_ratio(1, 12) { '\n' } else { ' ' });
        }
        out.push_str(&random_word(rng));
        if rng.gen_ratio(1, 10) {
            out.push('.');
        }
    }
    out
}

/// Retrieval-style samples: random filler with one needle sentence buried at
/// a random depth and a question about it at the end.
pub fn needle_corpus(n: usize, seed: u64, words: Range<usize>) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let total = rng.gen_range(words.clone());
            let key = random_word(&mut rng);
            let value: u32 = rng.gen_range(100_000..1_000_000);
            let needle = format!("The special magic number for {key} is {value}.");
            let question = format!("What is the special magic number for {key}?");
            let depth = rng.gen_range(0..=total);
            let before = filler(&mut rng, depth);
            let after = filler(&mut rng, total - depth);
            let prompt = format!("{before} {needle} {after}\n\nQuestion: {question}");
            Sample { id: format!("needle-{i}"), prompt, needle: Some(needle), question: Some(question) }
        })
        .collect()
}

/// Plain filler samples of varying length.
pub fn text_corpus(n: usize, seed: u64, words: Range<usize>) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let total = rng.gen_range(words.clone());
            Sample { id: format!("text-{i}"), prompt: filler(&mut rng, total), needle: None, question: None }
        })
        .collect()
}

/// Synthetic source files: many small functions and a final question.
pub fn code_corpus(n: usize, seed: u64, functions: Range<usize>) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let count = rng.gen_range(functions.clone());
            let mut prompt = String::new();
            for f in 0..count {
                let name = format!("{}_{f}", random_word(&mut rng));
                let args: Vec<String> = (0..rng.gen_range(0..4)).map(|_| random_word(&mut rng)).collect();
                prompt.push_str(&format!("def {name}({}):\n", args.join(", ")));
                for _ in 0..rng.gen_range(2..8) {
                    let lhs = random_word(&mut rng);
                    let rhs = random_word(&mut rng);
                    prompt.push_str(&format!("    {lhs} = {rhs}({})\n", rng.gen_range(0..100)));
                }
                prompt.push_str(&format!("    return {}\n\n", random_word(&mut rng)));
            }
            prompt.push_str("Which function contains the deliberate error?\n");
            Sample { id: format!("code-{i}"), prompt, needle: None, question: None }
        })
        .collect()
}
