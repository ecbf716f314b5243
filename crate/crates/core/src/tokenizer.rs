//! Tokenizer adapters.
//!
//! Draft tokenizers must report byte offsets so selected token spans can be
//! mapped back to text. Target tokenizers are only used to count and emit ids.
//! Two self-contained doubles ([`WhitespaceTokenizer`], [`ByteTokenizer`])
//! let everything run without model assets; [`HfTokenizer`] loads a standard
//! `tokenizer.json`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Token ids plus the byte span of each token in the source text.
///
/// Special tokens (BOS and friends) carry empty spans and are never offered
/// for selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizationWithOffsets {
    token_ids: Vec<TokenId>,
    offsets: Vec<(usize, usize)>,
    text_len: usize,
}

impl TokenizationWithOffsets {
    pub fn new(token_ids: Vec<TokenId>, offsets: Vec<(usize, usize)>, text_len: usize) -> Result<Self> {
        if token_ids.len() != offsets.len() {
            return Err(Error::input(format!(
                "{} token ids but {} offsets",
                token_ids.len(),
                offsets.len()
            )));
        }
        let mut prev_start = 0;
        for (i, &(start, end)) in offsets.iter().enumerate() {
            if start > end || end > text_len {
                return Err(Error::input(format!(
                    "offset {i} ({start}, {end}) invalid for text of {text_len} bytes"
                )));
            }
            if start < prev_start {
                return Err(Error::input(format!("offset {i} starts before its predecessor")));
            }
            prev_start = start;
        }
        Ok(Self { token_ids, offsets, text_len })
    }

    pub fn token_ids(&self) -> &[TokenId] {
        &self.token_ids
    }

    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.offsets
    }

    pub fn text_len(&self) -> usize {
        self.text_len
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn is_special(&self, index: usize) -> bool {
        let (start, end) = self.offsets[index];
        start == end
    }

    /// Indices of tokens that cover at least one byte of text.
    pub fn content_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_special(i)).collect()
    }

    pub fn content_len(&self) -> usize {
        (0..self.len()).filter(|&i| !self.is_special(i)).count()
    }
}

pub trait Tokenizer: Send + Sync {
    fn family_id(&self) -> &str;

    fn vocab_size(&self) -> usize;

    /// Whether `encode` reports meaningful byte offsets.
    fn supports_offsets(&self) -> bool {
        true
    }

    fn encode(&self, text: &str) -> Result<TokenizationWithOffsets>;

    fn decode(&self, ids: &[TokenId]) -> Result<String>;

    /// Number of content tokens, special tokens excluded.
    fn count_tokens(&self, text: &str) -> Result<usize> {
        Ok(self.encode(text)?.content_len())
    }
}

/// Encodes raw bytes, checking UTF-8 validity and offset support first.
pub fn encode_with_offsets(tok: &dyn Tokenizer, text: &[u8]) -> Result<TokenizationWithOffsets> {
    if !tok.supports_offsets() {
        return Err(Error::Capability(format!("tokenizer `{}` does not report offsets", tok.family_id())));
    }
    let text = std::str::from_utf8(text).map_err(|e| Error::input(format!("prompt is not UTF-8: {e}")))?;
    tok.encode(text)
}

pub fn count_tokens(tok: &dyn Tokenizer, text: &str) -> Result<usize> {
    tok.count_tokens(text)
}

/// Splits on whitespace; one token per word.
///
/// Each token's identity includes the whitespace in front of it (and, for
/// the last token, behind it), so decoding reproduces the input exactly.
/// Offsets cover the word only. Ids are 32-bit FNV hashes of the token
/// string; the reverse table used by `decode` is filled in by `encode`.
#[derive(Debug, Default)]
pub struct WhitespaceTokenizer {
    reverse: RwLock<HashMap<TokenId, String>>,
}

impl WhitespaceTokenizer {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&self, piece: &str) -> TokenId {
        let mut id = fnv1a32(piece.as_bytes());
        if let Some(existing) = self.reverse.read().expect("vocab lock").get(&id) {
            if existing == piece {
                return id;
            }
        }
        let mut table = self.reverse.write().expect("vocab lock");
        loop {
            match table.get(&id) {
                Some(existing) if existing == piece => return id,
                Some(_) => id = id.wrapping_add(1),
                None => {
                    table.insert(id, piece.to_owned());
                    return id;
                }
            }
        }
    }
}

fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c_9dc5;
    for &b in bytes {
        hash ^= u32::from(b);
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

impl Tokenizer for WhitespaceTokenizer {
    fn family_id(&self) -> &str {
        "whitespace"
    }

    fn vocab_size(&self) -> usize {
        1 << 32
    }

    fn encode(&self, text: &str) -> Result<TokenizationWithOffsets> {
        let mut words: Vec<(usize, usize)> = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            match (ch.is_whitespace(), start) {
                (true, Some(s)) => {
                    words.push((s, i));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((s, text.len()));
        }
        if words.is_empty() && !text.is_empty() {
            // Whitespace-only input: a single token keeps decode exact.
            words.push((0, text.len()));
        }

        let mut ids = Vec::with_capacity(words.len());
        let mut cursor = 0;
        for (i, &(_, end)) in words.iter().enumerate() {
            let piece_end = if i + 1 == words.len() { text.len() } else { end };
            ids.push(self.intern(&text[cursor..piece_end]));
            cursor = piece_end;
        }
        TokenizationWithOffsets::new(ids, words, text.len())
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let table = self.reverse.read().expect("vocab lock");
        ids.iter()
            .map(|id| {
                table
                    .get(id)
                    .map(String::as_str)
                    .ok_or_else(|| Error::Tokenizer(format!("unknown whitespace token id {id}")))
            })
            .collect()
    }
}

/// Fixed-width byte tokenizer: every `width` bytes form one token.
///
/// Ids pack the bytes and their count, so decoding needs no table.
#[derive(Debug, Clone)]
pub struct ByteTokenizer {
    width: usize,
    family: String,
}

impl ByteTokenizer {
    pub const MAX_WIDTH: usize = 3;

    pub fn new(width: usize) -> Result<Self> {
        if !(1..=Self::MAX_WIDTH).contains(&width) {
            return Err(Error::config(format!(
                "byte tokenizer width must be in 1..={}, got {width}",
                Self::MAX_WIDTH
            )));
        }
        Ok(Self { width, family: format!("bytes-{width}") })
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

impl Tokenizer for ByteTokenizer {
    fn family_id(&self) -> &str {
        &self.family
    }

    fn vocab_size(&self) -> usize {
        (Self::MAX_WIDTH + 1) << 24
    }

    fn encode(&self, text: &str) -> Result<TokenizationWithOffsets> {
        let bytes = text.as_bytes();
        let mut ids = Vec::with_capacity(bytes.len().div_ceil(self.width));
        let mut offsets = Vec::with_capacity(ids.capacity());
        for (i, piece) in bytes.chunks(self.width).enumerate() {
            let packed = piece.iter().fold(0u32, |acc, &b| (acc << 8) | u32::from(b));
            ids.push(((piece.len() as u32) << 24) | packed);
            let start = i * self.width;
            offsets.push((start, start + piece.len()));
        }
        TokenizationWithOffsets::new(ids, offsets, bytes.len())
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let mut bytes = Vec::with_capacity(ids.len() * self.width);
        for &id in ids {
            let len = (id >> 24) as usize;
            if len == 0 || len > Self::MAX_WIDTH || (id & 0x00ff_ffff) >> (8 * len) != 0 {
                return Err(Error::Tokenizer(format!("invalid byte token id {id:#x}")));
            }
            for k in (0..len).rev() {
                bytes.push((id >> (8 * k)) as u8);
            }
        }
        String::from_utf8(bytes).map_err(|e| Error::Tokenizer(format!("decoded bytes are not UTF-8: {e}")))
    }

    fn count_tokens(&self, text: &str) -> Result<usize> {
        Ok(text.len().div_ceil(self.width))
    }
}

/// A tokenizer loaded from a `tokenizer.json` definition.
pub struct HfTokenizer {
    inner: tokenizers::Tokenizer,
    family: String,
}

impl HfTokenizer {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let inner = tokenizers::Tokenizer::from_file(path)
            .map_err(|e| Error::Tokenizer(format!("loading {}: {e}", path.display())))?;
        let family = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "hf".to_owned());
        Ok(Self { inner, family })
    }

    pub fn from_bytes(json: &[u8], family: impl Into<String>) -> Result<Self> {
        let inner = tokenizers::Tokenizer::from_bytes(json).map_err(|e| Error::Tokenizer(e.to_string()))?;
        Ok(Self { inner, family: family.into() })
    }
}

impl Tokenizer for HfTokenizer {
    fn family_id(&self) -> &str {
        &self.family
    }

    fn vocab_size(&self) -> usize {
        self.inner.get_vocab_size(true)
    }

    fn encode(&self, text: &str) -> Result<TokenizationWithOffsets> {
        let enc = self.inner.encode(text, true).map_err(|e| Error::Tokenizer(e.to_string()))?;
        let special = enc.get_special_tokens_mask();
        // Special tokens report (0, 0) wherever they sit; pin them to an empty
        // span at the previous start so starts stay non-decreasing.
        let mut prev_start = 0usize;
        let mut offsets = Vec::with_capacity(enc.len());
        for (i, &(start, end)) in enc.get_offsets().iter().enumerate() {
            if special.get(i).copied().unwrap_or(0) == 1 || start == end {
                offsets.push((prev_start, prev_start));
                continue;
            }
            let start = start.max(prev_start).min(text.len());
            let end = end.min(text.len()).max(start);
            offsets.push((start, end));
            prev_start = start;
        }
        TokenizationWithOffsets::new(enc.get_ids().to_vec(), offsets, text.len())
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        self.inner.decode(ids, false).map_err(|e| Error::Tokenizer(e.to_string()))
    }
}

/// Resolves a tokenizer spec: `whitespace`, `bytes`, `bytes:N`, or a path to
/// a `tokenizer.json`.
pub fn load_tokenizer(spec: &str) -> Result<Arc<dyn Tokenizer>> {
    match spec {
        "whitespace" => Ok(Arc::new(WhitespaceTokenizer::new())),
        "bytes" => Ok(Arc::new(ByteTokenizer::new(ByteTokenizer::MAX_WIDTH)?)),
        _ => {
            if let Some(width) = spec.strip_prefix("bytes:") {
                let width = width
                    .parse()
                    .map_err(|_| Error::config(format!("bad byte tokenizer width in `{spec}`")))?;
                return Ok(Arc::new(ByteTokenizer::new(width)?));
            }
            Ok(Arc::new(HfTokenizer::from_file(spec)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_offsets_and_roundtrip() {
        let tok = WhitespaceTokenizer::new();
        let enc = tok.encode("a b c").unwrap();
        assert_eq!(enc.offsets(), &[(0, 1), (2, 3), (4, 5)]);
        assert_eq!(tok.count_tokens("a b c").unwrap(), 3);
        for text in ["a b c", "  lead and trail \n", "x", "", "   ", "héllo  wörld\tend"] {
            let enc = tok.encode(text).unwrap();
            let decoded = tok.decode(enc.token_ids()).unwrap();
            assert_eq!(decoded, text);
            assert_eq!(tok.encode(&decoded).unwrap().token_ids(), enc.token_ids());
        }
        assert_eq!(tok.count_tokens("").unwrap(), 0);
    }

    #[test]
    fn byte_tokenizer_roundtrip() {
        let tok = ByteTokenizer::new(3).unwrap();
        let text = "héllo wörld €";
        let enc = tok.encode(text).unwrap();
        assert_eq!(enc.len(), text.len().div_ceil(3));
        assert_eq!(tok.decode(enc.token_ids()).unwrap(), text);
        assert_eq!(tok.count_tokens(text).unwrap(), enc.len());
        assert!(ByteTokenizer::new(0).is_err());
        assert!(ByteTokenizer::new(4).is_err());
        assert!(tok.decode(&[0]).is_err());
    }

    #[test]
    fn invalid_utf8_is_input_error() {
        let tok = WhitespaceTokenizer::new();
        let err = encode_with_offsets(&tok, &[0x61, 0xff, 0x62]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn offsetless_tokenizer_is_capability_error() {
        struct NoOffsets;
        impl Tokenizer for NoOffsets {
            fn family_id(&self) -> &str {
                "none"
            }
            fn vocab_size(&self) -> usize {
                0
            }
            fn supports_offsets(&self) -> bool {
                false
            }
            fn encode(&self, _: &str) -> Result<TokenizationWithOffsets> {
                unreachable!()
            }
            fn decode(&self, _: &[TokenId]) -> Result<String> {
                unreachable!()
            }
        }
        assert!(matches!(encode_with_offsets(&NoOffsets, b"abc"), Err(Error::Capability(_))));
    }

    #[test]
    fn tokenization_invariants_enforced() {
        assert!(TokenizationWithOffsets::new(vec![1], vec![], 0).is_err());
        assert!(TokenizationWithOffsets::new(vec![1], vec![(0, 5)], 4).is_err());
        assert!(TokenizationWithOffsets::new(vec![1, 2], vec![(2, 3), (1, 2)], 4).is_err());
        let t = TokenizationWithOffsets::new(vec![0, 1, 2], vec![(0, 0), (0, 2), (3, 4)], 4).unwrap();
        assert!(t.is_special(0));
        assert_eq!(t.content_positions(), vec![1, 2]);
    }

    #[test]
    fn load_specs() {
        assert_eq!(load_tokenizer("whitespace").unwrap().family_id(), "whitespace");
        assert_eq!(load_tokenizer("bytes:2").unwrap().family_id(), "bytes-2");
        assert!(load_tokenizer("bytes:9").is_err());
        assert!(matches!(load_tokenizer("/nonexistent/tokenizer.json"), Err(Error::Tokenizer(_))));
    }
}
