//! Mapping draft-token spans back to text and stitching the kept text together.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::selection::SelectedSpans;
use crate::tokenizer::TokenizationWithOffsets;

/// Byte range for each token span, coalesced and snapped to char boundaries.
///
/// A span `[a, b)` covers bytes from the start of its first content token to
/// the furthest end of its content tokens. A span that reaches the first
/// content token also claims any leading bytes of the text, and one that
/// reaches the last content token claims the trailing bytes, so keeping every
/// token reproduces the text exactly. Spans made only of special tokens map
/// to nothing.
pub fn map_spans_to_byte_ranges(
    tok: &TokenizationWithOffsets,
    text: &str,
    spans: &SelectedSpans,
) -> Result<Vec<Range<usize>>> {
    if text.len() != tok.text_len() {
        return Err(Error::input(format!(
            "tokenization is for {} bytes, text has {}",
            tok.text_len(),
            text.len()
        )));
    }
    let offsets = tok.offsets();
    let first_content = (0..tok.len()).find(|&i| !tok.is_special(i));
    let last_content = (0..tok.len()).rev().find(|&i| !tok.is_special(i));

    let mut ranges: Vec<Range<usize>> = Vec::with_capacity(spans.len());
    for span in spans.spans() {
        if span.end > tok.len() {
            return Err(Error::input(format!("span {span:?} beyond {} draft tokens", tok.len())));
        }
        let content: Vec<usize> = span.clone().filter(|&i| !tok.is_special(i)).collect();
        let (Some(&first), Some(&last)) = (content.first(), content.last()) else { continue };

        let mut start = offsets[first].0;
        let mut end = content.iter().map(|&i| offsets[i].1).max().unwrap_or(offsets[last].1);
        if Some(first) == first_content {
            start = 0;
        }
        if Some(last) == last_content {
            end = text.len();
        }
        let range = floor_char_boundary(text, start)..ceil_char_boundary(text, end);

        match ranges.last_mut() {
            Some(prev) if range.start <= prev.end => prev.end = prev.end.max(range.end),
            _ => ranges.push(range),
        }
    }
    Ok(ranges)
}

fn floor_char_boundary(text: &str, mut idx: usize) -> usize {
    while !text.is_char_boundary(idx) {
        idx -= 1;
    }
    idx
}

fn ceil_char_boundary(text: &str, mut idx: usize) -> usize {
    while !text.is_char_boundary(idx) {
        idx += 1;
    }
    idx
}

/// Compressed prompt text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledText {
    pub text: String,
    pub segment_count: usize,
    pub delimiter_count: usize,
}

/// Concatenates the byte ranges of `text`, placing `delimiter` at every gap.
///
/// Byte-adjacent ranges form one segment and get no delimiter between them.
pub fn assemble(text: &str, ranges: &[Range<usize>], delimiter: &str) -> Result<AssembledText> {
    let mut segments: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for range in ranges {
        if range.start > range.end || range.end > text.len() {
            return Err(Error::input(format!("byte range {range:?} outside text of {} bytes", text.len())));
        }
        if !text.is_char_boundary(range.start) || !text.is_char_boundary(range.end) {
            return Err(Error::input(format!("byte range {range:?} splits a UTF-8 character")));
        }
        if range.is_empty() {
            continue;
        }
        match segments.last_mut() {
            Some(prev) if range.start < prev.end => {
                return Err(Error::input(format!(
                    "byte ranges {prev:?} and {range:?} overlap or are out of order"
                )));
            }
            Some(prev) if range.start == prev.end => prev.end = range.end,
            _ => segments.push(range.clone()),
        }
    }

    let kept: usize = segments.iter().map(|r| r.len()).sum();
    let delimiter_count = segments.len().saturating_sub(1);
    let mut out = String::with_capacity(kept + delimiter_count * delimiter.len());
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            out.push_str(delimiter);
        }
        out.push_str(&text[seg.clone()]);
    }
    Ok(AssembledText { text: out, segment_count: segments.len(), delimiter_count })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(text: &str) -> TokenizationWithOffsets {
        let mut offsets = Vec::new();
        let mut pos = 0;
        for w in text.split(' ') {
            offsets.push((pos, pos + w.len()));
            pos += w.len() + 1;
        }
        let ids = (0..offsets.len() as u32).collect();
        TokenizationWithOffsets::new(ids, offsets, text.len()).unwrap()
    }

    #[test]
    fn contiguous_prefix() {
        let text = "ab cd ef";
        let spans = SelectedSpans::new(vec![0..2]).unwrap();
        assert_eq!(map_spans_to_byte_ranges(&words(text), text, &spans).unwrap(), vec![0..5]);
    }

    #[test]
    fn disjoint_spans() {
        let text = "ab cd ef";
        let spans = SelectedSpans::new(vec![0..1, 2..3]).unwrap();
        assert_eq!(map_spans_to_byte_ranges(&words(text), text, &spans).unwrap(), vec![0..2, 6..8]);
    }

    #[test]
    fn span_beyond_sequence_rejected() {
        let text = "ab cd ef";
        let spans = SelectedSpans::new(vec![2..4]).unwrap();
        assert!(matches!(
            map_spans_to_byte_ranges(&words(text), text, &spans),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn edges_claim_surrounding_whitespace() {
        let text = "  ab cd  ";
        let tok = TokenizationWithOffsets::new(vec![1, 2], vec![(2, 4), (5, 7)], text.len()).unwrap();
        let spans = SelectedSpans::new(vec![0..2]).unwrap();
        assert_eq!(map_spans_to_byte_ranges(&tok, text, &spans).unwrap(), vec![0..9]);
    }

    #[test]
    fn overlapping_token_offsets_coalesce() {
        let text = "abcdef";
        let tok =
            TokenizationWithOffsets::new(vec![1, 2, 3, 4], vec![(0, 3), (1, 4), (2, 5), (5, 6)], 6).unwrap();
        let spans = SelectedSpans::new(vec![0..1, 2..3]).unwrap();
        assert_eq!(map_spans_to_byte_ranges(&tok, text, &spans).unwrap(), vec![0..5]);
        let spans = SelectedSpans::new(vec![0..1, 3..4]).unwrap();
        assert_eq!(map_spans_to_byte_ranges(&tok, text, &spans).unwrap(), vec![0..3, 5..6]);
    }

    #[test]
    fn snaps_to_char_boundaries() {
        let text = "aé€b";
        // byte tokens of width 2 split both multibyte characters
        let tok = TokenizationWithOffsets::new(vec![1, 2, 3, 4], vec![(0, 2), (2, 4), (4, 6), (6, 7)], 7)
            .unwrap();
        let spans = SelectedSpans::new(vec![1..2]).unwrap();
        let ranges = map_spans_to_byte_ranges(&tok, text, &spans).unwrap();
        assert_eq!(ranges, vec![1..6]);
        assert_eq!(&text[ranges[0].clone()], "é€");
    }

    #[test]
    fn special_only_span_maps_to_nothing() {
        let text = "ab cd";
        let tok = TokenizationWithOffsets::new(vec![0, 1, 2], vec![(0, 0), (0, 2), (3, 5)], 5).unwrap();
        let spans = SelectedSpans::new(vec![0..1]).unwrap();
        assert!(map_spans_to_byte_ranges(&tok, text, &spans).unwrap().is_empty());
    }

    #[test]
    fn assemble_full_keep_is_identity() {
        let text = "whole text here";
        let out = assemble(text, &[0..text.len()], "[...]").unwrap();
        assert_eq!(out.text, text);
        assert_eq!(out.delimiter_count, 0);
        assert_eq!(out.segment_count, 1);
    }

    #[test]
    fn assemble_with_gap() {
        let out = assemble("AAAA BBBB CCCC", &[0..4, 10..14], "[...]").unwrap();
        assert_eq!(out.text, "AAAA[...]CCCC");
        assert_eq!(out.delimiter_count, 1);
    }

    #[test]
    fn assemble_adjacent_ranges_need_no_delimiter() {
        let out = assemble("AAAABBBB", &[0..4, 4..8], "[...]").unwrap();
        assert_eq!(out.text, "AAAABBBB");
        assert_eq!(out.segment_count, 1);
        assert_eq!(out.delimiter_count, 0);
    }

    #[test]
    fn assemble_code_with_omitted_markers() {
        let code = "fn a() {}\nfn b() {}\nfn c() {}\nfn d() {}\nfn e() {}\n";
        let out = assemble(code, &[0..10, 20..30, 40..50], "// omitted").unwrap();
        assert_eq!(out.text.matches("// omitted").count(), 2);
        assert_eq!(out.text, "fn a() {}\n// omittedfn c() {}\n// omittedfn e() {}\n");
    }

    #[test]
    fn assemble_rejects_bad_ranges() {
        assert!(assemble("abcdef", &[2..4, 0..1], "|").is_err());
        assert!(assemble("abcdef", &[0..3, 2..5], "|").is_err());
        assert!(assemble("abcdef", &[0..9], "|").is_err());
        assert!(assemble("é", &[0..1], "|").is_err());
    }
}
