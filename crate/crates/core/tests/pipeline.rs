use std::sync::Arc;

use xfam_core::attention::SyntheticProvider;
use xfam_core::bench::{sweep, ProviderSource};
use xfam_core::corpus::{code_corpus, needle_corpus, needle_saliency, text_corpus};
use xfam_core::pipeline::{compress, CompressionConfig, Compressor, KeepRateSpec};
use xfam_core::tokenizer::{load_tokenizer, Tokenizer, WhitespaceTokenizer};

#[test]
fn word_draft_byte_target_half_keep_is_within_slack() {
    let draft = WhitespaceTokenizer::new();
    let target = load_tokenizer("bytes:3").unwrap();
    let config = CompressionConfig::default().with_keep(KeepRateSpec::fraction(0.5));
    for (i, s) in text_corpus(20, 5, 1000..3000).iter().enumerate() {
        let out = compress(&s.prompt, &config, &SyntheticProvider::new(i as u64), &draft, target.as_ref()).unwrap();
        let want = 0.5 * out.stats.original_target_tokens as f64;
        let dev = out.stats.compressed_target_tokens as f64 / want - 1.0;
        assert!(dev.abs() <= 0.10, "sample {i}: deviation {dev}");
    }
}

#[test]
fn refinement_never_trades_overshoot_for_a_larger_undershoot() {
    // Short prompts where one chunk is a large share of the budget.
    let draft = WhitespaceTokenizer::new();
    let target = load_tokenizer("bytes:3").unwrap();
    let config = CompressionConfig::default().with_keep(KeepRateSpec::fraction(0.125));
    for (i, s) in needle_corpus(200, 125, 800..4000).iter().enumerate() {
        let provider = SyntheticProvider::new(i as u64).with_saliency(needle_saliency(s, &draft).unwrap());
        let out = compress(&s.prompt, &config, &provider, &draft, target.as_ref()).unwrap();
        assert_eq!(s.needle_retained(&out.text), Some(true), "sample {i}");
        if out.stats.refine_passes > 0 {
            assert!(out.stats.target_deviation > -0.5, "sample {i}: {:?}", out.stats);
        }
    }
}

#[test]
fn code_profile_uses_code_delimiter() {
    let tok = WhitespaceTokenizer::new();
    let sample = &code_corpus(1, 3, 150..160)[0];
    let config = CompressionConfig::code().with_keep(KeepRateSpec::fraction(0.3));
    let out = compress(&sample.prompt, &config, &SyntheticProvider::new(4), &tok, &tok).unwrap();
    assert!(out.stats.delimiter_count >= 1);
    assert!(!sample.prompt.contains("// omitted"));
    assert_eq!(out.text.matches("// omitted").count(), out.stats.delimiter_count);
    assert!(out.text.ends_with("Which function contains the deliberate error?\n"));
}

#[test]
fn target_length_mode_varies_rho_per_sample() {
    let tok = WhitespaceTokenizer::new();
    let configs = [CompressionConfig::default().with_keep(KeepRateSpec::target_length(300).with_block_align(None))];
    let samples = text_corpus(50, 8, 500..3000);
    let report = sweep(&samples, &configs, &ProviderSource::Synthetic { seed: 1 }, &tok, &tok);
    assert_eq!(report.records.len(), 50);
    let rhos: Vec<f64> = report.records.iter().map(|r| r.rho_requested).collect();
    assert!(rhos.iter().any(|&r| (r - rhos[0]).abs() > 1e-3));
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    assert!((report.aggregates[0].mean_rho_requested - mean).abs() < 1e-6);
    for r in &report.records {
        assert!((r.rho_requested - 300.0 / r.l_target as f64).abs() < 1e-12);
    }
}

#[test]
fn compressor_is_deterministic_across_threads() {
    let tok: Arc<dyn Tokenizer> = Arc::new(WhitespaceTokenizer::new());
    let compressor = Compressor::new(Arc::new(SyntheticProvider::new(6)), Arc::clone(&tok), tok);
    let config = CompressionConfig::default().with_keep(KeepRateSpec::fraction(0.3));
    let prompt = text_corpus(1, 2, 900..1000).remove(0).prompt;
    let reference = compressor.compress(&prompt, &config).unwrap();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..8).map(|_| scope.spawn(|| compressor.compress(&prompt, &config).unwrap())).collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), reference);
        }
    });
}
