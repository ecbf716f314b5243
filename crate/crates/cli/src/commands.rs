use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use xfam_core::bench::{aggregates_by_setting, run_sample, setting_label, sweep, ProviderSource, Report};
use xfam_core::corpus::{code_corpus, needle_corpus, parse_jsonl, text_corpus, to_jsonl, ParsedCorpus, Sample};
use xfam_core::pipeline::{CompressedPrompt, CompressionConfig, CompressionStats, KeepMode, StageTimings};
use xfam_core::tokenizer::{load_tokenizer, Tokenizer};

use crate::args::{CorpusKind, OutFormat, Settings};
use crate::{build_provider, load_profiles, resolve_config, CliError, Result};

/// Everything a command needs, resolved once from the settings.
pub struct Context {
    pub config: CompressionConfig,
    pub source: ProviderSource,
    pub draft: Arc<dyn Tokenizer>,
    pub target: Arc<dyn Tokenizer>,
}

impl Context {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let profiles = load_profiles(settings)?;
        let config = resolve_config(settings, &profiles)?;
        let model = settings.draft_model.as_deref();
        Ok(Self {
            source: build_provider(&settings.provider, settings.seed, model)?,
            draft: load_tokenizer(&settings.draft_tokenizer)?,
            target: load_tokenizer(&settings.target_tokenizer)?,
            config,
        })
    }

    pub fn compress(&self, sample: &Sample, config: &CompressionConfig) -> Result<(CompressedPrompt, Report)> {
        let (out, record) = run_sample(sample, config, &self.source, self.draft.as_ref(), self.target.as_ref())?;
        let aggregates = aggregates_by_setting(std::slice::from_ref(&record), std::slice::from_ref(&record.setting));
        Ok((out, Report { records: vec![record], aggregates, ..Report::default() }))
    }
}

/// JSON shape of one compression result.
#[derive(Debug, Serialize)]
pub struct CompressOutput<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<&'a str>,
    pub text: &'a str,
    pub token_count: usize,
    pub keep_rate: f64,
    pub requested_keep_rate: f64,
    pub requested_target_tokens: f64,
    /// Block-aligned target length in target-length mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aligned_target_length: Option<usize>,
    /// Kept draft-token spans as half-open `[start, end]` pairs.
    pub spans: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub needle_retained: Option<bool>,
    pub stats: &'a CompressionStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<&'a StageTimings>,
}

impl<'a> CompressOutput<'a> {
    pub fn new(out: &'a CompressedPrompt, config: &CompressionConfig) -> Self {
        Self {
            id: None,
            text: &out.text,
            token_count: out.stats.compressed_target_tokens,
            keep_rate: out.achieved_keep_rate,
            requested_keep_rate: out.requested_keep_rate,
            requested_target_tokens: out.stats.requested_target_tokens,
            aligned_target_length: config.keep.aligned_target_length(),
            spans: out.draft_spans.spans().iter().map(|r| [r.start, r.end]).collect(),
            needle_retained: None,
            stats: &out.stats,
            timings: None,
        }
    }
}

fn read_input(input: Option<&Path>) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    match input {
        Some(path) if path != Path::new("-") => {
            bytes = std::fs::read(path).map_err(CliError::io_err(format!("reading {}", path.display())))?;
        }
        _ => {
            std::io::stdin().read_to_end(&mut bytes).map_err(CliError::io_err("reading stdin"))?;
        }
    }
    Ok(bytes)
}

fn read_corpus(input: Option<&Path>) -> Result<ParsedCorpus> {
    let bytes = read_input(input)?;
    let parsed = parse_jsonl(BufReader::new(bytes.as_slice()))?;
    if !parsed.skipped_lines.is_empty() {
        eprintln!("warning: skipped {} malformed corpus line(s): {:?}", parsed.skipped_lines.len(), parsed.skipped_lines);
    }
    Ok(parsed)
}

fn emit(output: Option<&Path>, content: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, content).map_err(CliError::io_err(format!("writing {}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(CliError::io_err("writing stdout"))
        }
    }
}

fn render_report(report: &Report, format: OutFormat) -> Result<String> {
    Ok(match format {
        OutFormat::Json => report.to_json() + "\n",
        OutFormat::Csv => report.to_csv()?,
        OutFormat::Text => report.to_text(),
    })
}

pub fn compress(settings: &Settings, input: Option<PathBuf>, jsonl: bool, output: Option<PathBuf>) -> Result<()> {
    let ctx = Context::from_settings(settings)?;
    if jsonl {
        return compress_corpus(&ctx, settings.out, input.as_deref(), output.as_deref());
    }
    let bytes = read_input(input.as_deref())?;
    let prompt = String::from_utf8(bytes)
        .map_err(|e| xfam_core::Error::InvalidInput(format!("input is not valid UTF-8: {e}")))?;
    let sample = Sample { id: "input".into(), prompt, needle: None, question: None };
    let (out, report) = ctx.compress(&sample, &ctx.config)?;
    let rendered = match settings.out {
        OutFormat::Json => {
            let mut view = CompressOutput::new(&out, &ctx.config);
            view.timings = Some(&report.records[0].timings);
            serde_json::to_string_pretty(&view).expect("output serializes") + "\n"
        }
        OutFormat::Text => {
            eprintln!(
                "kept {} of {} target tokens (keep rate {:.4}, requested {:.4}), {} delimiter(s)",
                out.stats.compressed_target_tokens,
                out.stats.original_target_tokens,
                out.achieved_keep_rate,
                out.requested_keep_rate,
                out.stats.delimiter_count
            );
            out.text.clone()
        }
        OutFormat::Csv => report.to_csv()?,
    };
    emit(output.as_deref(), &rendered)
}

fn compress_corpus(ctx: &Context, format: OutFormat, input: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let corpus = read_corpus(input)?;
    let mut report = Report { skipped_lines: corpus.skipped_lines.len(), ..Report::default() };
    let mut lines = String::new();
    for sample in &corpus.samples {
        match ctx.compress(sample, &ctx.config) {
            Ok((out, mut one)) => {
                if format == OutFormat::Json {
                    let mut view = CompressOutput::new(&out, &ctx.config);
                    view.id = Some(&sample.id);
                    view.needle_retained = sample.needle_retained(&out.text);
                    lines.push_str(&serde_json::to_string(&view).expect("output serializes"));
                    lines.push('\n');
                }
                report.records.append(&mut one.records);
            }
            Err(e) => {
                eprintln!("error[{}]: sample {}: {e}", e.class(), sample.id);
                if format == OutFormat::Json {
                    let line = serde_json::json!({"id": sample.id, "error": {"class": e.class(), "message": e.to_string()}});
                    lines.push_str(&line.to_string());
                    lines.push('\n');
                }
            }
        }
    }
    if format == OutFormat::Json {
        return emit(output, &lines);
    }
    report.aggregates = aggregates_by_setting(&report.records, &[setting_label(&ctx.config)]);
    emit(output, &render_report(&report, format)?)
}

pub fn sweep_cmd(
    settings: &Settings,
    corpus: &Path,
    keep_rates: &[f64],
    csv_out: Option<&Path>,
    json_out: Option<&Path>,
) -> Result<()> {
    let ctx = Context::from_settings(settings)?;
    let parsed = read_corpus(Some(corpus))?;
    let configs: Vec<CompressionConfig> = if keep_rates.is_empty() {
        vec![ctx.config.clone()]
    } else {
        keep_rates
            .iter()
            .map(|&rho| {
                let mut cfg = ctx.config.clone();
                cfg.keep.mode = KeepMode::Fraction(rho);
                cfg.validate().map(|_| cfg)
            })
            .collect::<xfam_core::Result<_>>()?
    };
    let mut report = sweep(&parsed.samples, &configs, &ctx.source, ctx.draft.as_ref(), ctx.target.as_ref());
    report.skipped_lines = parsed.skipped_lines.len();
    for f in &report.failures {
        eprintln!("error[{}]: sample {} at {}: {}", f.error_class, f.sample_id, f.setting, f.message);
    }
    if let Some(path) = csv_out {
        emit(Some(path), &report.to_csv()?)?;
    }
    if let Some(path) = json_out {
        emit(Some(path), &(report.to_json() + "\n"))?;
    }
    emit(None, &render_report(&report, settings.out)?)
}

pub fn corpus_cmd(kind: CorpusKind, count: usize, seed: u64, min_len: usize, max_len: usize) -> Result<()> {
    if min_len == 0 || min_len >= max_len {
        return Err(CliError::Usage(format!("need 0 < --min-len < --max-len, got {min_len} and {max_len}")));
    }
    let samples = match kind {
        CorpusKind::Needle => needle_corpus(count, seed, min_len..max_len),
        CorpusKind::Text => text_corpus(count, seed, min_len..max_len),
        CorpusKind::Code => code_corpus(count, seed, min_len..max_len),
    };
    emit(None, &to_jsonl(&samples))
}
