//! Benchmark records and keep-rate sweeps.
//!
//! Every compressed sample yields one [`BenchmarkRecord`]. Aggregates are
//! plain means over the records of a group, so any reader of the CSV can
//! recompute them.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionProvider, SyntheticProvider};
use crate::corpus::{needle_saliency, Sample};
use crate::error::{Error, Result};
use crate::pipeline::{compress_timed, CompressedPrompt, CompressionConfig, KeepMode, StageTimings};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub sample_id: String,
    /// Label of the keep setting this row belongs to, e.g. `rho=0.3`.
    pub setting: String,
    pub l_target: usize,
    pub draft_tokens: usize,
    pub compressed_tokens: usize,
    pub rho_requested: f64,
    pub rho_achieved: f64,
    pub timings: StageTimings,
    pub needle_retained: Option<bool>,
    pub bypassed: bool,
}

impl BenchmarkRecord {
    pub fn new(sample: &Sample, setting: &str, out: &CompressedPrompt, timings: StageTimings) -> Self {
        Self {
            sample_id: sample.id.clone(),
            setting: setting.to_owned(),
            l_target: out.stats.original_target_tokens,
            draft_tokens: out.stats.draft_tokens,
            compressed_tokens: out.stats.compressed_target_tokens,
            rho_requested: out.requested_keep_rate,
            rho_achieved: out.achieved_keep_rate,
            timings,
            needle_retained: sample.needle_retained(&out.text),
            bypassed: out.stats.bypassed,
        }
    }
}

/// Means over the records of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub setting: String,
    pub samples: usize,
    pub mean_rho_requested: f64,
    pub mean_rho_achieved: f64,
    pub mean_l_target: f64,
    pub mean_compressed_tokens: f64,
    /// Fraction of needle samples whose needle survived.
    pub needle_retention: Option<f64>,
    pub mean_total_ms: f64,
}

pub fn aggregate(setting: &str, records: &[&BenchmarkRecord]) -> Aggregate {
    let n = records.len();
    let mean = |f: &dyn Fn(&BenchmarkRecord) -> f64| {
        if n == 0 {
            0.0
        } else {
            records.iter().map(|r| f(r)).sum::<f64>() / n as f64
        }
    };
    let needles: Vec<bool> = records.iter().filter_map(|r| r.needle_retained).collect();
    Aggregate {
        setting: setting.to_owned(),
        samples: n,
        mean_rho_requested: mean(&|r| r.rho_requested),
        mean_rho_achieved: mean(&|r| r.rho_achieved),
        mean_l_target: mean(&|r| r.l_target as f64),
        mean_compressed_tokens: mean(&|r| r.compressed_tokens as f64),
        needle_retention: (!needles.is_empty())
            .then(|| needles.iter().filter(|&&k| k).count() as f64 / needles.len() as f64),
        mean_total_ms: mean(&|r| r.timings.total_ms()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub setting: String,
    pub error_class: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<BenchmarkRecord>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<SampleFailure>,
    pub skipped_lines: usize,
}

/// Where attention comes from during a benchmark run.
#[derive(Clone)]
pub enum ProviderSource {
    /// A fresh seeded synthetic provider per sample; needle tokens are salient.
    Synthetic { seed: u64 },
    Shared(Arc<dyn AttentionProvider>),
}

impl ProviderSource {
    fn for_sample(&self, sample: &Sample, draft: &dyn Tokenizer) -> Result<Arc<dyn AttentionProvider>> {
        match self {
            Self::Synthetic { seed } => {
                let saliency = needle_saliency(sample, draft)?;
                Ok(Arc::new(SyntheticProvider::new(*seed).with_saliency(saliency)))
            }
            Self::Shared(p) => Ok(Arc::clone(p)),
        }
    }
}

/// Human-readable label for a keep setting.
pub fn setting_label(config: &CompressionConfig) -> String {
    match config.keep.mode {
        KeepMode::Fraction(rho) => format!("rho={rho}"),
        KeepMode::TargetLength(_) => {
            format!("target={}", config.keep.aligned_target_length().expect("target-length mode"))
        }
    }
}

pub fn run_sample(
    sample: &Sample,
    config: &CompressionConfig,
    source: &ProviderSource,
    draft: &dyn Tokenizer,
    target: &dyn Tokenizer,
) -> Result<(CompressedPrompt, BenchmarkRecord)> {
    let provider = source.for_sample(sample, draft)?;
    let (out, timings) = compress_timed(&sample.prompt, config, provider.as_ref(), draft, target)?;
    let record = BenchmarkRecord::new(sample, &setting_label(config), &out, timings);
    Ok((out, record))
}

/// Runs every sample under every config; failures are recorded, not fatal.
pub fn sweep(
    samples: &[Sample],
    configs: &[CompressionConfig],
    source: &ProviderSource,
    draft: &dyn Tokenizer,
    target: &dyn Tokenizer,
) -> Report {
    let mut report = Report::default();
    let mut order: Vec<String> = Vec::new();
    for config in configs {
        let label = setting_label(config);
        if !order.contains(&label) {
            order.push(label.clone());
        }
        for sample in samples {
            match run_sample(sample, config, source, draft, target) {
                Ok((_, record)) => report.records.push(record),
                Err(e) => report.failures.push(failure(sample, &label, &e)),
            }
        }
    }
    report.aggregates = aggregates_by_setting(&report.records, &order);
    report
}

fn failure(sample: &Sample, setting: &str, e: &Error) -> SampleFailure {
    SampleFailure {
        sample_id: sample.id.clone(),
        setting: setting.to_owned(),
        error_class: e.class().to_string(),
        message: e.to_string(),
    }
}

/// One aggregate per setting, in `order`.
pub fn aggregates_by_setting(records: &[BenchmarkRecord], order: &[String]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<&str, Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.setting.as_str()).or_default().push(r);
    }
    order
        .iter()
        .filter_map(|s| groups.get(s.as_str()).map(|rs| aggregate(s, rs)))
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    kind: &'static str,
    setting: &'a str,
    sample_id: &'a str,
    samples: usize,
    l_target: f64,
    draft_tokens: Option<usize>,
    compressed_tokens: f64,
    rho_requested: f64,
    rho_achieved: f64,
    needle_retained: Option<f64>,
    bypassed: Option<bool>,
    total_ms: f64,
}

impl Report {
    /// Sample rows followed by one aggregate row per setting.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::input(format!("writing csv: {e}"));
        for r in &self.records {
            w.serialize(CsvRow {
                kind: "sample",
                setting: &r.setting,
                sample_id: &r.sample_id,
                samples: 1,
                l_target: r.l_target as f64,
                draft_tokens: Some(r.draft_tokens),
                compressed_tokens: r.compressed_tokens as f64,
                rho_requested: r.rho_requested,
                rho_achieved: r.rho_achieved,
                needle_retained: r.needle_retained.map(|k| if k { 1.0 } else { 0.0 }),
                bypassed: Some(r.bypassed),
                total_ms: r.timings.total_ms(),
            })
            .map_err(csv_err)?;
        }
        for a in &self.aggregates {
            w.serialize(CsvRow {
                kind: "aggregate",
                setting: &a.setting,
                sample_id: "",
                samples: a.samples,
                l_target: a.mean_l_target,
                draft_tokens: None,
                compressed_tokens: a.mean_compressed_tokens,
                rho_requested: a.mean_rho_requested,
                rho_achieved: a.mean_rho_achieved,
                needle_retained: a.needle_retention,
                bypassed: None,
                total_ms: a.mean_total_ms,
            })
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::input(format!("writing csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Short aligned table of the aggregates.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<16} {:>7} {:>10} {:>10} {:>12} {:>12} {:>9}\n",
            "setting", "samples", "rho_req", "rho_ach", "L_target", "|u|", "needle"
        );
        for a in &self.aggregates {
            let needle = a.needle_retention.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"));
            out.push_str(&format!(
                "{:<16} {:>7} {:>10.4} {:>10.4} {:>12.1} {:>12.1} {:>9}\n",
                a.setting, a.samples, a.mean_rho_requested, a.mean_rho_achieved, a.mean_l_target,
                a.mean_compressed_tokens, needle
            ));
        }
        if self.skipped_lines > 0 || !self.failures.is_empty() {
            out.push_str(&format!(
                "skipped lines: {}, failed samples: {}\n",
                self.skipped_lines,
                self.failures.len()
            ));
        }
        out
    }
}
