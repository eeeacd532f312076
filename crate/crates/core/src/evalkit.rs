//! Answer scoring (BLEU, Jaccard, encoder cosine) and the RAG-vs-baseline
//! comparison report.
//!
//! BLEU here is sentence level: modified n-gram precisions for
//! n = 1..min(4, candidate length) with uniform weights, add-one smoothing
//! on orders >= 2, and the brevity penalty `exp(min(0, 1 - ref/cand))`.
//! Candidate and reference both run through the corpus cleaning rules
//! before tokenization so punctuation artifacts cannot move scores.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::clean_text;
use crate::encode::{cosine_sim, encode_text, Encoder};
use crate::generate::{Answer, Mode};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("input has no tokens after cleaning")]
    EmptyInput,
    #[error("answers do not align with cases: {0}")]
    MisalignedAnswers(String),
    #[error(transparent)]
    Encode(#[from] crate::encode::EncodeError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    BadJson(#[from] serde_json::Error),
}

/// Shared metric tokenization: corpus cleaning rules, then whitespace split.
pub fn metric_tokens(text: &str) -> Vec<String> {
    clean_text(text).split_whitespace().map(str::to_owned).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU of `candidate` against `reference`, in [0, 1].
pub fn bleu(candidate: &str, reference: &str) -> Result<f64, EvalError> {
    let cand = metric_tokens(candidate);
    let reference = metric_tokens(reference);
    if cand.is_empty() || reference.is_empty() {
        return Err(EvalError::EmptyInput);
    }

    let max_n = cand.len().min(4);
    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&reference, n);
        let clipped: u64 = cand_counts
            .iter()
            .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let total: u64 = cand_counts.values().sum();
        let precision = if n == 1 {
            if clipped == 0 {
                return Ok(0.0);
            }
            clipped as f64 / total as f64
        } else {
            (clipped + 1) as f64 / (total + 1) as f64
        };
        log_precision_sum += precision.ln() / max_n as f64;
    }
    let brevity = (1.0 - reference.len() as f64 / cand.len() as f64).min(0.0).exp();
    Ok(brevity * log_precision_sum.exp())
}

/// Token-set Jaccard similarity: |A ∩ B| / |A ∪ B|.
pub fn jaccard(candidate: &str, reference: &str) -> Result<f64, EvalError> {
    let a: HashSet<String> = metric_tokens(candidate).into_iter().collect();
    let b: HashSet<String> = metric_tokens(reference).into_iter().collect();
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let intersection = a.intersection(&b).count();
    let union = a.union(&b).count();
    Ok(intersection as f64 / union as f64)
}

/// Cosine similarity of encoder outputs for the two texts.
pub fn encoding_similarity(
    candidate: &str,
    reference: &str,
    encoder: &Encoder,
) -> Result<f64, EvalError> {
    let a = encode_text(candidate, encoder)?;
    let b = encode_text(reference, encoder)?;
    Ok(cosine_sim(&a, &b)?)
}

/// One answer's scores against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub bleu: f64,
    pub jaccard: f64,
    pub cosine: f64,
}

impl MetricTriple {
    pub fn mean(&self) -> f64 {
        (self.bleu + self.jaccard + self.cosine) / 3.0
    }
}

pub fn score_case(candidate: &str, truth: &str, encoder: &Encoder) -> Result<MetricTriple, EvalError> {
    Ok(MetricTriple {
        bleu: bleu(candidate, truth)?,
        jaccard: jaccard(candidate, truth)?,
        cosine: encoding_similarity(candidate, truth, encoder)?,
    })
}

/// A query with its manually authored correct cause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub qid: String,
    pub query: String,
    pub truth: String,
}

pub fn load_cases(path: &Path) -> Result<Vec<EvalCase>, EvalError> {
    let data = std::fs::read_to_string(path)?;
    let mut cases = Vec::new();
    for line in data.lines() {
        if line.trim().is_empty() {
            continue;
        }
        cases.push(serde_json::from_str(line)?);
    }
    Ok(cases)
}

/// Distribution summary for one metric in one mode. Quartiles use linear
/// interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAggregate {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ModeAggregate {
    fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
        Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub baseline: ModeAggregate,
    pub rag: ModeAggregate,
    /// `(rag mean − baseline mean) / baseline mean`, in percent.
    pub relative_improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScores {
    pub qid: String,
    pub rag: MetricTriple,
    pub baseline: MetricTriple,
}

/// The full comparison: per-case scores, per-metric aggregates, and the
/// average of the three per-metric relative improvements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cases: usize,
    pub bleu: MetricComparison,
    pub jaccard: MetricComparison,
    pub cosine: MetricComparison,
    pub average_improvement_pct: f64,
    pub per_case: Vec<CaseScores>,
}

/// Aggregate pre-computed per-case scores into a [`Report`].
pub fn aggregate(per_case: Vec<CaseScores>) -> Report {
    assert!(!per_case.is_empty(), "cannot aggregate zero cases");
    let compare = |pick: fn(&MetricTriple) -> f64| {
        let rag_values: Vec<f64> = per_case.iter().map(|c| pick(&c.rag)).collect();
        let base_values: Vec<f64> = per_case.iter().map(|c| pick(&c.baseline)).collect();
        let rag = ModeAggregate::from_values(&rag_values);
        let baseline = ModeAggregate::from_values(&base_values);
        MetricComparison {
            baseline,
            rag,
            relative_improvement_pct: (rag.mean - baseline.mean) / baseline.mean * 100.0,
        }
    };
    let bleu = compare(|m| m.bleu);
    let jaccard = compare(|m| m.jaccard);
    let cosine = compare(|m| m.cosine);
    let average_improvement_pct = (bleu.relative_improvement_pct
        + jaccard.relative_improvement_pct
        + cosine.relative_improvement_pct)
        / 3.0;
    Report {
        cases: per_case.len(),
        bleu,
        jaccard,
        cosine,
        average_improvement_pct,
        per_case,
    }
}

/// Score both answer sets against the ground truths and aggregate. Answers
/// are matched to cases by qid; any gap is an error.
pub fn compare_runs(
    cases: &[EvalCase],
    rag_answers: &[Answer],
    baseline_answers: &[Answer],
    encoder: &Encoder,
) -> Result<Report, EvalError> {
    let by_qid = |answers: &[Answer], mode: Mode| -> HashMap<String, String> {
        answers
            .iter()
            .filter(|a| a.mode == mode)
            .map(|a| (a.qid.clone(), a.text.clone()))
            .collect()
    };
    let rag = by_qid(rag_answers, Mode::Rag);
    let baseline = by_qid(baseline_answers, Mode::Baseline);

    let mut per_case = Vec::with_capacity(cases.len());
    for case in cases {
        let rag_text = rag
            .get(&case.qid)
            .ok_or_else(|| EvalError::MisalignedAnswers(format!("no rag answer for {}", case.qid)))?;
        let base_text = baseline.get(&case.qid).ok_or_else(|| {
            EvalError::MisalignedAnswers(format!("no baseline answer for {}", case.qid))
        })?;
        per_case.push(CaseScores {
            qid: case.qid.clone(),
            rag: score_case(rag_text, &case.truth, encoder)?,
            baseline: score_case(base_text, &case.truth, encoder)?,
        });
    }
    if per_case.is_empty() {
        return Err(EvalError::MisalignedAnswers("no cases".into()));
    }
    Ok(aggregate(per_case))
}

/// Keep the answer whose metric mean against the truth is greater; ties go
/// to the context-grounded answer.
pub fn select_best<'a>(
    rag: &'a Answer,
    baseline: &'a Answer,
    truth: &str,
    encoder: &Encoder,
) -> Result<&'a Answer, EvalError> {
    let rag_mean = score_case(&rag.text, truth, encoder)?.mean();
    let base_mean = score_case(&baseline.text, truth, encoder)?.mean();
    Ok(if base_mean > rag_mean { baseline } else { rag })
}

/// `scores.csv`: one row per (case, mode, metric).
pub fn write_scores_csv(report: &Report, path: &Path) -> Result<(), EvalError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "qid,mode,metric,value")?;
    for case in &report.per_case {
        for (mode, triple) in [("rag", &case.rag), ("baseline", &case.baseline)] {
            for (metric, value) in [
                ("bleu", triple.bleu),
                ("jaccard", triple.jaccard),
                ("cosine", triple.cosine),
            ] {
                writeln!(out, "{},{},{},{}", case.qid, mode, metric, value)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Rebuild per-case scores from a `scores.csv` written by
/// [`write_scores_csv`] (or synthesized externally).
pub fn read_scores_csv(path: &Path) -> Result<Vec<CaseScores>, EvalError> {
    let data = std::fs::read_to_string(path)?;
    let mut acc: HashMap<String, (MetricTriple, MetricTriple)> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(EvalError::MisalignedAnswers(format!(
                "scores row {} has {} fields",
                i + 1,
                fields.len()
            )));
        }
        let (qid, mode, metric, value) = (fields[0], fields[1], fields[2], fields[3]);
        let value: f64 = value
            .parse()
            .map_err(|_| EvalError::MisalignedAnswers(format!("bad value at row {}", i + 1)))?;
        if !acc.contains_key(qid) {
            order.push(qid.to_owned());
        }
        let zero = MetricTriple { bleu: 0.0, jaccard: 0.0, cosine: 0.0 };
        let entry = acc.entry(qid.to_owned()).or_insert((zero, zero));
        let triple = match mode {
            "rag" => &mut entry.0,
            "baseline" => &mut entry.1,
            other => {
                return Err(EvalError::MisalignedAnswers(format!("unknown mode {other:?}")));
            }
        };
        match metric {
            "bleu" => triple.bleu = value,
            "jaccard" => triple.jaccard = value,
            "cosine" => triple.cosine = value,
            other => {
                return Err(EvalError::MisalignedAnswers(format!("unknown metric {other:?}")));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let (rag, baseline) = acc[&qid];
            CaseScores { qid, rag, baseline }
        })
        .collect())
}
