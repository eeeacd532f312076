//! Corpus ingestion: raw CSV rows in, cleaned timestamped tweet records out.
//!
//! The pipeline order is fixed: expand contractions first, then apply the
//! cleaning rules ([`clean_text`]), then normalize the timestamp. Malformed
//! rows are skipped and counted rather than aborting the run.

mod clean;
mod contractions;
mod time;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::clean_text;
pub use contractions::{expand_contractions, ContractionDictionary};
pub use time::normalize_timestamp;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),
    #[error("malformed row at line {0}")]
    MalformedRow(u64),
    #[error("unparseable date {0:?}")]
    UnparseableDate(String),
    #[error("contraction dictionary entry has empty key")]
    EmptyDictionaryKey,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dictionary file: {0}")]
    BadDictionary(#[from] serde_json::Error),
}

/// One raw CSV data row. Only `text` and `date` are ever consumed; the
/// remaining columns ride along untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub text: String,
    pub date: String,
    pub extra: BTreeMap<String, String>,
}

/// A cleaned, timestamped corpus record. `id` is the 0-based ingestion
/// order; `ts` is UTC epoch seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: u64,
    pub text: String,
    pub ts: i64,
}

/// Streaming CSV reader producing one [`RawRecord`] per data row.
///
/// Rows with the wrong field count are skipped; the running count is
/// available from [`CorpusStream::skipped_rows`] once iteration finishes.
pub struct CorpusStream {
    reader: csv::Reader<File>,
    header_len: usize,
    text_idx: usize,
    date_idx: usize,
    headers: Vec<String>,
    skipped: u64,
}

/// Open `path` and locate the named text/date columns in the header row.
pub fn load_corpus(
    path: &Path,
    text_column: &str,
    date_column: &str,
) -> Result<CorpusStream, CorpusError> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_to_corpus_error(e, 1))?
        .iter()
        .map(str::to_owned)
        .collect();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_owned()))
    };
    let text_idx = position(text_column)?;
    let date_idx = position(date_column)?;
    Ok(CorpusStream {
        reader,
        header_len: headers.len(),
        text_idx,
        date_idx,
        headers,
        skipped: 0,
    })
}

fn csv_to_corpus_error(err: csv::Error, fallback_line: u64) -> CorpusError {
    match err.kind() {
        csv::ErrorKind::Io(_) => {
            CorpusError::Io(std::io::Error::other(err.to_string()))
        }
        _ => CorpusError::MalformedRow(err.position().map_or(fallback_line, |p| p.line())),
    }
}

impl CorpusStream {
    /// Rows dropped so far for having the wrong field count or broken quoting.
    pub fn skipped_rows(&self) -> u64 {
        self.skipped
    }
}

impl Iterator for CorpusStream {
    type Item = Result<RawRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let mut record = csv::StringRecord::new();
            match self.reader.read_record(&mut record) {
                Ok(false) => return None,
                Ok(true) => {
                    if record.len() != self.header_len {
                        self.skipped += 1;
                        continue;
                    }
                    let mut extra = BTreeMap::new();
                    for (i, field) in record.iter().enumerate() {
                        if i != self.text_idx && i != self.date_idx {
                            extra.insert(self.headers[i].clone(), field.to_owned());
                        }
                    }
                    return Some(Ok(RawRecord {
                        text: record[self.text_idx].to_owned(),
                        date: record[self.date_idx].to_owned(),
                        extra,
                    }));
                }
                Err(err) => match csv_to_corpus_error(err, 0) {
                    // Quoting/UTF-8 damage is confined to one row: skip it.
                    CorpusError::MalformedRow(_) => {
                        self.skipped += 1;
                        continue;
                    }
                    fatal => return Some(Err(fatal)),
                },
            }
        }
    }
}

/// Counters reported by [`ingest`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub skipped_malformed: u64,
    pub skipped_bad_date: u64,
    pub skipped_empty_text: u64,
    pub tweets: u64,
}

/// Run the full ingestion pipeline: expand contractions, clean, normalize
/// timestamps, and assign sequential ids in file order. Rows whose date does
/// not parse (or falls before the epoch) and rows whose text cleans to empty
/// are skipped and counted.
pub fn ingest(
    stream: CorpusStream,
    dict: &ContractionDictionary,
) -> Result<(Vec<Tweet>, IngestStats), CorpusError> {
    let mut stats = IngestStats::default();
    let mut tweets = Vec::new();
    let mut stream = stream;
    for record in &mut stream {
        let record = record?;
        stats.rows_read += 1;
        let ts = match normalize_timestamp(&record.date) {
            Ok(ts) if ts >= 0 => ts,
            _ => {
                stats.skipped_bad_date += 1;
                continue;
            }
        };
        let text = clean_text(&expand_contractions(&record.text, dict));
        if text.is_empty() {
            stats.skipped_empty_text += 1;
            continue;
        }
        tweets.push(Tweet {
            id: tweets.len() as u64,
            text,
            ts,
        });
    }
    stats.rows_read += stream.skipped_rows();
    stats.skipped_malformed = stream.skipped_rows();
    stats.tweets = tweets.len() as u64;
    Ok((tweets, stats))
}

/// Write tweets as JSONL (`{"id","text","ts"}` per line).
pub fn save_tweets(tweets: &[Tweet], path: &Path) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for tweet in tweets {
        serde_json::to_writer(&mut out, tweet)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read tweets back from JSONL.
pub fn load_tweets(path: &Path) -> Result<Vec<Tweet>, CorpusError> {
    let data = std::fs::read_to_string(path)?;
    let mut tweets = Vec::new();
    for line in data.lines() {
        if line.trim().is_empty() {
            continue;
        }
        tweets.push(serde_json::from_str(line)?);
    }
    Ok(tweets)
}
