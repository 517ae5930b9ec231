use std::io::BufRead;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// A single social-media message as read from the input dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    id: String,
    text: String,
    timestamp: DateTime<Utc>,
    country: Option<String>,
    lang: Option<String>,
    lang_confidence: Option<f64>,
}

impl TweetRecord {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        timestamp: DateTime<Utc>,
        country: Option<String>,
    ) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.is_empty() {
            return Err(CorpusError::InvalidRecord("text is empty".into()));
        }
        Ok(TweetRecord {
            id: id.into(),
            text,
            timestamp,
            country: country.map(|c| c.trim().to_ascii_uppercase()).filter(|c| !c.is_empty()),
            lang: None,
            lang_confidence: None,
        })
    }

    /// Attach a language tag. Tag and confidence are always set together.
    pub fn with_language(mut self, lang: impl Into<String>, confidence: f64) -> Result<Self, CorpusError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CorpusError::InvalidRecord(format!(
                "language confidence {confidence} outside [0, 1]"
            )));
        }
        self.lang = Some(lang.into());
        self.lang_confidence = Some(confidence);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        self.timestamp
    }

    pub fn country(&self) -> Option<&str> {
        self.country.as_deref()
    }

    pub fn language(&self) -> Option<(&str, f64)> {
        match (&self.lang, self.lang_confidence) {
            (Some(lang), Some(conf)) => Some((lang.as_str(), conf)),
            _ => None,
        }
    }
}

/// Wire shape of one JSONL input line. `lang`/`lang_confidence` are optional
/// and let pre-tagged dumps skip detection.
#[derive(Debug, Deserialize)]
struct RawTweet {
    id: serde_json::Value,
    text: String,
    timestamp: String,
    #[serde(default)]
    country: Option<String>,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default)]
    lang_confidence: Option<f64>,
}

fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc));
    }
    // tolerate naive "YYYY-MM-DDTHH:MM:SS" and bare dates, read as UTC
    if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S") {
        return Some(naive.and_utc());
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

/// Parse one JSONL line into a record.
pub fn parse_tweet_line(line: &str) -> Result<TweetRecord, CorpusError> {
    let raw: RawTweet =
        serde_json::from_str(line).map_err(|e| CorpusError::InvalidRecord(e.to_string()))?;
    let id = match raw.id {
        serde_json::Value::String(s) => s,
        serde_json::Value::Number(n) => n.to_string(),
        other => return Err(CorpusError::InvalidRecord(format!("unsupported id {other}"))),
    };
    let timestamp = parse_timestamp(&raw.timestamp)
        .ok_or_else(|| CorpusError::InvalidRecord(format!("bad timestamp '{}'", raw.timestamp)))?;
    let record = TweetRecord::new(id, raw.text, timestamp, raw.country)?;
    match (raw.lang, raw.lang_confidence) {
        (Some(lang), Some(conf)) => record.with_language(lang, conf),
        (Some(lang), None) => record.with_language(lang, 1.0),
        (None, Some(_)) => Err(CorpusError::InvalidRecord(
            "lang_confidence given without lang".into(),
        )),
        (None, None) => Ok(record),
    }
}

/// Result of reading a JSONL dump: parsed records plus the 1-based line
/// numbers that could not be parsed.
#[derive(Debug, Default)]
pub struct TweetStream {
    pub records: Vec<TweetRecord>,
    pub malformed_lines: Vec<usize>,
}

/// Read a JSONL tweet dump. Malformed lines are recorded and skipped; blank
/// lines are ignored.
pub fn read_tweets_jsonl<R: BufRead>(reader: R) -> Result<TweetStream, std::io::Error> {
    let mut stream = TweetStream::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_tweet_line(&line) {
            Ok(record) => stream.records.push(record),
            Err(err) => {
                log::debug!("skipping malformed line {}: {err}", idx + 1);
                stream.malformed_lines.push(idx + 1);
            }
        }
    }
    Ok(stream)
}

/// Geographic origin and inclusive date window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatioTemporalWindow {
    pub country: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Default for SpatioTemporalWindow {
    fn default() -> Self {
        SpatioTemporalWindow {
            country: "IN".into(),
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2019, 12, 31).expect("valid date"),
        }
    }
}

impl SpatioTemporalWindow {
    pub fn contains(&self, record: &TweetRecord) -> bool {
        spatiotemporal_filter(record, &self.country, self.start, self.end)
    }
}

/// True iff the record comes from `country` and its UTC date lies in
/// `[start, end]`. Records without a country never match.
pub fn spatiotemporal_filter(
    record: &TweetRecord,
    country: &str,
    start: NaiveDate,
    end: NaiveDate,
) -> bool {
    let Some(origin) = record.country() else {
        return false;
    };
    let day = record.timestamp().date_naive();
    origin.eq_ignore_ascii_case(country) && start <= day && day <= end
}
