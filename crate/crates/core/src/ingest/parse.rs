use std::io::BufRead;
use std::str::FromStr;

use chrono::DateTime;
use log::warn;

use super::CheckIn;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    User,
    Poi,
    Lat,
    Lon,
    Timestamp,
    Words,
    /// Column present in the file but ignored.
    Skip,
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "user" | "u" => Field::User,
            "poi" | "v" | "venue" => Field::Poi,
            "lat" | "latitude" => Field::Lat,
            "lon" | "lng" | "longitude" => Field::Lon,
            "time" | "ts" | "timestamp" => Field::Timestamp,
            "words" | "content" | "tags" => Field::Words,
            "_" | "skip" => Field::Skip,
            other => return Err(Error::Format(format!("unknown field {other:?}"))),
        })
    }
}

/// Column layout of a delimiter-separated check-in file.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordFormat {
    pub delimiter: char,
    pub fields: Vec<Field>,
}

impl Default for RecordFormat {
    fn default() -> Self {
        RecordFormat {
            delimiter: ',',
            fields: vec![
                Field::User,
                Field::Poi,
                Field::Lat,
                Field::Lon,
                Field::Timestamp,
                Field::Words,
            ],
        }
    }
}

impl RecordFormat {
    /// Parses a field-order descriptor such as `"user,poi,lat,lon,timestamp,words"`.
    pub fn with_fields(delimiter: char, descriptor: &str) -> Result<Self> {
        let fields = descriptor
            .split(',')
            .map(Field::from_str)
            .collect::<Result<Vec<_>>>()?;
        for required in [
            Field::User,
            Field::Poi,
            Field::Lat,
            Field::Lon,
            Field::Timestamp,
        ] {
            match fields.iter().filter(|f| **f == required).count() {
                1 => {}
                0 => return Err(Error::Format(format!("missing field {required:?}"))),
                _ => return Err(Error::Format(format!("duplicate field {required:?}"))),
            }
        }
        if fields.iter().filter(|f| **f == Field::Words).count() > 1 {
            return Err(Error::Format("duplicate field Words".into()));
        }
        Ok(RecordFormat { delimiter, fields })
    }

    fn parse_line(&self, line: &str) -> Option<CheckIn> {
        let cols: Vec<&str> = line.split(self.delimiter).collect();
        // A trailing words column may be omitted entirely.
        let required = match self.fields.last() {
            Some(Field::Words) => self.fields.len() - 1,
            _ => self.fields.len(),
        };
        if cols.len() < required || cols.len() > self.fields.len() {
            return None;
        }
        let mut rec = CheckIn {
            user: String::new(),
            poi: String::new(),
            timestamp: 0,
            lat: f64::NAN,
            lon: f64::NAN,
            words: Vec::new(),
        };
        for (field, raw) in self.fields.iter().zip(cols) {
            let raw = raw.trim();
            match field {
                Field::User => rec.user = raw.to_string(),
                Field::Poi => rec.poi = raw.to_string(),
                Field::Lat => rec.lat = raw.parse().ok()?,
                Field::Lon => rec.lon = raw.parse().ok()?,
                Field::Timestamp => rec.timestamp = parse_timestamp(raw)?,
                Field::Words => {
                    rec.words = raw
                        .split('|')
                        .map(|w| w.trim().to_lowercase())
                        .filter(|w| !w.is_empty())
                        .collect();
                }
                Field::Skip => {}
            }
        }
        let valid = !rec.user.is_empty()
            && !rec.poi.is_empty()
            && (-90.0..=90.0).contains(&rec.lat)
            && (-180.0..=180.0).contains(&rec.lon)
            && rec.timestamp >= 0;
        valid.then_some(rec)
    }
}

/// Epoch seconds, or an RFC 3339 date-time such as `2010-07-24T13:45:00Z`.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    DateTime::parse_from_rfc3339(raw)
        .ok()
        .map(|t| t.timestamp())
}

#[derive(Clone, Debug, Default)]
pub struct ParsedCheckIns {
    pub checkins: Vec<CheckIn>,
    /// Malformed or out-of-range lines that were dropped.
    pub skipped: usize,
    /// Non-blank lines seen.
    pub lines: usize,
}

/// Reads every well-formed record from `source`. Blank lines are ignored;
/// malformed lines are skipped with a warning, unless they make up more than
/// half of the input, which almost always means the format descriptor is wrong.
pub fn parse_checkins<R: BufRead>(mut source: R, format: &RecordFormat) -> Result<ParsedCheckIns> {
    let mut out = ParsedCheckIns::default();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if source.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let parsed = std::str::from_utf8(&buf)
            .ok()
            .map(|s| s.trim_end_matches(['\n', '\r']));
        if matches!(parsed, Some(s) if s.trim().is_empty()) {
            continue;
        }
        out.lines += 1;
        match parsed.and_then(|s| format.parse_line(s)) {
            Some(rec) => out.checkins.push(rec),
            None => {
                out.skipped += 1;
                warn!("skipping malformed check-in on line {line_no}");
            }
        }
    }
    if out.skipped * 2 > out.lines {
        return Err(Error::MostlyMalformed {
            skipped: out.skipped,
            total: out.lines,
        });
    }
    Ok(out)
}
