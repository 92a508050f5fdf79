//! Post archives: ingestion, validation, filtering, and JSON Lines I/O.

mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{
    default_planted, synthesize_cohort, synthesize_series, synthesize_series_map, CohortSpec,
    ExposureModel, PlantedFeature, SignalSpec,
};

/// Risk class of a labeled user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum RiskLabel {
    /// Completed suicide.
    Completed = 0,
    High = 1,
    Low = 2,
}

impl RiskLabel {
    pub const ALL: [RiskLabel; 3] = [RiskLabel::Completed, RiskLabel::High, RiskLabel::Low];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl TryFrom<u8> for RiskLabel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        RiskLabel::from_index(v as usize).ok_or_else(|| format!("label {v} not in {{0,1,2}}"))
    }
}

impl From<RiskLabel> for u8 {
    fn from(l: RiskLabel) -> u8 {
        l as u8
    }
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

impl PostRecord {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

/// One user's posts, ascending by timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserArchive {
    pub user_id: String,
    pub label: Option<RiskLabel>,
    pub posts: Vec<PostRecord>,
}

impl UserArchive {
    /// Calendar days from first to last post, inclusive; 0 for an empty archive.
    pub fn span_days(&self) -> u32 {
        match (self.posts.first(), self.posts.last()) {
            (Some(a), Some(b)) => (b.date() - a.date()).num_days() as u32 + 1,
            _ => 0,
        }
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.posts.first().map(PostRecord::date)
    }
}

/// A line of the archive file before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(default)]
    pub user_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub label: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// Zero-based position in the input stream.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub archives: BTreeMap<String, UserArchive>,
    pub report: IngestReport,
}

/// Group records by user and sort each archive by timestamp.
///
/// Invalid records are collected in the report; the call only fails when the
/// stream is non-empty and no record survives.
pub fn ingest_posts(records: impl IntoIterator<Item = RawRecord>) -> Result<Ingested> {
    ingest_results(records.into_iter().map(Ok))
}

/// Read an archive file (one JSON object per line). Unparseable lines are rejections.
pub fn ingest_jsonl(reader: impl BufRead) -> Result<Ingested> {
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("reading post archive", e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str::<RawRecord>(&line).map_err(|e| e.to_string()));
    }
    ingest_results(lines.into_iter())
}

fn ingest_results(
    records: impl Iterator<Item = std::result::Result<RawRecord, String>>,
) -> Result<Ingested> {
    let now = Utc::now();
    let earliest = Utc.with_ymd_and_hms(1990, 1, 1, 0, 0, 0).unwrap();
    let mut archives: BTreeMap<String, UserArchive> = BTreeMap::new();
    let mut report = IngestReport::default();

    for (index, record) in records.enumerate() {
        let validated = record.and_then(|raw| validate(raw, earliest, now));
        let (post, label) = match validated {
            Ok(v) => v,
            Err(reason) => {
                report.rejections.push(Rejection { index, reason });
                continue;
            }
        };
        let archive = archives
            .entry(post.user_id.clone())
            .or_insert_with(|| UserArchive {
                user_id: post.user_id.clone(),
                label,
                posts: Vec::new(),
            });
        match (archive.label, label) {
            (Some(a), Some(b)) if a != b => {
                report.rejections.push(Rejection {
                    index,
                    reason: format!("label {b} conflicts with earlier label {a}"),
                });
                continue;
            }
            (None, Some(b)) => archive.label = Some(b),
            _ => {}
        }
        archive.posts.push(post);
        report.accepted += 1;
    }

    if report.accepted == 0 && !report.rejections.is_empty() {
        return Err(Error::EmptyStream {
            rejected: report.rejections.len(),
        });
    }
    for archive in archives.values_mut() {
        archive.posts.sort_by_key(|p| p.timestamp);
    }
    Ok(Ingested { archives, report })
}

fn validate(
    raw: RawRecord,
    earliest: DateTime<Utc>,
    now: DateTime<Utc>,
) -> std::result::Result<(PostRecord, Option<RiskLabel>), String> {
    let user_id = raw
        .user_id
        .filter(|u| !u.is_empty())
        .ok_or("missing user_id")?;
    let ts = raw.timestamp.ok_or("missing timestamp")?;
    let timestamp = parse_timestamp(&ts).ok_or_else(|| format!("malformed timestamp `{ts}`"))?;
    if timestamp < earliest || timestamp > now {
        return Err(format!("timestamp `{ts}` outside [1990-01-01, now]"));
    }
    let label = match raw.label {
        None => None,
        Some(v) => Some(
            u8::try_from(v)
                .ok()
                .and_then(|v| RiskLabel::try_from(v).ok())
                .ok_or_else(|| format!("label {v} not in {{0,1,2}}"))?,
        ),
    };
    Ok((
        PostRecord {
            user_id,
            timestamp,
            text: raw.text.unwrap_or_default(),
        },
        label,
    ))
}

/// ISO-8601 with offset, naive date-time (taken as UTC), or a bare date.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc())
}

#[derive(Serialize)]
struct OutRecord<'a> {
    user_id: &'a str,
    timestamp: String,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<RiskLabel>,
}

/// Write archives as JSON Lines, one post per line, users in iteration order.
pub fn write_jsonl<'a>(
    archives: impl IntoIterator<Item = &'a UserArchive>,
    mut out: impl Write,
) -> Result<()> {
    for archive in archives {
        for post in &archive.posts {
            let rec = OutRecord {
                user_id: &archive.user_id,
                timestamp: post
                    .timestamp
                    .to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
                text: &post.text,
                label: archive.label,
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::json("encoding post", e))?;
            writeln!(out, "{line}").map_err(|e| Error::io("writing post archive", e))?;
        }
    }
    Ok(())
}

/// Inclusion criteria for archives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterCriteria {
    pub min_posts: usize,
    /// Inclusive bounds on `span_days`.
    pub span_range: [u32; 2],
    /// When false, labeled users bypass the filter.
    pub apply_to_labeled: bool,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            min_posts: 20,
            span_range: [50, 1800],
            apply_to_labeled: true,
        }
    }
}

impl FilterCriteria {
    pub fn accepts(&self, archive: &UserArchive) -> bool {
        if archive.label.is_some() && !self.apply_to_labeled {
            return true;
        }
        let span = archive.span_days();
        archive.posts.len() >= self.min_posts
            && span >= self.span_range[0]
            && span <= self.span_range[1]
    }
}

/// Keep archives meeting the criteria, preserving input order.
pub fn filter_users(
    archives: impl IntoIterator<Item = UserArchive>,
    criteria: &FilterCriteria,
) -> Vec<UserArchive> {
    archives
        .into_iter()
        .filter(|a| criteria.accepts(a))
        .collect()
}
