//! Report ingestion, whitespace normalization, section splitting and
//! keyword-boosted subsetting.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("report is empty after normalization")]
    EmptyReport,
    #[error("requested {requested} reports but only {available} unique reports are available")]
    InsufficientCorpus { requested: usize, available: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionChoice {
    Findings,
    Impression,
}

impl SectionChoice {
    pub const BOTH: [SectionChoice; 2] = [SectionChoice::Findings, SectionChoice::Impression];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionChoice::Findings => "findings",
            SectionChoice::Impression => "impression",
        }
    }
}

impl fmt::Display for SectionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "findings" | "finding" => Ok(SectionChoice::Findings),
            "impression" => Ok(SectionChoice::Impression),
            other => Err(format!("unknown section `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiologyReport {
    pub study_id: String,
    pub findings: Option<String>,
    pub impression: Option<String>,
    pub raw: String,
}

impl RadiologyReport {
    pub fn section(&self, s: SectionChoice) -> Option<&str> {
        match s {
            SectionChoice::Findings => self.findings.as_deref(),
            SectionChoice::Impression => self.impression.as_deref(),
        }
    }
}

/// Collapse every whitespace run to one space and trim the ends.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeaderKind {
    Section(SectionChoice),
    Other,
}

#[derive(Debug, Clone, Copy)]
struct Header {
    start: usize,
    content: usize,
    kind: HeaderKind,
}

fn section_keyword(label: &str) -> Option<SectionChoice> {
    match label.to_ascii_lowercase().as_str() {
        "findings" => Some(SectionChoice::Findings),
        "impression" => Some(SectionChoice::Impression),
        _ => None,
    }
}

fn is_generic_header_label(label: &str) -> bool {
    !label.is_empty()
        && label.len() <= 40
        && label.chars().any(|c| c.is_ascii_uppercase())
        && label.chars().all(|c| c.is_ascii_uppercase() || matches!(c, ' ' | '/' | '(' | ')' | '&'))
}

fn find_headers(raw: &str) -> Vec<Header> {
    let mut headers = Vec::new();
    let lower = raw.to_ascii_lowercase();

    // Headers at the start of a line: `LABEL:` or a bare section keyword
    // alone on its line.
    let mut line_start = 0;
    for line in raw.split_inclusive('\n') {
        let indent = line.len() - line.trim_start_matches([' ', '\t']).len();
        let body = &line[indent..];
        let start = line_start + indent;
        if let Some(colon) = body.find(':') {
            let label = body[..colon].trim_end();
            let kind = match section_keyword(label) {
                Some(s) => Some(HeaderKind::Section(s)),
                None if is_generic_header_label(label) => Some(HeaderKind::Other),
                None => None,
            };
            if let Some(kind) = kind {
                headers.push(Header { start, content: start + colon + 1, kind });
            }
        } else if let Some(s) = section_keyword(body.trim_end()) {
            headers.push(Header { start, content: line_start + line.len(), kind: HeaderKind::Section(s) });
        }
        line_start += line.len();
    }

    // Section keywords at a sentence start within a line.
    for (keyword, section) in [("findings", SectionChoice::Findings), ("impression", SectionChoice::Impression)] {
        let mut from = 0;
        while let Some(off) = lower[from..].find(keyword) {
            let pos = from + off;
            from = pos + keyword.len();
            let after = lower[pos + keyword.len()..].trim_start_matches([' ', '\t']);
            if !after.starts_with(':') {
                continue;
            }
            let before = lower[..pos].trim_end();
            let sentence_start = before.is_empty() || before.ends_with(['.', '\n', '!', '?']);
            if !sentence_start {
                continue;
            }
            let colon = lower.len() - after.len();
            headers.push(Header { start: pos, content: colon + 1, kind: HeaderKind::Section(section) });
        }
    }

    headers.sort_by_key(|h| h.start);
    headers.dedup_by_key(|h| h.start);
    headers
}

/// Split raw report text into Findings and Impression sections.
pub fn split_sections(study_id: &str, raw: &str) -> Result<RadiologyReport, CorpusError> {
    let normalized = normalize_text(raw);
    if normalized.is_empty() {
        return Err(CorpusError::EmptyReport);
    }
    let headers = find_headers(raw);
    let mut findings = String::new();
    let mut impression = String::new();
    let mut saw_section = false;
    for (i, h) in headers.iter().enumerate() {
        let HeaderKind::Section(section) = h.kind else { continue };
        saw_section = true;
        let end = headers.get(i + 1).map_or(raw.len(), |n| n.start);
        let text = normalize_text(&raw[h.content..end]);
        let dest = match section {
            SectionChoice::Findings => &mut findings,
            SectionChoice::Impression => &mut impression,
        };
        if !text.is_empty() {
            if !dest.is_empty() {
                dest.push(' ');
            }
            dest.push_str(&text);
        }
    }
    if !saw_section {
        impression = normalized;
    }
    let findings = (!findings.is_empty()).then_some(findings);
    let impression = (!impression.is_empty()).then_some(impression);
    if findings.is_none() && impression.is_none() {
        return Err(CorpusError::EmptyReport);
    }
    Ok(RadiologyReport { study_id: study_id.to_string(), findings, impression, raw: raw.to_string() })
}

/// Build a report from already-split sections.
pub fn from_sections(
    study_id: &str,
    findings: Option<&str>,
    impression: Option<&str>,
) -> Result<RadiologyReport, CorpusError> {
    let norm = |s: Option<&str>| s.map(normalize_text).filter(|t| !t.is_empty());
    let (f, i) = (norm(findings), norm(impression));
    if f.is_none() && i.is_none() {
        return Err(CorpusError::EmptyReport);
    }
    let mut raw = String::new();
    if let Some(f) = findings {
        raw.push_str("FINDINGS: ");
        raw.push_str(f);
    }
    if let Some(i) = impression {
        if !raw.is_empty() {
            raw.push('\n');
        }
        raw.push_str("IMPRESSION: ");
        raw.push_str(i);
    }
    Ok(RadiologyReport { study_id: study_id.to_string(), findings: f, impression: i, raw })
}

/// The section with more characters; ties go to Findings.
pub fn select_longer_segment(report: &RadiologyReport) -> Result<(SectionChoice, &str), CorpusError> {
    match (report.findings.as_deref(), report.impression.as_deref()) {
        (Some(f), Some(i)) => {
            if i.chars().count() > f.chars().count() {
                Ok((SectionChoice::Impression, i))
            } else {
                Ok((SectionChoice::Findings, f))
            }
        }
        (Some(f), None) => Ok((SectionChoice::Findings, f)),
        (None, Some(i)) => Ok((SectionChoice::Impression, i)),
        (None, None) => Err(CorpusError::EmptyReport),
    }
}

/// Rare-category keywords used to enrich a training subset.
pub const DEFAULT_BOOST_KEYWORDS: &[&str] = &[
    "fractur",
    "deformit",
    "subdiaphragmatic",
    "free air",
    "free gas",
    "pneumoperitoneum",
    "subcutaneous emphysema",
    "pneumothora",
    "nodul",
    "granuloma",
    "hyperinflat",
];

/// Case-insensitive match of a literal word stem starting on a word boundary.
pub fn matches_keyword(text: &str, stem: &str) -> bool {
    let stem = stem.trim().to_lowercase();
    if stem.is_empty() {
        return false;
    }
    let lower = text.to_lowercase();
    let mut from = 0;
    while let Some(off) = lower[from..].find(&stem) {
        let pos = from + off;
        let boundary = lower[..pos].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        if boundary {
            return true;
        }
        from = pos + lower[pos..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Keyword-matching reports first (input order), then non-matching filler,
/// up to `count`. Duplicated study ids keep their first occurrence.
pub fn keyword_subset(
    reports: &[RadiologyReport],
    boost_keywords: &[&str],
    count: usize,
) -> Result<Vec<RadiologyReport>, CorpusError> {
    let mut seen = HashSet::new();
    let unique: Vec<&RadiologyReport> = reports.iter().filter(|r| seen.insert(r.study_id.as_str())).collect();
    if count > unique.len() {
        return Err(CorpusError::InsufficientCorpus { requested: count, available: unique.len() });
    }
    let (hits, rest): (Vec<&RadiologyReport>, Vec<&RadiologyReport>) = unique.into_iter().partition(|r| {
        select_longer_segment(r).is_ok_and(|(_, text)| boost_keywords.iter().any(|k| matches_keyword(text, k)))
    });
    Ok(hits.into_iter().chain(rest).take(count).cloned().collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputRecord {
    study_id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    findings: Option<String>,
    #[serde(default)]
    impression: Option<String>,
}

/// One row of a normalized corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub study_id: String,
    pub findings: Option<String>,
    pub impression: Option<String>,
    pub selected_section: SectionChoice,
    pub selected_text: String,
}

impl CorpusRecord {
    pub fn from_report(r: &RadiologyReport) -> Result<Self, CorpusError> {
        let (section, text) = select_longer_segment(r)?;
        Ok(CorpusRecord {
            study_id: r.study_id.clone(),
            findings: r.findings.clone(),
            impression: r.impression.clone(),
            selected_section: section,
            selected_text: text.to_string(),
        })
    }

    pub fn section(&self, s: SectionChoice) -> Option<&str> {
        match s {
            SectionChoice::Findings => self.findings.as_deref(),
            SectionChoice::Impression => self.impression.as_deref(),
        }
    }

    pub fn to_report(&self) -> RadiologyReport {
        let mut raw = String::new();
        if let Some(f) = &self.findings {
            raw.push_str("FINDINGS: ");
            raw.push_str(f);
        }
        if let Some(i) = &self.impression {
            if !raw.is_empty() {
                raw.push('\n');
            }
            raw.push_str("IMPRESSION: ");
            raw.push_str(i);
        }
        RadiologyReport {
            study_id: self.study_id.clone(),
            findings: self.findings.clone(),
            impression: self.impression.clone(),
            raw,
        }
    }
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub reports: Vec<RadiologyReport>,
    pub warnings: Vec<String>,
}

/// Read line-delimited report records. Blank lines are ignored; malformed,
/// empty and duplicate records are skipped with a warning.
pub fn read_reports(reader: impl BufRead) -> Result<IngestOutcome, CorpusError> {
    let mut out = IngestOutcome::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InputRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                out.warnings.push(format!("line {lineno}: malformed record: {e}"));
                continue;
            }
        };
        let parsed = match (&rec.text, &rec.findings, &rec.impression) {
            (Some(text), None, None) => split_sections(&rec.study_id, text),
            (None, f, i) if f.is_some() || i.is_some() => from_sections(&rec.study_id, f.as_deref(), i.as_deref()),
            _ => {
                out.warnings
                    .push(format!("line {lineno}: record needs either `text` or `findings`/`impression`"));
                continue;
            }
        };
        match parsed {
            Ok(report) => {
                if seen.insert(report.study_id.clone()) {
                    out.reports.push(report);
                } else {
                    out.warnings.push(format!("line {lineno}: duplicate study_id `{}`", rec.study_id));
                }
            }
            Err(e) => out.warnings.push(format!("line {lineno}: study `{}`: {e}", rec.study_id)),
        }
    }
    Ok(out)
}

pub fn write_corpus(records: &[CorpusRecord], mut w: impl Write) -> Result<(), CorpusError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}
