//! Parsing of model answers.
//!
//! Accepted shapes: a list framed by `<findings>`, `<categories>`,
//! `<labels>` or `<answer>` tags (one item per line, optional `-`/`*`
//! bullets), a plain numbered list, or a JSON array of strings (a JSON
//! object of `category: status` in four-status mode).

use crate::mapper::FindingMention;
use crate::taxonomy::{Category, ExtendedStatus, PresenceLabel, NUM_CATEGORIES};

use super::template::LabelMode;
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedAnswer {
    Mentions(Vec<FindingMention>),
    Binary([PresenceLabel; NUM_CATEGORIES]),
    FourStatus([ExtendedStatus; NUM_CATEGORIES]),
}

const TAGS: [&str; 4] = ["findings", "categories", "labels", "answer"];

fn framed(text: &str) -> Option<&str> {
    let lower = text.to_ascii_lowercase();
    TAGS.iter().find_map(|tag| {
        let open = format!("<{tag}>");
        let close = format!("</{tag}>");
        let s = lower.find(&open)? + open.len();
        let e = s + lower[s..].find(&close)?;
        Some(&text[s..e])
    })
}

fn strip_numbering(line: &str) -> Option<&str> {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    rest.starts_with(char::is_whitespace).then(|| rest.trim())
}

fn strip_bullet(line: &str) -> &str {
    line.strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .or_else(|| line.strip_prefix("• "))
        .unwrap_or(line)
        .trim()
}

fn is_none_marker(item: &str) -> bool {
    matches!(
        item.to_ascii_lowercase().trim_end_matches('.'),
        "none" | "no findings" | "no abnormal findings" | "no abnormality" | "n/a"
    )
}

/// The list items of a response, or `None` when it has no list structure.
fn list_items(raw: &str) -> Option<Vec<String>> {
    if let Some(body) = framed(raw) {
        let items = body
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| strip_numbering(l).unwrap_or(l))
            .map(strip_bullet)
            .filter(|l| !l.is_empty() && !is_none_marker(l))
            .map(str::to_string)
            .collect();
        return Some(items);
    }
    let trimmed = raw.trim();
    if trimmed.starts_with('[') {
        if let Ok(items) = serde_json::from_str::<Vec<String>>(trimmed) {
            return Some(items.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
        }
    }
    let numbered: Vec<String> =
        raw.lines().filter_map(|l| strip_numbering(l.trim())).filter(|l| !l.is_empty()).map(str::to_string).collect();
    (!numbered.is_empty()).then_some(numbered)
}

fn split_status_tag(item: &str) -> (&str, ExtendedStatus) {
    let lower = item.to_ascii_lowercase();
    for (tag, status) in [
        ("[uncertain]", ExtendedStatus::Uncertain),
        ("(uncertain)", ExtendedStatus::Uncertain),
        ("[positive]", ExtendedStatus::Positive),
        ("(positive)", ExtendedStatus::Positive),
    ] {
        if lower.ends_with(tag) {
            return (item[..item.len() - tag.len()].trim(), status);
        }
    }
    (item, ExtendedStatus::Positive)
}

fn parse_status_line(item: &str) -> Result<(Category, ExtendedStatus), LlmError> {
    let (name, status) = item
        .rsplit_once(':')
        .or_else(|| item.rsplit_once(" - "))
        .ok_or_else(|| LlmError::MalformedResponse(format!("expected `Category: status`, got `{item}`")))?;
    let category: Category = name.trim().parse().map_err(|_| LlmError::UnknownCategory(name.trim().to_string()))?;
    let status = ExtendedStatus::from_code(status.trim().trim_end_matches('.'))
        .map_err(|_| LlmError::MalformedResponse(format!("bad status in `{item}`")))?;
    Ok((category, status))
}

fn four_status_from_json(raw: &str) -> Option<Result<[ExtendedStatus; NUM_CATEGORIES], LlmError>> {
    let map: std::collections::BTreeMap<String, String> = serde_json::from_str(raw.trim()).ok()?;
    let mut out = [ExtendedStatus::NotMentioned; NUM_CATEGORIES];
    for (k, v) in map {
        match parse_status_line(&format!("{k}: {v}")) {
            Ok((c, s)) => out[c.index()] = s,
            Err(e) => return Some(Err(e)),
        }
    }
    Some(Ok(out))
}

/// Parse a raw model answer according to the prompt mode.
pub fn parse_findings(raw_response: &str, mode: LabelMode) -> Result<ParsedAnswer, LlmError> {
    if mode == LabelMode::FourStatus {
        if let Some(r) = four_status_from_json(raw_response) {
            return r.map(ParsedAnswer::FourStatus);
        }
    }
    let items = list_items(raw_response)
        .ok_or_else(|| LlmError::MalformedResponse(raw_response.chars().take(200).collect()))?;
    match mode {
        LabelMode::ExtractFindings => Ok(ParsedAnswer::Mentions(
            items
                .iter()
                .map(|i| {
                    let (phrase, status) = split_status_tag(i);
                    FindingMention::with_status(phrase, status)
                })
                .filter(|m| !m.phrase.is_empty())
                .collect(),
        )),
        LabelMode::DirectCategorize => {
            let mut out = [PresenceLabel::NotPositive; NUM_CATEGORIES];
            for i in &items {
                let (name, _) = split_status_tag(i);
                let c: Category = name.parse().map_err(|_| LlmError::UnknownCategory(name.to_string()))?;
                out[c.index()] = PresenceLabel::Positive;
            }
            Ok(ParsedAnswer::Binary(out))
        }
        LabelMode::FourStatus => {
            let mut out = [ExtendedStatus::NotMentioned; NUM_CATEGORIES];
            for i in &items {
                let (c, s) = parse_status_line(i)?;
                out[c.index()] = out[c.index()].strongest(s);
            }
            Ok(ParsedAnswer::FourStatus(out))
        }
    }
}
