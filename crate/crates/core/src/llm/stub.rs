//! Offline providers for tests and dry runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::mapper::{rule_label, rule_mentions, rule_statuses, MappingLexicon};
use crate::corpus::SectionChoice;
use crate::taxonomy::{Category, ExtendedStatus};

use super::template::{target_report, LabelMode};
use super::{ChatClient, LlmError, LlmRequest, LlmResponse};

/// Failures injected by report content: a report containing a marker
/// triggers the matching fault.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    transient: Vec<(String, u32)>,
    permanent: Vec<String>,
    malformed: Vec<String>,
}

impl FaultPlan {
    /// The first `failures` calls for a matching report fail with a
    /// retryable error.
    pub fn transient(mut self, marker: impl Into<String>, failures: u32) -> Self {
        self.transient.push((marker.into(), failures));
        self
    }

    /// Every call for a matching report fails with a retryable error.
    pub fn permanent(mut self, marker: impl Into<String>) -> Self {
        self.permanent.push(marker.into());
        self
    }

    /// Matching reports get a free-text answer with no list structure.
    pub fn malformed(mut self, marker: impl Into<String>) -> Self {
        self.malformed.push(marker.into());
        self
    }
}

/// Keyword-echo model: answers with whatever the lexicon rules find in
/// the target report, formatted the way the prompt mode asks for.
#[derive(Debug)]
pub struct StubProvider {
    mode: LabelMode,
    lexicon: MappingLexicon,
    faults: FaultPlan,
    failures_seen: Mutex<HashMap<String, u32>>,
    calls: AtomicUsize,
}

impl StubProvider {
    pub fn new(mode: LabelMode, lexicon: MappingLexicon) -> Self {
        Self::with_faults(mode, lexicon, FaultPlan::default())
    }

    pub fn with_faults(mode: LabelMode, lexicon: MappingLexicon, faults: FaultPlan) -> Self {
        StubProvider { mode, lexicon, faults, failures_seen: Mutex::new(HashMap::new()), calls: AtomicUsize::new(0) }
    }

    /// Number of `complete` calls so far, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn answer(&self, report: &str) -> String {
        match self.mode {
            LabelMode::ExtractFindings => {
                let mut out = String::from("<findings>\n");
                for m in rule_mentions(report, &self.lexicon) {
                    match m.status {
                        ExtendedStatus::Positive => out.push_str(&format!("- {}\n", m.phrase)),
                        ExtendedStatus::Uncertain => out.push_str(&format!("- {} [uncertain]\n", m.phrase)),
                        _ => {}
                    }
                }
                out.push_str("</findings>");
                out
            }
            LabelMode::DirectCategorize => {
                let v = rule_label("stub", SectionChoice::Findings, report, &self.lexicon);
                let mut out = String::from("<categories>\n");
                for c in v.positives().expect("binary") {
                    out.push_str(c.display_name());
                    out.push('\n');
                }
                out.push_str("</categories>");
                out
            }
            LabelMode::FourStatus => {
                let s = rule_statuses(report, &self.lexicon);
                let mut out = String::from("<labels>\n");
                for c in Category::ALL {
                    let st = s[c.index()];
                    if st != ExtendedStatus::NotMentioned {
                        let word = match st {
                            ExtendedStatus::Positive => "positive",
                            ExtendedStatus::Negative => "negative",
                            _ => "uncertain",
                        };
                        out.push_str(&format!("{}: {word}\n", c.display_name()));
                    }
                }
                out.push_str("</labels>");
                out
            }
        }
    }
}

impl ChatClient for StubProvider {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let report = target_report(&request.prompt).unwrap_or(&request.prompt);
        if let Some(m) = self.faults.permanent.iter().find(|m| report.contains(m.as_str())) {
            return Err(LlmError::Provider { retryable: true, message: format!("injected outage ({m})") });
        }
        for (marker, failures) in &self.faults.transient {
            if report.contains(marker.as_str()) {
                let mut seen = self.failures_seen.lock().unwrap();
                let n = seen.entry(report.to_string()).or_insert(0);
                if *n < *failures {
                    *n += 1;
                    return Err(LlmError::Provider { retryable: true, message: format!("injected 503 ({marker})") });
                }
            }
        }
        if self.faults.malformed.iter().any(|m| report.contains(m.as_str())) {
            return Ok(LlmResponse::text("I cannot determine"));
        }
        Ok(LlmResponse::text(self.answer(report)))
    }
}

/// Returns the same answer for every prompt.
#[derive(Debug)]
pub struct FixedProvider {
    response: String,
    calls: AtomicUsize,
}

impl FixedProvider {
    pub fn new(response: impl Into<String>) -> Self {
        FixedProvider { response: response.into(), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for FixedProvider {
    fn complete(&self, _: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(LlmResponse::text(self.response.clone()))
    }
}
