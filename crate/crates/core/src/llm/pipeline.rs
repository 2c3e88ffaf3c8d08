use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusRecord, RadiologyReport, SectionChoice};
use crate::mapper::{map_mentions, MappingLexicon};
use crate::taxonomy::{merge_uncertain, LabelVector, Scheme, UncertainPolicy};

use super::cache::{cache_key, CacheEntry, ResponseCache};
use super::client::{call_with_retry, ChatClient, LlmRequest, RetryPolicy, Sleeper, DEFAULT_MAX_TOKENS};
use super::parse::{parse_findings, ParsedAnswer};
use super::template::{build_prompt, LabelMode, PromptTemplate};
use super::LlmError;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelerOptions {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
    pub concurrency: usize,
}

impl Default for LabelerOptions {
    fn default() -> Self {
        LabelerOptions {
            model: "gpt-4".into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            retry: RetryPolicy::default(),
            concurrency: 4,
        }
    }
}

/// Where a label came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub study_id: String,
    pub section: SectionChoice,
    pub mode: LabelMode,
    pub model: String,
    pub cache_key: String,
    pub template_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub study_id: String,
    pub section: SectionChoice,
    pub error_kind: String,
    pub message: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub vector: LabelVector,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub reports: usize,
    pub labeled: usize,
    pub quarantined: usize,
    pub network_calls: usize,
    pub cache_hits: usize,
    pub retries: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    /// One entry per labeled report, in corpus order.
    pub labels: Vec<LabelVector>,
    pub provenance: Vec<Provenance>,
    pub quarantine: Vec<QuarantineRecord>,
    pub stats: BatchStats,
}

impl BatchOutcome {
    pub fn failure_ids(&self) -> Vec<String> {
        self.quarantine.iter().map(|q| q.study_id.clone()).collect()
    }
}

struct Attempt {
    result: Result<Labeled, LlmError>,
    network_calls: u32,
    retries: u32,
    cache_hit: bool,
}

/// Prompts the model for one report section at a time and turns the answer
/// into a label vector.
pub struct Labeler<'a> {
    pub template: &'a PromptTemplate,
    pub lexicon: &'a MappingLexicon,
    pub client: &'a dyn ChatClient,
    pub cache: Option<&'a ResponseCache>,
    pub sleeper: &'a dyn Sleeper,
    pub options: LabelerOptions,
}

impl<'a> Labeler<'a> {
    fn attempt(&self, study_id: &str, section: SectionChoice, text: &str) -> Attempt {
        let mut a = Attempt { result: Err(LlmError::EmptyReport), network_calls: 0, retries: 0, cache_hit: false };
        let prompt = match build_prompt(self.template, text) {
            Ok(p) => p,
            Err(e) => {
                a.result = Err(e.for_report(study_id));
                return a;
            }
        };
        let request = LlmRequest {
            model: self.options.model.clone(),
            prompt,
            temperature: self.options.temperature,
            max_tokens: self.options.max_tokens,
        };
        let key = cache_key(&request);
        let cached = match self.cache.map(|c| c.get(&key)).transpose() {
            Ok(c) => c.flatten(),
            Err(e) => {
                a.result = Err(e.for_report(study_id));
                return a;
            }
        };
        let raw = match cached {
            Some(entry) => {
                a.cache_hit = true;
                entry.response
            }
            None => {
                let (res, retries) = call_with_retry(self.client, &request, &self.options.retry, self.sleeper);
                a.retries = retries;
                a.network_calls = retries + 1;
                let response = match res {
                    Ok(r) => r.text,
                    Err(e) => {
                        a.result = Err(e.for_report(study_id));
                        return a;
                    }
                };
                if let Some(cache) = self.cache {
                    let entry = CacheEntry {
                        key: key.clone(),
                        model: request.model.clone(),
                        created_at: chrono::Utc::now().to_rfc3339(),
                        response: response.clone(),
                    };
                    if let Err(e) = cache.put(&entry) {
                        a.result = Err(e.for_report(study_id));
                        return a;
                    }
                }
                response
            }
        };
        a.result = self.interpret(study_id, section, &raw).map(|vector| Labeled {
            vector,
            provenance: Provenance {
                study_id: study_id.to_string(),
                section,
                mode: self.template.mode,
                model: request.model.clone(),
                cache_key: key,
                template_digest: self.template.digest(),
            },
        });
        a
    }

    fn interpret(&self, study_id: &str, section: SectionChoice, raw: &str) -> Result<LabelVector, LlmError> {
        let parsed = parse_findings(raw, self.template.mode).map_err(|e| e.for_report(study_id))?;
        Ok(match parsed {
            ParsedAnswer::Mentions(m) => map_mentions(study_id, section, &m, self.lexicon),
            ParsedAnswer::Binary(l) => LabelVector::binary(study_id, section, l),
            ParsedAnswer::FourStatus(s) => LabelVector::four_status(study_id, section, s),
        })
    }

    /// Label one section. Extract mode maps the mentions through the
    /// lexicon; direct mode returns the parsed vector; four-status mode
    /// keeps the statuses.
    pub fn label_section(&self, study_id: &str, section: SectionChoice, text: &str) -> Result<Labeled, LlmError> {
        self.attempt(study_id, section, text).result
    }

    /// Binary pseudo-label for one report section (uncertain counts as
    /// positive).
    pub fn pseudo_label(&self, report: &RadiologyReport, section: SectionChoice) -> Result<LabelVector, LlmError> {
        let text = report.section(section).ok_or_else(|| LlmError::EmptyReport.for_report(&report.study_id))?;
        let labeled = self.label_section(&report.study_id, section, text)?;
        if labeled.vector.scheme() == Scheme::Binary {
            return Ok(labeled.vector);
        }
        merge_uncertain(&labeled.vector, UncertainPolicy::MergeUncertainAsPositive)
            .map_err(|e| LlmError::MalformedResponse(e.to_string()).for_report(&report.study_id))
    }

    /// Label every record with at most `options.concurrency` requests in
    /// flight. `section` picks a fixed section; `None` uses each record's
    /// selected section. Every record ends up labeled or quarantined.
    pub fn batch_label(&self, corpus: &[CorpusRecord], section: Option<SectionChoice>) -> BatchOutcome {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Attempt>>> = corpus.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.options.concurrency.max(1).min(corpus.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(rec) = corpus.get(i) else { break };
                    let sec = section.unwrap_or(rec.selected_section);
                    let attempt = match rec.section(sec) {
                        Some(text) => self.attempt(&rec.study_id, sec, text),
                        None => Attempt {
                            result: Err(LlmError::EmptyReport.for_report(&rec.study_id)),
                            network_calls: 0,
                            retries: 0,
                            cache_hit: false,
                        },
                    };
                    *slots[i].lock().unwrap() = Some(attempt);
                });
            }
        });

        let mut out = BatchOutcome::default();
        for (rec, slot) in corpus.iter().zip(slots) {
            let a = slot.into_inner().unwrap().expect("every slot filled");
            out.stats.reports += 1;
            out.stats.network_calls += a.network_calls as usize;
            out.stats.retries += a.retries as usize;
            out.stats.cache_hits += a.cache_hit as usize;
            match a.result {
                Ok(l) => {
                    out.stats.labeled += 1;
                    out.labels.push(l.vector);
                    out.provenance.push(l.provenance);
                }
                Err(e) => {
                    out.stats.quarantined += 1;
                    let message = match &e {
                        LlmError::Report { source, .. } => source.to_string(),
                        other => other.to_string(),
                    };
                    out.quarantine.push(QuarantineRecord {
                        study_id: rec.study_id.clone(),
                        section: section.unwrap_or(rec.selected_section),
                        error_kind: e.kind().to_string(),
                        message,
                        attempts: a.network_calls,
                    });
                }
            }
        }
        out
    }
}
