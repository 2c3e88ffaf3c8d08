//! Rule-based mapping from finding phrases to categories, and a
//! negation-aware rule labeler over section text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SectionChoice;
use crate::taxonomy::{Category, ExtendedStatus, LabelVector, PresenceLabel, NUM_CATEGORIES};

const DEFAULT_LEXICON: &str = include_str!("../assets/default_lexicon.toml");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate pattern `{pattern}` in {scope}")]
    DuplicatePattern { scope: String, pattern: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A lowercase token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

fn is_word_char(c: char, allow_star: bool) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\'' || (allow_star && c == '*')
}

fn tokenize_impl(text: &str, allow_star: bool) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let push = |s: usize, e: usize, out: &mut Vec<Token>| {
        let raw = &text[s..e];
        let trimmed = raw.trim_matches(|c| c == '-' || c == '\'');
        if trimmed.is_empty() {
            return;
        }
        let lead = raw.len() - raw.trim_start_matches(|c| c == '-' || c == '\'').len();
        let s2 = s + lead;
        out.push(Token { start: s2, end: s2 + trimmed.len(), text: trimmed.to_lowercase() });
    };
    for (i, c) in text.char_indices() {
        if is_word_char(c, allow_star) {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            push(s, i, &mut out);
        }
    }
    if let Some(s) = start {
        push(s, text.len(), &mut out);
    }
    out
}

/// Lowercase word tokens with punctuation stripped.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_impl(text, false)
}

/// Byte ranges of sentences, split at `.`, `;`, `:`, `?`, `!` followed by
/// whitespace or end of text.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut begin = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if matches!(c, '.' | ';' | ':' | '?' | '!') {
            let at_boundary = iter.peek().is_none_or(|&(_, n)| n.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                if !text[begin..end].trim().is_empty() {
                    out.push((begin, end));
                }
                begin = end;
            }
        }
    }
    if !text[begin..].trim().is_empty() {
        out.push((begin, text.len()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PatternWord {
    text: String,
    stem: bool,
}

impl PatternWord {
    fn matches(&self, token: &str) -> bool {
        if self.stem {
            token.starts_with(&self.text)
        } else {
            token == self.text
        }
    }
}

/// A whole-word pattern; a trailing `*` on a word matches any suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    normalized: String,
    words: Vec<PatternWord>,
}

impl Pattern {
    pub fn parse(raw: &str) -> Result<Pattern, String> {
        let tokens = tokenize_impl(raw, true);
        if tokens.is_empty() {
            return Err(format!("empty pattern `{raw}`"));
        }
        let mut words = Vec::with_capacity(tokens.len());
        for t in &tokens {
            let body = t.text.strip_suffix('*');
            let stem = body.is_some();
            let body = body.unwrap_or(&t.text);
            if body.is_empty() || body.contains('*') {
                return Err(format!("`*` is only allowed at the end of a word in `{raw}`"));
            }
            words.push(PatternWord { text: body.to_string(), stem });
        }
        let normalized = tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        Ok(Pattern { normalized, words })
    }

    pub fn as_str(&self) -> &str {
        &self.normalized
    }

    /// Token index ranges `[start, end)` where the pattern matches.
    pub fn find_all(&self, tokens: &[Token]) -> Vec<(usize, usize)> {
        let k = self.words.len();
        if tokens.len() < k {
            return Vec::new();
        }
        (0..=tokens.len() - k)
            .filter(|&i| self.words.iter().zip(&tokens[i..i + k]).all(|(w, t)| w.matches(&t.text)))
            .map(|i| (i, i + k))
            .collect()
    }

    pub fn matches_any(&self, tokens: &[Token]) -> bool {
        !self.find_all(tokens).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryRules {
    pub include: Vec<Pattern>,
    pub exclude: Vec<Pattern>,
}

/// Category definitions plus global negation/uncertainty triggers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingLexicon {
    categories: BTreeMap<Category, CategoryRules>,
    negation: Vec<Pattern>,
    uncertainty: Vec<Pattern>,
    pseudo_negation: Vec<Pattern>,
    termination: Vec<Pattern>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLexicon {
    global: RawGlobal,
    categories: BTreeMap<String, RawRules>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGlobal {
    negation: Vec<toml::Spanned<String>>,
    uncertainty: Vec<toml::Spanned<String>>,
    #[serde(default)]
    pseudo_negation: Vec<toml::Spanned<String>>,
    #[serde(default)]
    termination: Vec<toml::Spanned<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    include: Vec<toml::Spanned<String>>,
    #[serde(default)]
    exclude: Vec<toml::Spanned<String>>,
}

#[derive(Serialize)]
struct RenderLexicon<'a> {
    global: RenderGlobal<'a>,
    categories: BTreeMap<&'static str, RenderRules<'a>>,
}

#[derive(Serialize)]
struct RenderGlobal<'a> {
    negation: Vec<&'a str>,
    uncertainty: Vec<&'a str>,
    pseudo_negation: Vec<&'a str>,
    termination: Vec<&'a str>,
}

#[derive(Serialize)]
struct RenderRules<'a> {
    include: Vec<&'a str>,
    exclude: Vec<&'a str>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn compile_list(
    src: &str,
    items: &[toml::Spanned<String>],
    scope: &str,
    seen: &mut HashSet<String>,
) -> Result<Vec<Pattern>, LexiconError> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let p = Pattern::parse(item.get_ref())
            .map_err(|message| LexiconError::Parse { line: line_of(src, item.span().start), message })?;
        if !seen.insert(p.normalized.clone()) {
            return Err(LexiconError::DuplicatePattern { scope: scope.to_string(), pattern: p.normalized });
        }
        out.push(p);
    }
    Ok(out)
}

impl MappingLexicon {
    /// The lexicon shipped with the crate.
    pub fn default_lexicon() -> MappingLexicon {
        Self::from_toml_str(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn default_source() -> &'static str {
        DEFAULT_LEXICON
    }

    pub fn load(path: &Path) -> Result<MappingLexicon, LexiconError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(src: &str) -> Result<MappingLexicon, LexiconError> {
        let raw: RawLexicon = toml::from_str(src).map_err(|e| LexiconError::Parse {
            line: e.span().map_or(0, |s| line_of(src, s.start)),
            message: e.message().to_string(),
        })?;
        let mut categories = BTreeMap::new();
        for (key, rules) in &raw.categories {
            let category: Category = key.parse().map_err(|_| LexiconError::Parse {
                line: src.find(&format!("categories.{key}")).map_or(0, |o| line_of(src, o)),
                message: format!("unknown category `{key}`"),
            })?;
            // A pattern may appear only once across include and exclude of one category.
            let mut seen = HashSet::new();
            let include = compile_list(src, &rules.include, key, &mut seen)?;
            let exclude = compile_list(src, &rules.exclude, key, &mut seen)?;
            if categories.insert(category, CategoryRules { include, exclude }).is_some() {
                return Err(LexiconError::DuplicatePattern {
                    scope: "categories".into(),
                    pattern: category.key().to_string(),
                });
            }
        }
        for c in Category::ALL {
            categories.entry(c).or_default();
        }
        let g = &raw.global;
        Ok(MappingLexicon {
            categories,
            negation: compile_list(src, &g.negation, "global.negation", &mut HashSet::new())?,
            uncertainty: compile_list(src, &g.uncertainty, "global.uncertainty", &mut HashSet::new())?,
            pseudo_negation: compile_list(src, &g.pseudo_negation, "global.pseudo_negation", &mut HashSet::new())?,
            termination: compile_list(src, &g.termination, "global.termination", &mut HashSet::new())?,
        })
    }

    pub fn render(&self) -> String {
        fn strs(v: &[Pattern]) -> Vec<&str> {
            v.iter().map(|p| p.as_str()).collect()
        }
        let doc = RenderLexicon {
            global: RenderGlobal {
                negation: strs(&self.negation),
                uncertainty: strs(&self.uncertainty),
                pseudo_negation: strs(&self.pseudo_negation),
                termination: strs(&self.termination),
            },
            categories: self
                .categories
                .iter()
                .map(|(c, r)| (c.key(), RenderRules { include: strs(&r.include), exclude: strs(&r.exclude) }))
                .collect(),
        };
        toml::to_string_pretty(&doc).expect("lexicon renders")
    }

    pub fn rules(&self, c: Category) -> &CategoryRules {
        &self.categories[&c]
    }

    pub fn negation(&self) -> &[Pattern] {
        &self.negation
    }

    pub fn uncertainty(&self) -> &[Pattern] {
        &self.uncertainty
    }

    fn check_new(&self, c: Category, p: &Pattern) -> Result<(), LexiconError> {
        let r = self.rules(c);
        if r.include.iter().chain(&r.exclude).any(|q| q == p) {
            return Err(LexiconError::DuplicatePattern { scope: c.key().into(), pattern: p.normalized.clone() });
        }
        Ok(())
    }

    pub fn add_include(&mut self, c: Category, pattern: &str) -> Result<(), LexiconError> {
        let p = Pattern::parse(pattern).map_err(|message| LexiconError::Parse { line: 0, message })?;
        self.check_new(c, &p)?;
        self.categories.get_mut(&c).expect("all categories present").include.push(p);
        Ok(())
    }

    pub fn add_exclude(&mut self, c: Category, pattern: &str) -> Result<(), LexiconError> {
        let p = Pattern::parse(pattern).map_err(|message| LexiconError::Parse { line: 0, message })?;
        self.check_new(c, &p)?;
        self.categories.get_mut(&c).expect("all categories present").exclude.push(p);
        Ok(())
    }

    /// Lexicon with the given rules and triggers; used for generated lexicons.
    pub fn from_parts(
        categories: BTreeMap<Category, (Vec<String>, Vec<String>)>,
        negation: Vec<String>,
        uncertainty: Vec<String>,
    ) -> Result<MappingLexicon, LexiconError> {
        let mut lex = MappingLexicon {
            categories: Category::ALL.iter().map(|&c| (c, CategoryRules::default())).collect(),
            negation: Vec::new(),
            uncertainty: Vec::new(),
            pseudo_negation: Vec::new(),
            termination: Vec::new(),
        };
        for (c, (inc, exc)) in categories {
            for p in inc {
                lex.add_include(c, &p)?;
            }
            for p in exc {
                lex.add_exclude(c, &p)?;
            }
        }
        let compile = |v: Vec<String>, scope: &str| -> Result<Vec<Pattern>, LexiconError> {
            let mut seen = HashSet::new();
            v.iter()
                .map(|s| {
                    let p = Pattern::parse(s).map_err(|message| LexiconError::Parse { line: 0, message })?;
                    if !seen.insert(p.normalized.clone()) {
                        return Err(LexiconError::DuplicatePattern { scope: scope.into(), pattern: p.normalized });
                    }
                    Ok(p)
                })
                .collect()
        };
        lex.negation = compile(negation, "global.negation")?;
        lex.uncertainty = compile(uncertainty, "global.uncertainty")?;
        Ok(lex)
    }
}

/// A finding phrase extracted by the LLM or the rule labeler.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingMention {
    pub phrase: String,
    pub status: ExtendedStatus,
    /// Byte offsets into the section text the phrase came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<(usize, usize)>,
}

impl FindingMention {
    pub fn positive(phrase: impl Into<String>) -> Self {
        FindingMention { phrase: phrase.into(), status: ExtendedStatus::Positive, source_span: None }
    }

    pub fn with_status(phrase: impl Into<String>, status: ExtendedStatus) -> Self {
        FindingMention { phrase: phrase.into(), status, source_span: None }
    }
}

fn categories_for_tokens(tokens: &[Token], lexicon: &MappingLexicon) -> BTreeSet<Category> {
    lexicon
        .categories
        .iter()
        .filter(|(_, r)| r.include.iter().any(|p| p.matches_any(tokens)) && !r.exclude.iter().any(|p| p.matches_any(tokens)))
        .map(|(c, _)| *c)
        .collect()
}

/// Categories a finding phrase maps to; unknown phrases map to nothing.
pub fn map_phrase(phrase: &str, lexicon: &MappingLexicon) -> BTreeSet<Category> {
    categories_for_tokens(&tokenize(phrase), lexicon)
}

/// Positive iff some positive or uncertain mention maps to the category.
pub fn map_mentions(
    study_id: &str,
    section: SectionChoice,
    mentions: &[FindingMention],
    lexicon: &MappingLexicon,
) -> LabelVector {
    let positives = mentions
        .iter()
        .filter(|m| matches!(m.status, ExtendedStatus::Positive | ExtendedStatus::Uncertain))
        .flat_map(|m| map_phrase(&m.phrase, lexicon));
    LabelVector::from_positive_set(study_id, section, positives)
}

/// A lexicon match inside section text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch {
    pub category: Category,
    pub status: ExtendedStatus,
    /// Byte span in the section text.
    pub span: (usize, usize),
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

fn sentence_matches(text: &str, base: usize, lexicon: &MappingLexicon, out: &mut Vec<RuleMatch>) {
    let mut tokens = tokenize(text);
    for t in &mut tokens {
        t.start += base;
        t.end += base;
    }
    if tokens.is_empty() {
        return;
    }

    let pseudo: Vec<(usize, usize)> = lexicon.pseudo_negation.iter().flat_map(|p| p.find_all(&tokens)).collect();
    let negations: Vec<(usize, usize)> = lexicon
        .negation
        .iter()
        .flat_map(|p| p.find_all(&tokens))
        .filter(|&n| !pseudo.iter().any(|&q| overlaps(n, q)))
        .collect();
    let terminators: Vec<(usize, usize)> = lexicon.termination.iter().flat_map(|p| p.find_all(&tokens)).collect();
    let uncertain = lexicon.uncertainty.iter().any(|p| p.matches_any(&tokens));

    for (&category, rules) in &lexicon.categories {
        if rules.exclude.iter().any(|p| p.matches_any(&tokens)) {
            continue;
        }
        let mut spans: Vec<(usize, usize)> = rules.include.iter().flat_map(|p| p.find_all(&tokens)).collect();
        // longest match first at each start; drop matches nested in a kept one
        spans.sort_by_key(|&(s, e)| (s, std::cmp::Reverse(e)));
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for s in spans {
            if !kept.iter().any(|&k| overlaps(k, s)) {
                kept.push(s);
            }
        }
        for (s, e) in kept {
            let negated = negations.iter().any(|&(ns, ne)| {
                ne <= s && !overlaps((ns, ne), (s, e)) && !terminators.iter().any(|&(ts, te)| ts >= ne && te <= s)
            });
            let status = if negated {
                ExtendedStatus::Negative
            } else if uncertain {
                ExtendedStatus::Uncertain
            } else {
                ExtendedStatus::Positive
            };
            out.push(RuleMatch { category, status, span: (tokens[s].start, tokens[e - 1].end) });
        }
    }
}

/// Every lexicon match in the text with its negation/uncertainty status,
/// in text order.
pub fn rule_matches(section_text: &str, lexicon: &MappingLexicon) -> Vec<RuleMatch> {
    let mut out = Vec::new();
    for (s, e) in split_sentences(section_text) {
        sentence_matches(&section_text[s..e], s, lexicon, &mut out);
    }
    out.sort_by_key(|m| (m.span, m.category));
    out
}

/// Matches as finding mentions; a span shared by several categories
/// yields one mention.
pub fn rule_mentions(section_text: &str, lexicon: &MappingLexicon) -> Vec<FindingMention> {
    let mut out: Vec<FindingMention> = Vec::new();
    for m in rule_matches(section_text, lexicon) {
        if out.last().is_some_and(|l| l.source_span == Some(m.span) && l.status == m.status) {
            continue;
        }
        out.push(FindingMention {
            phrase: section_text[m.span.0..m.span.1].to_string(),
            status: m.status,
            source_span: Some(m.span),
        });
    }
    out
}

/// Binary labels for one section: positive and uncertain matches count.
pub fn rule_label(study_id: &str, section: SectionChoice, section_text: &str, lexicon: &MappingLexicon) -> LabelVector {
    let mut labels = [PresenceLabel::NotPositive; NUM_CATEGORIES];
    for m in rule_matches(section_text, lexicon) {
        if matches!(m.status, ExtendedStatus::Positive | ExtendedStatus::Uncertain) {
            labels[m.category.index()] = PresenceLabel::Positive;
        }
    }
    LabelVector::binary(study_id, section, labels)
}

/// Four-status labels: the strongest status among a category's matches.
pub fn rule_statuses(section_text: &str, lexicon: &MappingLexicon) -> [ExtendedStatus; NUM_CATEGORIES] {
    let mut out = [ExtendedStatus::NotMentioned; NUM_CATEGORIES];
    for m in rule_matches(section_text, lexicon) {
        let slot = &mut out[m.category.index()];
        *slot = slot.strongest(m.status);
    }
    out
}
