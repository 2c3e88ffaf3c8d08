//! Precision/recall/F1, label distributions and status cross-tabulation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::SectionChoice;
use crate::taxonomy::{
    merge_uncertain, no_abnormality, Category, CategorySubset, ExtendedStatus, LabelVector, Scheme, TaxonomyError,
    UncertainPolicy,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("study ids differ: {} missing from predictions {:?}, {} extra in predictions {:?}", missing.len(), missing, extra.len(), extra)]
    StudyMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error(transparent)]
    Scheme(#[from] TaxonomyError),
    #[error("no counts for category {0}")]
    MissingCategory(Category),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_, self.tn + o.tn)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// P = 1 when nothing is predicted positive, R = 1 when nothing is
/// gold-positive, F1 = 1 when there are no positives on either side and
/// 0 when P + R = 0.
pub fn prf(c: &ConfusionCounts) -> Prf {
    let precision = if c.tp + c.fp == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let recall = if c.tp + c.fn_ == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f1 = if c.tp + c.fp + c.fn_ == 0 {
        1.0
    } else if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    Micro,
    Macro,
}

/// Unweighted mean of per-category values over the subset.
pub fn macro_mean(values: &BTreeMap<Category, f64>, subset: CategorySubset) -> Result<f64, EvalError> {
    let cats = subset.categories();
    let mut sum = 0.0;
    for c in &cats {
        sum += values.get(c).ok_or(EvalError::MissingCategory(*c))?;
    }
    Ok(sum / cats.len() as f64)
}

pub fn aggregate(
    counts: &BTreeMap<Category, ConfusionCounts>,
    subset: CategorySubset,
    kind: AggregateKind,
) -> Result<Prf, EvalError> {
    let cats = subset.categories();
    let mut per = Vec::with_capacity(cats.len());
    for c in &cats {
        per.push(*counts.get(c).ok_or(EvalError::MissingCategory(*c))?);
    }
    Ok(match kind {
        AggregateKind::Micro => prf(&per.iter().fold(ConfusionCounts::default(), |a, &b| a + b)),
        AggregateKind::Macro => {
            let scores: Vec<Prf> = per.iter().map(prf).collect();
            let mean = |f: fn(&Prf) -> f64| {
                let m: BTreeMap<Category, f64> = cats.iter().zip(&scores).map(|(c, s)| (*c, f(s))).collect();
                macro_mean(&m, subset).expect("all categories present")
            };
            Prf { precision: mean(|s| s.precision), recall: mean(|s| s.recall), f1: mean(|s| s.f1) }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: Category,
    pub counts: ConfusionCounts,
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub section: SectionChoice,
    pub subset: CategorySubset,
    pub policy: UncertainPolicy,
    pub n_studies: usize,
    pub per_category: Vec<CategoryMetrics>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
}

impl MetricsReport {
    pub fn counts(&self) -> BTreeMap<Category, ConfusionCounts> {
        self.per_category.iter().map(|m| (m.category, m.counts)).collect()
    }

    pub fn category(&self, c: Category) -> Option<&CategoryMetrics> {
        self.per_category.iter().find(|m| m.category == c)
    }
}

fn section_rows(labels: &[LabelVector], section: SectionChoice) -> Vec<&LabelVector> {
    labels.iter().filter(|l| l.section == section).collect()
}

fn join<'a>(
    a: &[&'a LabelVector],
    b: &[&'a LabelVector],
) -> Result<Vec<(&'a LabelVector, &'a LabelVector)>, EvalError> {
    let bmap: HashMap<&str, &LabelVector> = b.iter().map(|l| (l.study_id.as_str(), *l)).collect();
    let aset: BTreeSet<&str> = a.iter().map(|l| l.study_id.as_str()).collect();
    let bset: BTreeSet<&str> = bmap.keys().copied().collect();
    if aset != bset {
        return Err(EvalError::StudyMismatch {
            missing: bset.difference(&aset).map(|s| s.to_string()).collect(),
            extra: aset.difference(&bset).map(|s| s.to_string()).collect(),
        });
    }
    Ok(a.iter().map(|l| (*l, bmap[l.study_id.as_str()])).collect())
}

fn presence(v: &LabelVector, policy: UncertainPolicy) -> Result<Vec<bool>, TaxonomyError> {
    let merged;
    let v = if v.scheme() == Scheme::FourStatus {
        merged = merge_uncertain(v, policy)?;
        &merged
    } else {
        v
    };
    Ok(v.binary_labels()?.iter().map(|p| p.is_positive()).collect())
}

/// Scores predictions against gold for one section. Four-status
/// predictions are collapsed with `policy`; gold must be binary.
pub fn evaluate(
    pred: &[LabelVector],
    gold: &[LabelVector],
    section: SectionChoice,
    subset: CategorySubset,
    policy: UncertainPolicy,
) -> Result<MetricsReport, EvalError> {
    let p = section_rows(pred, section);
    let g = section_rows(gold, section);
    if let Some(bad) = g.iter().find(|l| l.scheme() != Scheme::Binary) {
        return Err(TaxonomyError::SchemeMismatch { expected: Scheme::Binary, found: bad.scheme() }.into());
    }
    let pairs = join(&p, &g)?;
    let mut counts: BTreeMap<Category, ConfusionCounts> =
        subset.categories().into_iter().map(|c| (c, ConfusionCounts::default())).collect();
    for (pv, gv) in &pairs {
        let pp = presence(pv, policy)?;
        let gp = presence(gv, policy)?;
        for (c, cc) in counts.iter_mut() {
            cc.record(pp[c.index()], gp[c.index()]);
        }
    }
    let per_category =
        counts.iter().map(|(&category, &counts)| CategoryMetrics { category, counts, scores: prf(&counts) }).collect();
    Ok(MetricsReport {
        section,
        subset,
        policy,
        n_studies: pairs.len(),
        per_category,
        micro: aggregate(&counts, subset, AggregateKind::Micro)?,
        macro_: aggregate(&counts, subset, AggregateKind::Macro)?,
    })
}

/// Round half-up to `decimals` places. A small epsilon absorbs binary
/// representation error (`0.125` stored as `0.12499999…`).
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    (scaled + 0.5 + 1e-9 * scaled.abs().max(1.0)).floor() / scale
}

pub fn format_fixed(x: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_up(x, decimals))
}

/// Percentages with two decimals, as in a report card.
pub fn pct2(x: f64) -> String {
    format_fixed(x * 100.0, 2)
}

pub fn render_metrics_text(r: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "section: {}  subset: {}  policy: {}  studies: {}",
        r.section, r.subset, r.policy, r.n_studies
    )
    .unwrap();
    let width = r.per_category.iter().map(|m| m.category.display_name().len()).max().unwrap_or(8).max(24);
    writeln!(out, "{:<width$} {:>9} {:>9} {:>9}", "category", "P", "R", "F1").unwrap();
    for m in &r.per_category {
        writeln!(
            out,
            "{:<width$} {:>9} {:>9} {:>9}",
            m.category.display_name(),
            pct2(m.scores.precision),
            pct2(m.scores.recall),
            pct2(m.scores.f1)
        )
        .unwrap();
    }
    for (name, s) in [(format!("micro-average ({})", r.subset), r.micro), (format!("macro-average ({})", r.subset), r.macro_)] {
        writeln!(out, "{:<width$} {:>9} {:>9} {:>9}", name, pct2(s.precision), pct2(s.recall), pct2(s.f1)).unwrap();
    }
    out
}

/// One JSON object per line: categories, then micro and macro rows.
/// Scores are raw fractions in [0, 1].
pub fn render_metrics_jsonl(r: &MetricsReport) -> String {
    let mut out = String::new();
    for m in &r.per_category {
        let rec = json!({
            "section": r.section, "category": m.category.key(),
            "P": m.scores.precision, "R": m.scores.recall, "F1": m.scores.f1,
        });
        writeln!(out, "{rec}").unwrap();
    }
    for (kind, s) in [("micro", r.micro), ("macro", r.macro_)] {
        let rec = json!({
            "section": r.section, "kind": kind, "subset": r.subset.size(),
            "P": s.precision, "R": s.recall, "F1": s.f1,
        });
        writeln!(out, "{rec}").unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDistribution {
    pub section: SectionChoice,
    pub n_studies: usize,
    pub counts: Vec<(Category, usize)>,
    pub no_abnormality: usize,
}

impl SectionDistribution {
    /// `count / n * 100`, or `None` for an empty section.
    pub fn percent(&self, count: usize) -> Option<f64> {
        (self.n_studies > 0).then(|| count as f64 / self.n_studies as f64 * 100.0)
    }

    pub fn count(&self, c: Category) -> usize {
        self.counts.iter().find(|(k, _)| *k == c).map(|x| x.1).unwrap_or(0)
    }
}

/// Positive counts per category and the all-negative count, for both
/// sections. Four-status input is rejected.
pub fn distribution(labels: &[LabelVector]) -> Result<Vec<SectionDistribution>, EvalError> {
    let mut out = Vec::new();
    for section in SectionChoice::BOTH {
        let rows = section_rows(labels, section);
        let mut counts: Vec<(Category, usize)> = Category::ALL.iter().map(|&c| (c, 0)).collect();
        let mut none = 0;
        for v in &rows {
            let l = v.binary_labels()?;
            for (slot, p) in counts.iter_mut().zip(l.iter()) {
                slot.1 += p.is_positive() as usize;
            }
            none += no_abnormality(v)? as usize;
        }
        out.push(SectionDistribution { section, n_studies: rows.len(), counts, no_abnormality: none });
    }
    Ok(out)
}

fn count_cell(d: &SectionDistribution, count: usize) -> String {
    match d.percent(count) {
        Some(p) => format!("{count} ({}%)", format_fixed(p, 1)),
        None => format!("{count}"),
    }
}

pub fn render_distribution_text(dists: &[SectionDistribution]) -> String {
    let mut out = String::new();
    write!(out, "{:<30}", "category").unwrap();
    for d in dists {
        write!(out, " {:>16}", format!("{} (n={})", d.section, d.n_studies)).unwrap();
    }
    out.push('\n');
    for c in Category::ALL {
        write!(out, "{:<30}", c.display_name()).unwrap();
        for d in dists {
            write!(out, " {:>16}", count_cell(d, d.count(c))).unwrap();
        }
        out.push('\n');
    }
    write!(out, "{:<30}", "No Abnormality").unwrap();
    for d in dists {
        write!(out, " {:>16}", count_cell(d, d.no_abnormality)).unwrap();
    }
    out.push('\n');
    out
}

pub fn render_distribution_jsonl(dists: &[SectionDistribution]) -> String {
    let mut out = String::new();
    for d in dists {
        let rows = d.counts.iter().map(|(c, n)| (c.key(), *n)).chain([("no_abnormality", d.no_abnormality)]);
        for (name, n) in rows {
            let rec = json!({
                "section": d.section, "category": name, "count": n,
                "n_studies": d.n_studies, "percent": d.percent(n),
            });
            writeln!(out, "{rec}").unwrap();
        }
    }
    out
}

/// Status-by-status counts over (study, category) pairs. Rows are the
/// first file's status, columns the second's, both in
/// [`ExtendedStatus::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTab {
    pub section: SectionChoice,
    pub n_studies: usize,
    pub counts: [[u64; 4]; 4],
}

impl CrossTab {
    /// `cell / row sum * 100`; `None` for empty rows.
    pub fn row_percentages(&self) -> [[Option<f64>; 4]; 4] {
        let mut out = [[None; 4]; 4];
        for (i, row) in self.counts.iter().enumerate() {
            let sum: u64 = row.iter().sum();
            if sum > 0 {
                for j in 0..4 {
                    out[i][j] = Some(row[j] as f64 / sum as f64 * 100.0);
                }
            }
        }
        out
    }
}

/// One table per section that has rows in either file.
pub fn cross_tab(a: &[LabelVector], b: &[LabelVector], subset: CategorySubset) -> Result<Vec<CrossTab>, EvalError> {
    for v in a.iter().chain(b) {
        v.status_labels()?;
    }
    let cats = subset.categories();
    let mut out = Vec::new();
    for section in SectionChoice::BOTH {
        let ra = section_rows(a, section);
        let rb = section_rows(b, section);
        if ra.is_empty() && rb.is_empty() {
            continue;
        }
        let pairs = join(&ra, &rb)?;
        let mut counts = [[0u64; 4]; 4];
        for (x, y) in &pairs {
            let (sx, sy) = (x.status_labels()?, y.status_labels()?);
            for c in &cats {
                counts[sx[c.index()].index()][sy[c.index()].index()] += 1;
            }
        }
        out.push(CrossTab { section, n_studies: pairs.len(), counts });
    }
    Ok(out)
}

fn status_name(s: ExtendedStatus) -> &'static str {
    match s {
        ExtendedStatus::Positive => "positive",
        ExtendedStatus::Negative => "negative",
        ExtendedStatus::Uncertain => "uncertain",
        ExtendedStatus::NotMentioned => "not mentioned",
    }
}

pub fn render_cross_tab_text(tabs: &[CrossTab], row_name: &str, col_name: &str) -> String {
    let mut out = String::new();
    for t in tabs {
        writeln!(out, "section: {}  studies: {}  rows: {row_name}  columns: {col_name}", t.section, t.n_studies).unwrap();
        write!(out, "{:<14}", "").unwrap();
        for s in ExtendedStatus::ALL {
            write!(out, " {:>20}", status_name(s)).unwrap();
        }
        out.push('\n');
        let pct = t.row_percentages();
        for (i, s) in ExtendedStatus::ALL.iter().enumerate() {
            write!(out, "{:<14}", status_name(*s)).unwrap();
            for j in 0..4 {
                let cell = match pct[i][j] {
                    Some(p) => format!("{} ({}%)", t.counts[i][j], format_fixed(p, 2)),
                    None => t.counts[i][j].to_string(),
                };
                write!(out, " {:>20}", cell).unwrap();
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn render_cross_tab_jsonl(tabs: &[CrossTab]) -> String {
    let mut out = String::new();
    for t in tabs {
        let pct = t.row_percentages();
        for (i, a) in ExtendedStatus::ALL.iter().enumerate() {
            for (j, b) in ExtendedStatus::ALL.iter().enumerate() {
                let rec = json!({
                    "section": t.section, "row": a.code(), "column": b.code(),
                    "count": t.counts[i][j], "row_percent": pct[i][j],
                });
                writeln!(out, "{rec}").unwrap();
            }
        }
    }
    out
}
