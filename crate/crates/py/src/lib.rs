use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use cxrlabel::corpus::{self, CorpusRecord, SectionChoice};
use cxrlabel::distill::{self, EncodedExample, Encoder, HashedNgramEncoder, TrainConfig, TrainedModel};
use cxrlabel::evalkit;
use cxrlabel::llm::{self, LabelMode, Labeler, LabelerOptions, NoSleep, PromptTemplate, StubProvider};
use cxrlabel::mapper::{self, MappingLexicon};
use cxrlabel::synth::{self, SynthConfig};
use cxrlabel::taxonomy::{Category, CategorySubset, LabelVector, PresenceLabel, UncertainPolicy, NUM_CATEGORIES};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_category(name: &str) -> PyResult<Category> {
    name.parse().map_err(value_err)
}

fn parse_mode(mode: &str) -> PyResult<LabelMode> {
    mode.parse().map_err(value_err)
}

fn parse_subset(subset: &str) -> PyResult<CategorySubset> {
    subset.parse().map_err(value_err)
}

fn keys(cats: impl IntoIterator<Item = Category>) -> Vec<&'static str> {
    cats.into_iter().map(Category::key).collect()
}

/// A row of positive category names as a findings-section binary vector.
fn binary_row(i: usize, positives: &[String]) -> PyResult<LabelVector> {
    let set: BTreeSet<Category> = positives.iter().map(|p| parse_category(p)).collect::<PyResult<_>>()?;
    let labels = Category::ALL.map(|c| PresenceLabel::from_bool(set.contains(&c)));
    Ok(LabelVector::binary(format!("r{i}"), SectionChoice::Findings, labels))
}

fn binary_rows(rows: &[Vec<String>]) -> PyResult<Vec<LabelVector>> {
    rows.iter().enumerate().map(|(i, r)| binary_row(i, r)).collect()
}

/// Category keys in canonical order.
#[pyfunction]
fn categories() -> Vec<&'static str> {
    keys(Category::ALL)
}

#[pyfunction]
fn normalize_text(raw: &str) -> String {
    corpus::normalize_text(raw)
}

/// `(findings, impression)` of a raw report.
#[pyfunction]
fn split_sections(raw: &str) -> PyResult<(Option<String>, Option<String>)> {
    let r = corpus::split_sections("py", raw).map_err(value_err)?;
    Ok((r.findings, r.impression))
}

/// `(section, text)` of the longer non-empty section.
#[pyfunction]
fn select_section(raw: &str) -> PyResult<(&'static str, String)> {
    let r = corpus::split_sections("py", raw).map_err(value_err)?;
    let (s, text) = corpus::select_longer_segment(&r).map_err(value_err)?;
    Ok((s.as_str(), text.to_string()))
}

/// `(study_id, raw_text)` pairs from the synthetic report generator.
#[pyfunction]
#[pyo3(signature = (n, seed = 7))]
fn synth_reports(n: usize, seed: u64) -> Vec<(String, String)> {
    synth::generate(&SynthConfig { n_reports: n, seed, ..Default::default() })
        .into_iter()
        .map(|r| (r.study_id, r.raw))
        .collect()
}

#[pyclass(name = "Lexicon")]
struct PyLexicon {
    inner: MappingLexicon,
}

#[pymethods]
impl PyLexicon {
    #[staticmethod]
    fn default() -> Self {
        PyLexicon { inner: MappingLexicon::default_lexicon() }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        MappingLexicon::load(&path).map(|inner| PyLexicon { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn from_toml(src: &str) -> PyResult<Self> {
        MappingLexicon::from_toml_str(src).map(|inner| PyLexicon { inner }).map_err(value_err)
    }

    /// Categories a finding phrase maps to.
    fn map_phrase(&self, phrase: &str) -> Vec<&'static str> {
        keys(mapper::map_phrase(phrase, &self.inner))
    }

    /// Positive categories from the rule labeler.
    fn rule_label(&self, text: &str) -> PyResult<Vec<&'static str>> {
        let text = corpus::normalize_text(text);
        mapper::rule_label("py", SectionChoice::Findings, &text, &self.inner).positives().map(keys).map_err(value_err)
    }

    /// Status code (`pos`, `neg`, `unc`, `nm`) per category.
    fn rule_statuses(&self, text: &str) -> BTreeMap<&'static str, &'static str> {
        let text = corpus::normalize_text(text);
        let s = mapper::rule_statuses(&text, &self.inner);
        Category::ALL.iter().map(|c| (c.key(), s[c.index()].code())).collect()
    }

    fn to_toml(&self) -> String {
        self.inner.render()
    }
}

/// The prompt sent for one report with the bundled template for `mode`.
#[pyfunction]
#[pyo3(signature = (report_text, mode = "extract"))]
fn build_prompt(report_text: &str, mode: &str) -> PyResult<String> {
    llm::build_prompt(&PromptTemplate::starter(parse_mode(mode)?), report_text).map_err(value_err)
}

/// Labels one report through the prompt, stub provider, parser and
/// mapper. Returns the label file cell per category: `1`/`0` in binary
/// modes, `pos`/`neg`/`unc`/`nm` in four-status mode.
#[pyfunction]
#[pyo3(signature = (report_text, mode = "extract", lexicon = None))]
fn stub_label(report_text: &str, mode: &str, lexicon: Option<PyRef<'_, PyLexicon>>) -> PyResult<BTreeMap<&'static str, &'static str>> {
    let mode = parse_mode(mode)?;
    let lexicon = lexicon.map(|l| l.inner.clone()).unwrap_or_else(MappingLexicon::default_lexicon);
    let report = corpus::from_sections("py", Some(report_text), None).map_err(value_err)?;
    let record = CorpusRecord::from_report(&report).map_err(value_err)?;
    let template = PromptTemplate::starter(mode);
    let client = StubProvider::new(mode, lexicon.clone());
    let labeler = Labeler {
        template: &template,
        lexicon: &lexicon,
        client: &client,
        cache: None,
        sleeper: &NoSleep,
        options: LabelerOptions::default(),
    };
    let out = labeler.batch_label(std::slice::from_ref(&record), None);
    if let Some(q) = out.quarantine.first() {
        return Err(value_err(format!("{}: {}", q.error_kind, q.message)));
    }
    let v = &out.labels[0];
    let codes: [&'static str; NUM_CATEGORIES] = match v.status_labels() {
        Ok(s) => s.map(|x| x.code()),
        Err(_) => v.binary_labels().map_err(value_err)?.map(|p| if p.is_positive() { "1" } else { "0" }),
    };
    Ok(Category::ALL.iter().map(|c| (c.key(), codes[c.index()])).collect())
}

#[pyclass(name = "Model")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    /// Trains on texts and their positive category lists. The halving
    /// interval keeps the default fraction of the run.
    #[staticmethod]
    #[pyo3(signature = (texts, labels, steps = 2000, learning_rate = 5e-5, batch_size = 32, feature_dim = 1 << 18, seed = 42))]
    fn train(
        texts: Vec<String>,
        labels: Vec<Vec<String>>,
        steps: usize,
        learning_rate: f64,
        batch_size: usize,
        feature_dim: usize,
        seed: u64,
    ) -> PyResult<Self> {
        if texts.len() != labels.len() {
            return Err(value_err(format!("{} texts but {} label rows", texts.len(), labels.len())));
        }
        let config = TrainConfig { learning_rate, batch_size, seed, ..TrainConfig::default().scaled_to(steps) };
        let encoder = HashedNgramEncoder { feature_dim, max_tokens: config.max_tokens, ..Default::default() };
        let examples: Vec<EncodedExample> = texts
            .iter()
            .zip(&labels)
            .enumerate()
            .map(|(i, (t, l))| {
                Ok(EncodedExample {
                    features: encoder.encode(&corpus::normalize_text(t)),
                    targets: binary_row(i, l)?.targets().map_err(value_err)?,
                })
            })
            .collect::<PyResult<_>>()?;
        let (inner, _) = distill::train(&examples, &config, &encoder).map_err(value_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        TrainedModel::load(&path).map(|inner| PyModel { inner }).map_err(value_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(value_err)
    }

    fn probabilities(&self, text: &str) -> BTreeMap<&'static str, f64> {
        let p = self.inner.probabilities(&corpus::normalize_text(text));
        Category::ALL.iter().map(|c| (c.key(), p[c.index()])).collect()
    }

    #[pyo3(signature = (text, threshold = 0.5))]
    fn predict(&self, text: &str, threshold: f64) -> Vec<&'static str> {
        let p = self.inner.probabilities(&corpus::normalize_text(text));
        keys(Category::ALL.into_iter().filter(|c| p[c.index()] >= threshold))
    }

    #[getter]
    fn manifest_hash(&self) -> String {
        self.inner.manifest_hash.clone()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.encoder.feature_dim
    }
}

/// Precision, recall and F1 per category plus `micro` and `macro`, from
/// rows of positive category names. `subset` is "13" or "10".
#[pyfunction]
#[pyo3(signature = (pred, gold, subset = "13"))]
fn evaluate(
    pred: Vec<Vec<String>>,
    gold: Vec<Vec<String>>,
    subset: &str,
) -> PyResult<BTreeMap<String, BTreeMap<&'static str, f64>>> {
    let r = evalkit::evaluate(
        &binary_rows(&pred)?,
        &binary_rows(&gold)?,
        SectionChoice::Findings,
        parse_subset(subset)?,
        UncertainPolicy::MergeUncertainAsPositive,
    )
    .map_err(value_err)?;
    let prf = |s: evalkit::Prf| BTreeMap::from([("precision", s.precision), ("recall", s.recall), ("f1", s.f1)]);
    let mut out: BTreeMap<String, BTreeMap<&'static str, f64>> =
        r.per_category.iter().map(|m| (m.category.key().to_string(), prf(m.scores))).collect();
    out.insert("micro".into(), prf(r.micro));
    out.insert("macro".into(), prf(r.macro_));
    Ok(out)
}

/// Unweighted mean of per-category values over a subset.
#[pyfunction]
#[pyo3(signature = (values, subset = "13"))]
fn macro_mean(values: BTreeMap<String, f64>, subset: &str) -> PyResult<f64> {
    let m: BTreeMap<Category, f64> =
        values.iter().map(|(k, v)| Ok((parse_category(k)?, *v))).collect::<PyResult<_>>()?;
    evalkit::macro_mean(&m, parse_subset(subset)?).map_err(value_err)
}

/// Positive count per category plus `no_abnormality`.
#[pyfunction]
fn distribution(rows: Vec<Vec<String>>) -> PyResult<BTreeMap<&'static str, usize>> {
    let d = evalkit::distribution(&binary_rows(&rows)?).map_err(value_err)?;
    let Some(f) = d.first() else { return Ok(BTreeMap::new()) };
    let mut out: BTreeMap<&'static str, usize> = Category::ALL.iter().map(|c| (c.key(), f.count(*c))).collect();
    out.insert("no_abnormality", f.no_abnormality);
    Ok(out)
}

#[pymodule]
fn cxrlabel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLexicon>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(categories, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_text, m)?)?;
    m.add_function(wrap_pyfunction!(split_sections, m)?)?;
    m.add_function(wrap_pyfunction!(select_section, m)?)?;
    m.add_function(wrap_pyfunction!(synth_reports, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(stub_label, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(macro_mean, m)?)?;
    m.add_function(wrap_pyfunction!(distribution, m)?)?;
    Ok(())
}
