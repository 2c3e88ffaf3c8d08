//! The `cxrlabel` command line: one verb per pipeline stage, each run
//! appending a manifest line to the run directory.

mod config;
mod manifest;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{read_corpus, read_reports, write_corpus, CorpusRecord, SectionChoice};
use crate::distill::{build_examples, learning_curve, predict_vector, train, Encoder, TrainedModel};
use crate::evalkit::{
    cross_tab, distribution, evaluate, render_cross_tab_jsonl, render_cross_tab_text, render_distribution_jsonl,
    render_distribution_text, render_metrics_jsonl, render_metrics_text,
};
use crate::labelfile::{read_chexpert, read_labels_path, write_labels};
use crate::llm::{ChatClient, HttpChatClient, Labeler, LabelerOptions, PromptTemplate, ResponseCache, StubProvider};
use crate::llm::{LabelMode, ThreadSleeper};
use crate::mapper::{rule_label, rule_statuses, MappingLexicon};
use crate::taxonomy::LabelVector;

pub use config::{
    ClientConfig, ConfigOverrides, CurveConfig, EncoderConfig, EvalConfig, EvalSections, LabelingConfig,
    PathsConfig, PipelineConfig, Provider, SectionSelector, SynthSection, UsizeList,
};
pub use manifest::{file_sha256, read_manifests, FileDigest, RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "cxrlabel", version, about = "Label chest X-ray reports, distill the labels and score them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum LabelFormat {
    /// Our label CSV (binary or four-status)
    #[default]
    Labels,
    /// CheXpert-style CSV with 1/0/-1/blank cells
    Chexpert,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted labels
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelFormat::Labels)]
    pub pred_format: LabelFormat,
    /// Metrics as JSON lines (the report card always goes to stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct CrosstabArgs {
    /// Label file for the table rows
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelFormat::Labels)]
    pub a_format: LabelFormat,
    /// Label file for the table columns
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelFormat::Labels)]
    pub b_format: LabelFormat,
    /// Tables as JSON lines (the text tables always go to stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigOverrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize raw reports (JSON lines) into a corpus file
    Ingest(OutArgs),
    /// Write seeded synthetic reports in the ingest input format
    Synth(OutArgs),
    /// Label corpus sections with a chat-completion model
    GptLabel(OutArgs),
    /// Label corpus sections with the lexicon rules alone
    RuleLabel(OutArgs),
    /// Train a classifier on pseudo-labels
    Train(OutArgs),
    /// Label corpus sections with a trained model
    Infer(OutArgs),
    /// Score predictions against gold labels
    Eval(EvalArgs),
    /// Per-category label counts per section
    Distrib(OutArgs),
    /// Four-status agreement tables between two label files
    Crosstab(CrosstabArgs),
    /// Train on growing subsets and score each on the gold set
    Curve(OutArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth(_) => "synth",
            Command::GptLabel(_) => "gpt-label",
            Command::RuleLabel(_) => "rule-label",
            Command::Train(_) => "train",
            Command::Infer(_) => "infer",
            Command::Eval(_) => "eval",
            Command::Distrib(_) => "distrib",
            Command::Crosstab(_) => "crosstab",
            Command::Curve(_) => "curve",
        }
    }

    fn overrides(&self) -> &ConfigOverrides {
        match self {
            Command::Ingest(a)
            | Command::Synth(a)
            | Command::GptLabel(a)
            | Command::RuleLabel(a)
            | Command::Train(a)
            | Command::Infer(a)
            | Command::Distrib(a)
            | Command::Curve(a) => &a.cfg,
            Command::Eval(a) => &a.cfg,
            Command::Crosstab(a) => &a.cfg,
        }
    }
}

type CmdResult = Result<(), String>;

/// Runs a parsed command, writes human-readable output to `stdout` and
/// returns the manifest it appended. `Err` when the configuration cannot
/// be resolved or the manifest cannot be written.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<RunManifest, String> {
    let cfg = cli.command.overrides().resolve()?;
    let mut m = RunManifest::new(cli.command.name(), &cfg);
    if let Some(p) = &cli.command.overrides().config {
        m.input(p);
    }
    let res = match &cli.command {
        Command::Ingest(a) => ingest(a, &cfg, &mut m),
        Command::Synth(a) => synth(a, &cfg, &mut m),
        Command::GptLabel(a) => gpt_label(a, &cfg, &mut m),
        Command::RuleLabel(a) => rule_label_cmd(a, &cfg, &mut m),
        Command::Train(a) => train_cmd(a, &cfg, &mut m),
        Command::Infer(a) => infer(a, &cfg, &mut m),
        Command::Eval(a) => eval(a, &cfg, &mut m, stdout),
        Command::Distrib(a) => distrib(a, &cfg, &mut m, stdout),
        Command::Crosstab(a) => crosstab(a, &cfg, &mut m, stdout),
        Command::Curve(a) => curve(a, &cfg, &mut m, stdout),
    };
    if let Err(e) = res {
        m.error(e);
    }
    m.append_to(&cfg.paths.run_dir).map_err(|e| format!("writing manifest: {e}"))?;
    Ok(m)
}

/// Entry point for the binary. Exit code 0 iff the run recorded no errors.
pub fn run(cli: Cli) -> ExitCode {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            for e in &m.errors {
                eprintln!("error: {e}");
            }
            if m.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn need<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, String> {
    p.as_deref().ok_or_else(|| format!("missing --{} (or `{}` in the config file)", key.replace('_', "-"), key))
}

fn out_path<'a>(out: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>, fallback_key: &str) -> Result<&'a Path, String> {
    match out {
        Some(p) => Ok(p),
        None => need(fallback, fallback_key).map_err(|_| format!("missing --out (or `{fallback_key}` in the config file)")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> CmdResult {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).map_err(|e| e.to_string())?);
        s.push('\n');
    }
    write_text(path, &s)
}

fn load_corpus(path: &Path, m: &mut RunManifest) -> Result<Vec<CorpusRecord>, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    m.input(path);
    read_corpus(BufReader::new(f)).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_labels(path: &Path, format: LabelFormat, section: SectionChoice, m: &mut RunManifest) -> Result<Vec<LabelVector>, String> {
    m.input(path);
    let res = match format {
        LabelFormat::Labels => read_labels_path(path),
        LabelFormat::Chexpert => {
            File::open(path).map_err(Into::into).and_then(|f| read_chexpert(BufReader::new(f), section))
        }
    };
    res.map_err(|e| format!("{}: {e}", path.display()))
}

fn load_lexicon(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<MappingLexicon, String> {
    match &cfg.paths.lexicon {
        Some(p) => {
            m.input(p);
            MappingLexicon::load(p).map_err(|e| format!("{}: {e}", p.display()))
        }
        None => Ok(MappingLexicon::default_lexicon()),
    }
}

fn ingest(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> CmdResult {
    let input = need(&cfg.paths.reports, "reports")?;
    let out = out_path(&a.out, &cfg.paths.corpus, "corpus")?;
    let f = File::open(input).map_err(|e| format!("{}: {e}", input.display()))?;
    m.input(input);
    let outcome = read_reports(BufReader::new(f)).map_err(|e| format!("{}: {e}", input.display()))?;
    let skipped = outcome.warnings.len();
    for w in outcome.warnings {
        m.warn(w);
    }
    let mut records = Vec::with_capacity(outcome.reports.len());
    for r in &outcome.reports {
        match CorpusRecord::from_report(r) {
            Ok(rec) => records.push(rec),
            Err(e) => m.warn(format!("study `{}`: {e}", r.study_id)),
        }
    }
    if records.is_empty() {
        m.warn("no reports ingested");
    }
    let mut w = create(out)?;
    write_corpus(&records, &mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    m.output(out);
    m.stat("rows", records.len());
    m.stat("skipped", skipped);
    Ok(())
}

fn synth(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> CmdResult {
    let out = out_path(&a.out, &cfg.paths.reports, "reports")?;
    let sc = cfg.synth_config();
    m.seed = Some(sc.seed);
    let reports = crate::synth::generate(&sc);
    let rows: Vec<serde_json::Value> =
        reports.iter().map(|r| serde_json::json!({ "study_id": r.study_id, "text": r.raw })).collect();
    write_jsonl(out, &rows)?;
    m.output(out);
    m.stat("reports", reports.len());
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn gpt_label(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> CmdResult {
    let corpus_path = need(&cfg.paths.corpus, "corpus")?;
    let out = out_path(&a.out, &cfg.paths.labels, "labels")?;
    let corpus = load_corpus(corpus_path, m)?;
    let lexicon = load_lexicon(cfg, m)?;
    let mode = cfg.labeling.mode;
    let template = match &cfg.paths.template {
        Some(p) => {
            m.input(p);
            let t = PromptTemplate::load(p).map_err(|e| e.to_string())?;
            if t.mode != mode {
                return Err(format!("template {} is for mode {}, but mode is {mode}", p.display(), t.mode));
            }
            t
        }
        None => PromptTemplate::starter(mode),
    };
    let client: Box<dyn ChatClient> = match cfg.client.provider {
        Provider::Stub => Box::new(StubProvider::new(mode, lexicon.clone())),
        Provider::Http => Box::new(
            HttpChatClient::from_env(&cfg.client.endpoint, Duration::from_secs(cfg.client.timeout_secs))
                .map_err(|e| e.to_string())?,
        ),
    };
    let cache = match &cfg.paths.cache_dir {
        Some(d) => Some(ResponseCache::open(d).map_err(|e| e.to_string())?),
        None => None,
    };
    let labeler = Labeler {
        template: &template,
        lexicon: &lexicon,
        client: client.as_ref(),
        cache: cache.as_ref(),
        sleeper: &ThreadSleeper,
        options: LabelerOptions {
            model: cfg.client.model.clone(),
            temperature: cfg.client.temperature,
            max_tokens: cfg.client.max_output_tokens,
            concurrency: cfg.client.concurrency,
            ..Default::default()
        },
    };
    let outcome = labeler.batch_label(&corpus, cfg.labeling.label_section.fixed());

    let mut w = create(out)?;
    write_labels(&outcome.labels, &mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    m.output(out);
    let qpath = sibling(out, ".quarantine.jsonl");
    write_jsonl(&qpath, &outcome.quarantine)?;
    m.output(&qpath);
    let ppath = sibling(out, ".provenance.jsonl");
    write_jsonl(&ppath, &outcome.provenance)?;
    m.output(&ppath);

    for q in &outcome.quarantine {
        m.warn(format!("quarantined {} ({}): {}", q.study_id, q.error_kind, q.message));
    }
    m.stat("model", &cfg.client.model);
    m.stat("mode", mode);
    m.stat("template_digest", template.digest());
    m.stat("batch", outcome.stats);
    m.stat("failure_ids", outcome.failure_ids());
    if corpus.is_empty() {
        m.warn("corpus is empty");
    } else if outcome.stats.labeled == 0 {
        return Err(format!("all {} reports failed", outcome.stats.reports));
    }
    Ok(())
}

fn rule_label_cmd(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> CmdResult {
    let corpus_path = need(&cfg.paths.corpus, "corpus")?;
    let out = out_path(&a.out, &cfg.paths.labels, "labels")?;
    let corpus = load_corpus(corpus_path, m)?;
    let lexicon = load_lexicon(cfg, m)?;
    let fixed = cfg.labeling.label_section.fixed();
    let mut labels = Vec::with_capacity(corpus.len());
    for r in &corpus {
        let section = fixed.unwrap_or(r.selected_section);
        let Some(text) = r.section(section) else {
            m.warn(format!("study `{}` has no {section} section", r.study_id));
            continue;
        };
        labels.push(match cfg.labeling.mode {
            LabelMode::FourStatus => LabelVector::four_status(&r.study_id, section, rule_statuses(text, &lexicon)),
            _ => rule_label(&r.study_id, section, text, &lexicon),
        });
    }
    let mut w = create(out)?;
    write_labels(&labels, &mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    m.output(out);
    m.stat("rows", labels.len());
    Ok(())
}

fn train_cmd(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> CmdResult {
    let corpus = load_corpus(need(&cfg.paths.corpus, "corpus")?, m)?;
    let labels_path = need(&cfg.paths.labels, "labels")?;
    let labels = load_labels(labels_path, LabelFormat::Labels, SectionChoice::Findings, m)?;
    let out = out_path(&a.out, &cfg.paths.model_file, "model_file")?;
    if let Some(p) = &cfg.train.warm_start {
        m.input(p);
    }
    m.seed = Some(cfg.train.seed);
    let encoder = cfg.encoder();
    let examples = build_examples(&labels, &corpus, &encoder as &dyn Encoder).map_err(|e| e.to_string())?;
    let (model, log) = train(&examples, &cfg.train, &encoder).map_err(|e| e.to_string())?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    }
    model.save(out).map_err(|e| format!("{}: {e}", out.display()))?;
    m.output(out);
    let log_path = sibling(out, ".log.jsonl");
    write_jsonl(&log_path, &log)?;
    m.output(&log_path);
    m.stat("examples", examples.len());
    m.stat("final_loss", log.last().map(|l| l.loss));
    m.stat("manifest_hash", &model.manifest_hash);
    Ok(())
}

fn infer(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest) -> CmdResult {
    let model_path = need(&cfg.paths.model_file, "model_file")?;
    let corpus = load_corpus(need(&cfg.paths.corpus, "corpus")?, m)?;
    let out = out_path(&a.out, &cfg.paths.labels, "labels")?;
    m.input(model_path);
    let model = TrainedModel::load(model_path).map_err(|e| format!("{}: {e}", model_path.display()))?;
    let fixed = cfg.labeling.label_section.fixed();
    let mut labels = Vec::with_capacity(corpus.len());
    for r in &corpus {
        let section = fixed.unwrap_or(r.selected_section);
        match r.section(section) {
            Some(text) => labels.push(predict_vector(&model, &r.study_id, section, text, cfg.train.threshold)),
            None => m.warn(format!("study `{}` has no {section} section", r.study_id)),
        }
    }
    let mut w = create(out)?;
    write_labels(&labels, &mut w).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    m.output(out);
    m.stat("rows", labels.len());
    Ok(())
}

fn eval(a: &EvalArgs, cfg: &PipelineConfig, m: &mut RunManifest, stdout: &mut dyn Write) -> CmdResult {
    let gold_path = need(&cfg.paths.gold, "gold")?;
    let sections = cfg.eval.eval_section.sections();
    let gold = load_labels(gold_path, LabelFormat::Labels, sections[0], m)?;
    let pred = load_labels(&a.pred, a.pred_format, sections[0], m)?;
    let present: Vec<SectionChoice> =
        sections.into_iter().filter(|s| gold.iter().any(|g| g.section == *s)).collect();
    if present.is_empty() {
        return Err("gold file has no rows for the requested section".into());
    }
    let mut text = String::new();
    let mut jsonl = String::new();
    for section in present {
        let r = evaluate(&pred, &gold, section, cfg.eval.subset, cfg.eval.policy).map_err(|e| e.to_string())?;
        text.push_str(&render_metrics_text(&r));
        text.push('\n');
        jsonl.push_str(&render_metrics_jsonl(&r));
        m.stat(&format!("{section}_macro_f1"), r.macro_.f1);
        m.stat(&format!("{section}_micro_f1"), r.micro.f1);
    }
    stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    if let Some(out) = &a.out {
        write_text(out, &jsonl)?;
        m.output(out);
    }
    Ok(())
}

fn distrib(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest, stdout: &mut dyn Write) -> CmdResult {
    let labels = load_labels(need(&cfg.paths.labels, "labels")?, LabelFormat::Labels, SectionChoice::Findings, m)?;
    let d = distribution(&labels).map_err(|e| e.to_string())?;
    stdout.write_all(render_distribution_text(&d).as_bytes()).map_err(|e| e.to_string())?;
    if let Some(out) = &a.out {
        write_text(out, &render_distribution_jsonl(&d))?;
        m.output(out);
    }
    Ok(())
}

fn crosstab(a: &CrosstabArgs, cfg: &PipelineConfig, m: &mut RunManifest, stdout: &mut dyn Write) -> CmdResult {
    let default_section = cfg.eval.eval_section.sections()[0];
    let la = load_labels(&a.a, a.a_format, default_section, m)?;
    let lb = load_labels(&a.b, a.b_format, default_section, m)?;
    let tabs = cross_tab(&la, &lb, cfg.eval.subset).map_err(|e| e.to_string())?;
    let name = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stdout
        .write_all(render_cross_tab_text(&tabs, &name(&a.a), &name(&a.b)).as_bytes())
        .map_err(|e| e.to_string())?;
    if let Some(out) = &a.out {
        write_text(out, &render_cross_tab_jsonl(&tabs))?;
        m.output(out);
    }
    Ok(())
}

fn curve(a: &OutArgs, cfg: &PipelineConfig, m: &mut RunManifest, stdout: &mut dyn Write) -> CmdResult {
    let corpus = load_corpus(need(&cfg.paths.corpus, "corpus")?, m)?;
    let labels = load_labels(need(&cfg.paths.labels, "labels")?, LabelFormat::Labels, SectionChoice::Findings, m)?;
    let gold = load_labels(need(&cfg.paths.gold, "gold")?, LabelFormat::Labels, SectionChoice::Findings, m)?;
    let gold_corpus = match &cfg.paths.gold_corpus {
        Some(p) => load_corpus(p, m)?,
        None => corpus.clone(),
    };
    m.seed = Some(cfg.train.seed);
    let points = learning_curve(
        &corpus,
        &labels,
        &cfg.curve.sizes,
        &gold_corpus,
        &gold,
        &cfg.train,
        &cfg.encoder(),
        cfg.eval.subset,
    )
    .map_err(|e| e.to_string())?;
    let mut text = String::from("section     size  macro-F1\n");
    for p in &points {
        text.push_str(&format!(
            "{:<10} {:>5}  {}\n",
            p.section.as_str(),
            p.size,
            crate::evalkit::pct2(p.macro_f1)
        ));
    }
    stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    if let Some(out) = &a.out {
        write_jsonl(out, &points)?;
        m.output(out);
    }
    m.stat("points", points.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn every_config_key_has_a_flag_on_every_subcommand() {
        let cfg = PipelineConfig::default();
        let value = serde_json::to_value(&cfg).unwrap();
        let mut keys = Vec::new();
        fn walk(v: &serde_json::Value, keys: &mut Vec<String>) {
            if let serde_json::Value::Object(map) = v {
                for (k, child) in map {
                    if child.is_object() {
                        walk(child, keys);
                    } else {
                        keys.push(k.replace('_', "-"));
                    }
                }
            }
        }
        walk(&value, &mut keys);
        assert!(keys.len() > 40, "{keys:?}");
        let mut cmd = Cli::command();
        for sub in cmd.get_subcommands_mut() {
            let help = sub.render_long_help().to_string();
            for k in &keys {
                assert!(help.contains(&format!("--{k} ")), "{} --help lacks --{k}", sub.get_name());
            }
        }
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[train]\nsteps = 77\nseed = 3\n[client]\nmodel = \"m1\"\n").unwrap();
        let cli = Cli::parse_from(["cxrlabel", "train", "--config", p.to_str().unwrap(), "--seed", "9"]);
        let cfg = cli.command.overrides().resolve().unwrap();
        assert_eq!(cfg.train.steps, 77);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.client.model, "m1");
        assert_eq!(cfg.train.batch_size, 32);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("[train]\nstepz = 1\n").is_err());
        assert!(PipelineConfig::from_toml_str("[bogus]\n").is_err());
    }

    #[test]
    fn partial_sections_keep_field_defaults() {
        assert_eq!(PipelineConfig::default().paths.run_dir, PathBuf::from("runs"));
        let c = PipelineConfig::from_toml_str("[paths]\ncorpus = \"c.jsonl\"\n").unwrap();
        assert_eq!(c.paths.run_dir, PathBuf::from("runs"));
        assert_eq!(c.paths.corpus, Some(PathBuf::from("c.jsonl")));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut c = PipelineConfig::default();
        c.paths.corpus = Some("a.jsonl".into());
        c.train.warm_start = Some("m.bin".into());
        c.curve.sizes = vec![1, 2];
        assert_eq!(PipelineConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }
}
