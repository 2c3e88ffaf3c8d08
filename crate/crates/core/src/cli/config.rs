use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::corpus::SectionChoice;
use crate::distill::{HashedNgramEncoder, TrainConfig};
use crate::llm::LabelMode;
use crate::taxonomy::{CategorySubset, UncertainPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub reports: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model_file: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub gold_corpus: Option<PathBuf>,
    pub run_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            reports: None,
            corpus: None,
            lexicon: None,
            template: None,
            cache_dir: None,
            labels: None,
            model_file: None,
            gold: None,
            gold_corpus: None,
            run_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    #[default]
    Http,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClientConfig {
    pub provider: Provider,
    pub endpoint: String,
    pub model: String,
    pub concurrency: usize,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            provider: Provider::Http,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            concurrency: 4,
            temperature: 0.0,
            max_output_tokens: crate::llm::DEFAULT_MAX_TOKENS,
            timeout_secs: 120,
        }
    }
}

/// Which section to label: a fixed one, or each record's selected
/// (longer) section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionSelector {
    #[default]
    Auto,
    Findings,
    Impression,
}

impl SectionSelector {
    pub fn fixed(self) -> Option<SectionChoice> {
        match self {
            SectionSelector::Auto => None,
            SectionSelector::Findings => Some(SectionChoice::Findings),
            SectionSelector::Impression => Some(SectionChoice::Impression),
        }
    }
}

impl std::str::FromStr for SectionSelector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "auto" => Ok(SectionSelector::Auto),
            "findings" => Ok(SectionSelector::Findings),
            "impression" => Ok(SectionSelector::Impression),
            other => Err(format!("section must be auto, findings or impression, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelingConfig {
    pub mode: LabelMode,
    pub label_section: SectionSelector,
}

/// Sections to evaluate: one, or every section present in the gold file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSections {
    #[default]
    Both,
    Findings,
    Impression,
}

impl EvalSections {
    pub fn sections(self) -> Vec<SectionChoice> {
        match self {
            EvalSections::Both => SectionChoice::BOTH.to_vec(),
            EvalSections::Findings => vec![SectionChoice::Findings],
            EvalSections::Impression => vec![SectionChoice::Impression],
        }
    }
}

impl std::str::FromStr for EvalSections {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "both" => Ok(EvalSections::Both),
            "findings" => Ok(EvalSections::Findings),
            "impression" => Ok(EvalSections::Impression),
            other => Err(format!("section must be both, findings or impression, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub subset: CategorySubset,
    pub policy: UncertainPolicy,
    pub eval_section: EvalSections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub feature_dim: usize,
    pub hash_seed: u64,
    pub ngram_orders: Vec<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        let e = HashedNgramEncoder::default();
        EncoderConfig { feature_dim: e.feature_dim, hash_seed: e.hash_seed, ngram_orders: e.ngram_orders }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    pub sizes: Vec<usize>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig { sizes: vec![500, 5000, 15000, 50000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub synth_reports: usize,
    pub synth_seed: u64,
    pub negation_rate: f64,
    pub uncertainty_rate: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = crate::synth::SynthConfig::default();
        SynthSection {
            synth_reports: d.n_reports,
            synth_seed: d.seed,
            negation_rate: d.negation_rate,
            uncertainty_rate: d.uncertainty_rate,
        }
    }
}

/// Everything a run can be configured with. Read from TOML; unknown keys
/// are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub client: ClientConfig,
    pub labeling: LabelingConfig,
    pub train: TrainConfig,
    pub encoder: EncoderConfig,
    pub eval: EvalConfig,
    pub curve: CurveConfig,
    pub synth: SynthSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: PathsConfig { run_dir: PathBuf::from("runs"), ..Default::default() },
            client: ClientConfig::default(),
            labeling: LabelingConfig::default(),
            train: TrainConfig::default(),
            encoder: EncoderConfig::default(),
            eval: EvalConfig::default(),
            curve: CurveConfig::default(),
            synth: SynthSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, String> {
        toml::from_str(src).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let src = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml_str(&src).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config renders")
    }

    pub fn encoder(&self) -> HashedNgramEncoder {
        HashedNgramEncoder {
            feature_dim: self.encoder.feature_dim,
            hash_seed: self.encoder.hash_seed,
            ngram_orders: self.encoder.ngram_orders.clone(),
            max_tokens: self.train.max_tokens,
        }
    }

    pub fn synth_config(&self) -> crate::synth::SynthConfig {
        crate::synth::SynthConfig {
            n_reports: self.synth.synth_reports,
            seed: self.synth.synth_seed,
            negation_rate: self.synth.negation_rate,
            uncertainty_rate: self.synth.uncertainty_rate,
            ..Default::default()
        }
    }
}

/// Comma-separated list flag value, e.g. `500,5000,15000`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsizeList(pub Vec<usize>);

impl std::str::FromStr for UsizeList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<Result<_, _>>()
            .map(UsizeList)
    }
}

/// Command-line form of every config key. Each flag is the key name in
/// kebab case and overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// [paths] raw report file (JSON lines)
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// [paths] normalized corpus file
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// [paths] mapping lexicon (TOML); built-in default when unset
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// [paths] prompt template (TOML); built-in starter when unset
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// [paths] response cache directory
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// [paths] label file (pseudo-labels for training and distributions)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// [paths] trained model file
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// [paths] gold label file
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// [paths] corpus holding the gold studies' text
    #[arg(long)]
    pub gold_corpus: Option<PathBuf>,
    /// [paths] directory receiving manifest.jsonl
    #[arg(long)]
    pub run_dir: Option<PathBuf>,

    /// [client] http or stub (stub needs no credentials)
    #[arg(long, value_enum)]
    pub provider: Option<Provider>,
    /// [client] chat-completion base URL
    #[arg(long)]
    pub endpoint: Option<String>,
    /// [client] model id sent to the endpoint
    #[arg(long)]
    pub model: Option<String>,
    /// [client] maximum requests in flight
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// [client] decoding temperature
    #[arg(long)]
    pub temperature: Option<f64>,
    /// [client] output token budget per request
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
    /// [client] request timeout in seconds
    #[arg(long)]
    pub timeout_secs: Option<u64>,

    /// [labeling] extract, direct or four-status
    #[arg(long)]
    pub mode: Option<LabelMode>,
    /// [labeling] auto (longer section), findings or impression
    #[arg(long)]
    pub label_section: Option<SectionSelector>,

    /// [train] number of updates
    #[arg(long)]
    pub steps: Option<usize>,
    /// [train] initial learning rate
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// [train] examples per update
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [train] the learning rate halves every this many steps
    #[arg(long)]
    pub lr_halving_interval: Option<usize>,
    /// [train] tokens kept per input
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// [train] shuffling seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// [train] model file to initialize from
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// [train] decision threshold (positive iff probability > threshold)
    #[arg(long)]
    pub threshold: Option<f64>,
    /// [train] log the loss every this many steps
    #[arg(long)]
    pub log_every: Option<usize>,
    /// [train.optimizer] first-moment decay
    #[arg(long)]
    pub beta1: Option<f64>,
    /// [train.optimizer] second-moment decay
    #[arg(long)]
    pub beta2: Option<f64>,
    /// [train.optimizer] denominator epsilon
    #[arg(long)]
    pub eps: Option<f64>,
    /// [train.optimizer] decoupled weight decay
    #[arg(long)]
    pub weight_decay: Option<f64>,

    /// [encoder] number of hash buckets
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// [encoder] hash seed
    #[arg(long)]
    pub hash_seed: Option<u64>,
    /// [encoder] n-gram orders, comma separated
    #[arg(long)]
    pub ngram_orders: Option<UsizeList>,

    /// [eval] category subset: 10 or 13
    #[arg(long)]
    pub subset: Option<CategorySubset>,
    /// [eval] uncertain policy: merge or positive-only
    #[arg(long)]
    pub policy: Option<UncertainPolicy>,
    /// [eval] both, findings or impression
    #[arg(long)]
    pub eval_section: Option<EvalSections>,

    /// [curve] training sizes, comma separated and ascending
    #[arg(long)]
    pub sizes: Option<UsizeList>,

    /// [synth] number of synthetic reports
    #[arg(long)]
    pub synth_reports: Option<usize>,
    /// [synth] generator seed
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// [synth] share of mentioned findings that are negated
    #[arg(long)]
    pub negation_rate: Option<f64>,
    /// [synth] share of present findings that are hedged
    #[arg(long)]
    pub uncertainty_rate: Option<f64>,
}

macro_rules! set {
    ($src:expr => $dst:expr) => {
        if let Some(v) = $src.clone() {
            $dst = v;
        }
    };
    ($src:expr => some $dst:expr) => {
        if let Some(v) = $src.clone() {
            $dst = Some(v);
        }
    };
}

impl ConfigOverrides {
    /// Defaults, then the config file, then these flags.
    pub fn resolve(&self) -> Result<PipelineConfig, String> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        self.apply(&mut c);
        Ok(c)
    }

    pub fn apply(&self, c: &mut PipelineConfig) {
        let p = &mut c.paths;
        set!(self.reports => some p.reports);
        set!(self.corpus => some p.corpus);
        set!(self.lexicon => some p.lexicon);
        set!(self.template => some p.template);
        set!(self.cache_dir => some p.cache_dir);
        set!(self.labels => some p.labels);
        set!(self.model_file => some p.model_file);
        set!(self.gold => some p.gold);
        set!(self.gold_corpus => some p.gold_corpus);
        set!(self.run_dir => p.run_dir);

        let k = &mut c.client;
        set!(self.provider => k.provider);
        set!(self.endpoint => k.endpoint);
        set!(self.model => k.model);
        set!(self.concurrency => k.concurrency);
        set!(self.temperature => k.temperature);
        set!(self.max_output_tokens => k.max_output_tokens);
        set!(self.timeout_secs => k.timeout_secs);

        set!(self.mode => c.labeling.mode);
        set!(self.label_section => c.labeling.label_section);

        let t = &mut c.train;
        set!(self.steps => t.steps);
        set!(self.learning_rate => t.learning_rate);
        set!(self.batch_size => t.batch_size);
        set!(self.lr_halving_interval => t.lr_halving_interval);
        set!(self.max_tokens => t.max_tokens);
        set!(self.seed => t.seed);
        set!(self.warm_start => some t.warm_start);
        set!(self.threshold => t.threshold);
        set!(self.log_every => t.log_every);
        set!(self.beta1 => t.optimizer.beta1);
        set!(self.beta2 => t.optimizer.beta2);
        set!(self.eps => t.optimizer.eps);
        set!(self.weight_decay => t.optimizer.weight_decay);

        set!(self.feature_dim => c.encoder.feature_dim);
        set!(self.hash_seed => c.encoder.hash_seed);
        if let Some(v) = &self.ngram_orders {
            c.encoder.ngram_orders = v.0.clone();
        }

        set!(self.subset => c.eval.subset);
        set!(self.policy => c.eval.policy);
        set!(self.eval_section => c.eval.eval_section);

        if let Some(v) = &self.sizes {
            c.curve.sizes = v.0.clone();
        }

        set!(self.synth_reports => c.synth.synth_reports);
        set!(self.synth_seed => c.synth.synth_seed);
        set!(self.negation_rate => c.synth.negation_rate);
        set!(self.uncertainty_rate => c.synth.uncertainty_rate);
    }
}
