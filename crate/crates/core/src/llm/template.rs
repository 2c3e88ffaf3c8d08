use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;

pub const REPORT_PREFIX: &str = "Report: ";
pub const ANSWER_CUE: &str = "Answer:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// The model lists finding phrases; the lexicon maps them to categories.
    #[default]
    #[serde(alias = "extract")]
    ExtractFindings,
    /// The model names categories itself.
    #[serde(alias = "direct")]
    DirectCategorize,
    /// The model assigns positive/negative/uncertain per category.
    FourStatus,
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::ExtractFindings => "extract",
            LabelMode::DirectCategorize => "direct",
            LabelMode::FourStatus => "four-status",
        })
    }
}

impl FromStr for LabelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "extract" | "extract-findings" => Ok(LabelMode::ExtractFindings),
            "direct" | "direct-categorize" => Ok(LabelMode::DirectCategorize),
            "four-status" => Ok(LabelMode::FourStatus),
            other => Err(format!("mode must be extract, direct or four-status, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateExample {
    pub report: String,
    pub answer: String,
}

/// Task instruction plus in-context examples. The target report always
/// goes last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub instruction: String,
    pub mode: LabelMode,
    #[serde(default)]
    pub examples: Vec<TemplateExample>,
}

const EXTRACT_TEMPLATE: &str = include_str!("../../assets/template_extract.toml");
const DIRECT_TEMPLATE: &str = include_str!("../../assets/template_direct.toml");
const FOUR_STATUS_TEMPLATE: &str = include_str!("../../assets/template_four_status.toml");

impl PromptTemplate {
    pub fn from_toml_str(src: &str) -> Result<PromptTemplate, LlmError> {
        toml::from_str(src).map_err(|e| LlmError::Template(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<PromptTemplate, LlmError> {
        let src = std::fs::read_to_string(path).map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&src)
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("template renders")
    }

    /// Starter template shipped with the crate for the given mode.
    pub fn starter(mode: LabelMode) -> PromptTemplate {
        let src = match mode {
            LabelMode::ExtractFindings => EXTRACT_TEMPLATE,
            LabelMode::DirectCategorize => DIRECT_TEMPLATE,
            LabelMode::FourStatus => FOUR_STATUS_TEMPLATE,
        };
        Self::from_toml_str(src).expect("shipped template is valid")
    }

    /// Same instruction and mode with the examples dropped.
    pub fn without_examples(&self) -> PromptTemplate {
        PromptTemplate { examples: Vec::new(), ..self.clone() }
    }

    /// Hex SHA-256 of the rendered template.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }
}

/// Instruction, then each example as a report/answer pair, then the target
/// report followed by the answer cue.
pub fn build_prompt(template: &PromptTemplate, report_text: &str) -> Result<String, LlmError> {
    if report_text.trim().is_empty() {
        return Err(LlmError::EmptyReport);
    }
    let mut out = String::new();
    out.push_str(template.instruction.trim_end());
    out.push_str("\n\n");
    for ex in &template.examples {
        out.push_str(REPORT_PREFIX);
        out.push_str(ex.report.trim());
        out.push('\n');
        out.push_str(ANSWER_CUE);
        out.push('\n');
        out.push_str(ex.answer.trim());
        out.push_str("\n\n");
    }
    out.push_str(REPORT_PREFIX);
    out.push_str(report_text.trim());
    out.push('\n');
    out.push_str(ANSWER_CUE);
    Ok(out)
}

/// The target report of a prompt built by [`build_prompt`].
pub fn target_report(prompt: &str) -> Option<&str> {
    let body = prompt.strip_suffix(ANSWER_CUE)?.strip_suffix('\n')?;
    let start = body.rfind(&format!("\n{REPORT_PREFIX}"))? + 1 + REPORT_PREFIX.len();
    Some(&body[start..])
}
