//! The 13 abnormality categories, label statuses and label vectors.
//!
//! Category order is fixed: every vector, file column and report uses the
//! order of [`Category::ALL`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SectionChoice;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("label scheme mismatch: expected {expected}, found {found}")]
    SchemeMismatch { expected: Scheme, found: Scheme },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown status `{0}`")]
    UnknownStatus(String),
}

pub const NUM_CATEGORIES: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Atelectasis,
    Consolidation,
    Effusion,
    Fracture,
    Hyperinflation,
    LungOpacity,
    Nodule,
    PleuralLesion,
    Pneumothorax,
    PulmonaryEdema,
    SubcutaneousEmphysema,
    SubdiaphragmaticGas,
    WidenedMediastinalSilhouette,
}

impl Category {
    pub const ALL: [Category; NUM_CATEGORIES] = [
        Category::Atelectasis,
        Category::Consolidation,
        Category::Effusion,
        Category::Fracture,
        Category::Hyperinflation,
        Category::LungOpacity,
        Category::Nodule,
        Category::PleuralLesion,
        Category::Pneumothorax,
        Category::PulmonaryEdema,
        Category::SubcutaneousEmphysema,
        Category::SubdiaphragmaticGas,
        Category::WidenedMediastinalSilhouette,
    ];

    /// Categories with no counterpart in the 14-class CheXpert scheme.
    pub const EXTENDED_ONLY: [Category; 3] = [
        Category::Hyperinflation,
        Category::SubcutaneousEmphysema,
        Category::SubdiaphragmaticGas,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Self::ALL.get(i).copied()
    }

    /// Column / key name, e.g. `lung_opacity`.
    pub fn key(self) -> &'static str {
        match self {
            Category::Atelectasis => "atelectasis",
            Category::Consolidation => "consolidation",
            Category::Effusion => "effusion",
            Category::Fracture => "fracture",
            Category::Hyperinflation => "hyperinflation",
            Category::LungOpacity => "lung_opacity",
            Category::Nodule => "nodule",
            Category::PleuralLesion => "pleural_lesion",
            Category::Pneumothorax => "pneumothorax",
            Category::PulmonaryEdema => "pulmonary_edema",
            Category::SubcutaneousEmphysema => "subcutaneous_emphysema",
            Category::SubdiaphragmaticGas => "subdiaphragmatic_gas",
            Category::WidenedMediastinalSilhouette => "widened_mediastinal_silhouette",
        }
    }

    /// Human-readable name, e.g. `Lung Opacity`.
    pub fn display_name(self) -> &'static str {
        match self {
            Category::Atelectasis => "Atelectasis",
            Category::Consolidation => "Consolidation",
            Category::Effusion => "Effusion",
            Category::Fracture => "Fracture",
            Category::Hyperinflation => "Hyperinflation",
            Category::LungOpacity => "Lung Opacity",
            Category::Nodule => "Nodule",
            Category::PleuralLesion => "Pleural Lesion",
            Category::Pneumothorax => "Pneumothorax",
            Category::PulmonaryEdema => "Pulmonary Edema",
            Category::SubcutaneousEmphysema => "Subcutaneous Emphysema",
            Category::SubdiaphragmaticGas => "Subdiaphragmatic Gas",
            Category::WidenedMediastinalSilhouette => "Widened Mediastinal Silhouette",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Category {
    type Err = TaxonomyError;

    /// Accepts the key form, the display form and any spacing/case variant
    /// of either (`Lung Opacity`, `lung-opacity`, `LUNG_OPACITY`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.key() == folded)
            .ok_or_else(|| TaxonomyError::UnknownCategory(s.trim().to_string()))
    }
}

/// Subset of categories used for aggregate metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum CategorySubset {
    /// The 10 categories shared with the CheXpert scheme.
    #[serde(rename = "10")]
    Comparison10,
    #[default]
    #[serde(rename = "13")]
    All13,
}

impl CategorySubset {
    pub fn categories(self) -> Vec<Category> {
        match self {
            CategorySubset::All13 => Category::ALL.to_vec(),
            CategorySubset::Comparison10 => Category::ALL
                .iter()
                .copied()
                .filter(|c| !Category::EXTENDED_ONLY.contains(c))
                .collect(),
        }
    }

    pub fn size(self) -> usize {
        match self {
            CategorySubset::All13 => 13,
            CategorySubset::Comparison10 => 10,
        }
    }
}

impl fmt::Display for CategorySubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.size())
    }
}

impl FromStr for CategorySubset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "13" => Ok(CategorySubset::All13),
            "10" => Ok(CategorySubset::Comparison10),
            other => Err(format!("subset must be 10 or 13, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresenceLabel {
    Positive,
    NotPositive,
}

impl PresenceLabel {
    pub fn is_positive(self) -> bool {
        self == PresenceLabel::Positive
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            PresenceLabel::Positive
        } else {
            PresenceLabel::NotPositive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExtendedStatus {
    Positive,
    Negative,
    Uncertain,
    /// Written as a blank cell in CheXpert-format files.
    NotMentioned,
}

impl ExtendedStatus {
    pub const ALL: [ExtendedStatus; 4] = [
        ExtendedStatus::Positive,
        ExtendedStatus::Negative,
        ExtendedStatus::Uncertain,
        ExtendedStatus::NotMentioned,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            ExtendedStatus::Positive => "pos",
            ExtendedStatus::Negative => "neg",
            ExtendedStatus::Uncertain => "unc",
            ExtendedStatus::NotMentioned => "nm",
        }
    }

    pub fn from_code(s: &str) -> Result<Self, TaxonomyError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" | "positive" => Ok(ExtendedStatus::Positive),
            "neg" | "negative" => Ok(ExtendedStatus::Negative),
            "unc" | "uncertain" => Ok(ExtendedStatus::Uncertain),
            "nm" | "not mentioned" | "not_mentioned" | "blank" => Ok(ExtendedStatus::NotMentioned),
            other => Err(TaxonomyError::UnknownStatus(other.to_string())),
        }
    }

    /// Precedence used when several statuses collapse onto one category:
    /// positive > uncertain > negative > not mentioned.
    pub fn strength(self) -> u8 {
        match self {
            ExtendedStatus::Positive => 3,
            ExtendedStatus::Uncertain => 2,
            ExtendedStatus::Negative => 1,
            ExtendedStatus::NotMentioned => 0,
        }
    }

    pub fn strongest(self, other: ExtendedStatus) -> ExtendedStatus {
        if other.strength() > self.strength() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Binary,
    FourStatus,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Binary => f.write_str("binary"),
            Scheme::FourStatus => f.write_str("four-status"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UncertainPolicy {
    /// Positive and Uncertain both count as Positive.
    #[default]
    #[serde(alias = "merge")]
    MergeUncertainAsPositive,
    /// Only Positive counts as Positive.
    #[serde(alias = "positive")]
    PositiveOnly,
}

impl FromStr for UncertainPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "merge" | "merge-uncertain-as-positive" => Ok(UncertainPolicy::MergeUncertainAsPositive),
            "positive-only" | "positive" => Ok(UncertainPolicy::PositiveOnly),
            other => Err(format!("policy must be `merge` or `positive-only`, got `{other}`")),
        }
    }
}

impl fmt::Display for UncertainPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UncertainPolicy::MergeUncertainAsPositive => f.write_str("merge"),
            UncertainPolicy::PositiveOnly => f.write_str("positive-only"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Labels {
    Binary([PresenceLabel; NUM_CATEGORIES]),
    FourStatus([ExtendedStatus; NUM_CATEGORIES]),
}

/// Labels for one (study, section).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    pub study_id: String,
    pub section: SectionChoice,
    pub labels: Labels,
}

impl LabelVector {
    pub fn binary(study_id: impl Into<String>, section: SectionChoice, labels: [PresenceLabel; NUM_CATEGORIES]) -> Self {
        LabelVector { study_id: study_id.into(), section, labels: Labels::Binary(labels) }
    }

    pub fn four_status(
        study_id: impl Into<String>,
        section: SectionChoice,
        labels: [ExtendedStatus; NUM_CATEGORIES],
    ) -> Self {
        LabelVector { study_id: study_id.into(), section, labels: Labels::FourStatus(labels) }
    }

    /// All-NotPositive binary vector.
    pub fn empty_binary(study_id: impl Into<String>, section: SectionChoice) -> Self {
        Self::binary(study_id, section, [PresenceLabel::NotPositive; NUM_CATEGORIES])
    }

    pub fn from_positive_set(
        study_id: impl Into<String>,
        section: SectionChoice,
        positives: impl IntoIterator<Item = Category>,
    ) -> Self {
        let mut labels = [PresenceLabel::NotPositive; NUM_CATEGORIES];
        for c in positives {
            labels[c.index()] = PresenceLabel::Positive;
        }
        Self::binary(study_id, section, labels)
    }

    pub fn scheme(&self) -> Scheme {
        match self.labels {
            Labels::Binary(_) => Scheme::Binary,
            Labels::FourStatus(_) => Scheme::FourStatus,
        }
    }

    pub fn binary_labels(&self) -> Result<&[PresenceLabel; NUM_CATEGORIES], TaxonomyError> {
        match &self.labels {
            Labels::Binary(l) => Ok(l),
            Labels::FourStatus(_) => Err(TaxonomyError::SchemeMismatch {
                expected: Scheme::Binary,
                found: Scheme::FourStatus,
            }),
        }
    }

    pub fn status_labels(&self) -> Result<&[ExtendedStatus; NUM_CATEGORIES], TaxonomyError> {
        match &self.labels {
            Labels::FourStatus(l) => Ok(l),
            Labels::Binary(_) => Err(TaxonomyError::SchemeMismatch {
                expected: Scheme::FourStatus,
                found: Scheme::Binary,
            }),
        }
    }

    pub fn is_positive(&self, c: Category) -> Result<bool, TaxonomyError> {
        Ok(self.binary_labels()?[c.index()].is_positive())
    }

    pub fn positives(&self) -> Result<Vec<Category>, TaxonomyError> {
        let l = self.binary_labels()?;
        Ok(Category::ALL.iter().copied().filter(|c| l[c.index()].is_positive()).collect())
    }

    /// Packed 0/1 targets in canonical order.
    pub fn targets(&self) -> Result<[f64; NUM_CATEGORIES], TaxonomyError> {
        let l = self.binary_labels()?;
        let mut out = [0.0; NUM_CATEGORIES];
        for (o, p) in out.iter_mut().zip(l.iter()) {
            *o = if p.is_positive() { 1.0 } else { 0.0 };
        }
        Ok(out)
    }
}

/// Collapse a four-status vector to presence labels.
pub fn merge_uncertain(v: &LabelVector, policy: UncertainPolicy) -> Result<LabelVector, TaxonomyError> {
    let statuses = v.status_labels()?;
    let mut labels = [PresenceLabel::NotPositive; NUM_CATEGORIES];
    for (out, s) in labels.iter_mut().zip(statuses.iter()) {
        let positive = match (s, policy) {
            (ExtendedStatus::Positive, _) => true,
            (ExtendedStatus::Uncertain, UncertainPolicy::MergeUncertainAsPositive) => true,
            _ => false,
        };
        *out = PresenceLabel::from_bool(positive);
    }
    Ok(LabelVector::binary(v.study_id.clone(), v.section, labels))
}

/// True iff all 13 labels are NotPositive.
pub fn no_abnormality(v: &LabelVector) -> Result<bool, TaxonomyError> {
    Ok(v.binary_labels()?.iter().all(|l| !l.is_positive()))
}

/// The 14 CheXpert observation columns.
pub const CHEXPERT_COLUMNS: [&str; 14] = [
    "No Finding",
    "Enlarged Cardiomediastinum",
    "Cardiomegaly",
    "Lung Lesion",
    "Lung Opacity",
    "Edema",
    "Consolidation",
    "Pneumonia",
    "Atelectasis",
    "Pneumothorax",
    "Pleural Effusion",
    "Pleural Other",
    "Fracture",
    "Support Devices",
];

/// Category a CheXpert observation contributes to, if any.
pub fn chexpert_category(column: &str) -> Option<Category> {
    match column.trim() {
        "Atelectasis" => Some(Category::Atelectasis),
        "Consolidation" => Some(Category::Consolidation),
        "Pleural Effusion" => Some(Category::Effusion),
        "Fracture" => Some(Category::Fracture),
        "Lung Opacity" => Some(Category::LungOpacity),
        "Lung Lesion" => Some(Category::Nodule),
        "Pneumothorax" => Some(Category::Pneumothorax),
        "Edema" => Some(Category::PulmonaryEdema),
        "Pleural Other" => Some(Category::PleuralLesion),
        "Enlarged Cardiomediastinum" | "Cardiomegaly" => Some(Category::WidenedMediastinalSilhouette),
        _ => None,
    }
}

/// Fold CheXpert-scheme statuses into a four-status vector over our categories.
///
/// Several source columns may land on one category (Enlarged
/// Cardiomediastinum, Cardiomegaly); the strongest status wins, so the
/// result is positive under a policy iff either source is. Categories with
/// no source column are NotMentioned.
pub fn from_chexpert<'a>(
    study_id: impl Into<String>,
    section: SectionChoice,
    observations: impl IntoIterator<Item = (&'a str, ExtendedStatus)>,
) -> LabelVector {
    let mut labels = [ExtendedStatus::NotMentioned; NUM_CATEGORIES];
    for (column, status) in observations {
        if let Some(c) = chexpert_category(column) {
            let slot = &mut labels[c.index()];
            *slot = slot.strongest(status);
        }
    }
    LabelVector::four_status(study_id, section, labels)
}
