//! Seeded synthetic chest X-ray reports.
//!
//! Each report mentions a random set of findings, each one positive,
//! negated or hedged, mixed with normal-anatomy filler sentences. The
//! phrasing stays within forms the default lexicon rules label correctly,
//! so rule labels over these reports are a clean reference.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{from_sections, RadiologyReport};
use crate::taxonomy::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_reports: usize,
    pub seed: u64,
    /// Chance that a finding is mentioned as negated rather than present.
    pub negation_rate: f64,
    /// Chance that a present finding is hedged.
    pub uncertainty_rate: f64,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_reports: 1000, seed: 7, negation_rate: 0.5, uncertainty_rate: 0.15, id_prefix: "syn".into() }
    }
}

fn phrases(c: Category) -> &'static [&'static str] {
    use Category::*;
    match c {
        Atelectasis => &["bibasilar atelectasis", "subsegmental atelectasis", "left basilar atelectasis", "plate-like atelectasis"],
        Consolidation => &["focal consolidation", "right lower lobe consolidation", "consolidation", "airspace consolidation"],
        Effusion => &["pleural effusion", "small left pleural effusion", "right pleural effusion", "layering effusion"],
        Fracture => &["rib fracture", "displaced rib fractures", "clavicle fracture", "vertebral compression deformity"],
        Hyperinflation => &["hyperinflation", "hyperinflated lungs", "emphysema"],
        LungOpacity => &["patchy opacity", "right basilar opacities", "interstitial opacities", "hazy opacification"],
        Nodule => &["pulmonary nodule", "calcified granuloma", "right upper lobe nodule", "lung mass"],
        PleuralLesion => &["pleural thickening", "calcified pleural plaques", "blunting of the costophrenic angle"],
        Pneumothorax => &["pneumothorax", "small apical pneumothorax", "right pneumothorax"],
        PulmonaryEdema => &["pulmonary edema", "interstitial edema", "vascular congestion", "mild pulmonary edema"],
        SubcutaneousEmphysema => &["subcutaneous emphysema", "subcutaneous air in the chest wall"],
        SubdiaphragmaticGas => &["free air under the diaphragm", "pneumoperitoneum", "subdiaphragmatic free gas"],
        WidenedMediastinalSilhouette => &["cardiomegaly", "widened mediastinum", "enlarged cardiac silhouette"],
    }
}

fn prevalence(c: Category) -> f64 {
    use Category::*;
    match c {
        Atelectasis | Effusion | LungOpacity => 0.30,
        Consolidation | PulmonaryEdema | WidenedMediastinalSilhouette => 0.22,
        Pneumothorax | Nodule => 0.15,
        Fracture | PleuralLesion | Hyperinflation => 0.10,
        SubcutaneousEmphysema | SubdiaphragmaticGas => 0.07,
    }
}

const FILLERS: &[&str] = &[
    "The osseous structures are intact.",
    "Lungs are well expanded.",
    "Median sternotomy wires are intact.",
    "The trachea is midline.",
    "Comparison is made to the prior radiograph.",
    "A central venous catheter terminates in the superior vena cava.",
    "The hila are unremarkable.",
    "Degenerative changes of the thoracic spine.",
    "The heart size is normal.",
];

const NORMAL_IMPRESSIONS: &[&str] = &[
    "No acute cardiopulmonary process.",
    "No acute intrathoracic abnormality.",
    "Normal chest radiograph.",
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn positive_sentence(rng: &mut ChaCha8Rng, p: &str) -> String {
    match rng.gen_range(0..4) {
        0 => format!("{}.", capitalize(p)),
        1 => format!("There is {p}."),
        2 => format!("{} is again seen.", capitalize(p)),
        _ => format!("New {p}."),
    }
}

fn uncertain_sentence(rng: &mut ChaCha8Rng, p: &str) -> String {
    match rng.gen_range(0..3) {
        0 => format!("{} cannot be excluded.", capitalize(p)),
        1 => format!("Possible {p}."),
        _ => format!("Findings may represent {p}."),
    }
}

fn negated_sentence(rng: &mut ChaCha8Rng, p: &str) -> String {
    match rng.gen_range(0..4) {
        0 => format!("No {p}."),
        1 => format!("There is no {p}."),
        2 => format!("Resolved {p}."),
        _ => format!("No evidence of {p}."),
    }
}

/// Reports `id_prefix-000000`, `id_prefix-000001`, … with Findings and
/// (mostly) Impression sections. The same config gives the same reports.
pub fn generate(cfg: &SynthConfig) -> Vec<RadiologyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_reports).map(|i| one_report(&mut rng, cfg, &format!("{}-{i:06}", cfg.id_prefix))).collect()
}

fn one_report(rng: &mut ChaCha8Rng, cfg: &SynthConfig, id: &str) -> RadiologyReport {
    let mut findings: Vec<String> = Vec::new();
    let mut present: Vec<&str> = Vec::new();
    let mut negated: Vec<&str> = Vec::new();
    for c in Category::ALL {
        if !rng.gen_bool(prevalence(c)) {
            continue;
        }
        let p = *phrases(c).choose(rng).expect("phrases");
        if rng.gen_bool(cfg.negation_rate) {
            negated.push(p);
        } else if rng.gen_bool(cfg.uncertainty_rate) {
            findings.push(uncertain_sentence(rng, p));
            present.push(p);
        } else {
            findings.push(positive_sentence(rng, p));
            present.push(p);
        }
    }
    // pair some negations as "No X or Y."
    negated.shuffle(rng);
    let mut k = 0;
    while k < negated.len() {
        if k + 1 < negated.len() && rng.gen_bool(0.3) {
            findings.push(format!("No {} or {}.", negated[k], negated[k + 1]));
            k += 2;
        } else {
            findings.push(negated_sentence(rng, negated[k]));
            k += 1;
        }
    }
    for _ in 0..rng.gen_range(1..=3) {
        findings.push(FILLERS.choose(rng).expect("fillers").to_string());
    }
    findings.shuffle(rng);

    let impression = if rng.gen_bool(0.1) {
        None
    } else if present.is_empty() {
        Some(NORMAL_IMPRESSIONS.choose(rng).expect("impressions").to_string())
    } else {
        let keep: Vec<&str> = present.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
        if keep.is_empty() {
            Some("No acute change.".to_string())
        } else {
            Some(keep.iter().map(|p| format!("{}.", capitalize(p))).collect::<Vec<_>>().join(" "))
        }
    };
    from_sections(id, Some(&findings.join(" ")), impression.as_deref()).expect("findings never empty")
}
