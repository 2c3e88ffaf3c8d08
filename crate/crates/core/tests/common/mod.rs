#![allow(dead_code)]

pub mod numerics;

use std::collections::BTreeMap;

use cxrlabel::corpus::{CorpusRecord, SectionChoice};
use cxrlabel::llm::{LabelMode, Labeler, LabelerOptions, NoSleep, PromptTemplate, StubProvider};
use cxrlabel::mapper::{rule_label, MappingLexicon};
use cxrlabel::synth::{generate, SynthConfig};
use cxrlabel::taxonomy::{Category, CategorySubset, ExtendedStatus, LabelVector, PresenceLabel, NUM_CATEGORIES};

use Category::*;

/// A report sentence with the labels the rule labeler must give it.
pub struct Fixture {
    pub id: &'static str,
    pub text: &'static str,
    pub expect: &'static [(Category, bool)],
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        id: "fx01",
        text: "Worsen aeration in the lungs with no effusion and mild bibasilar atelectasis.",
        expect: &[(Atelectasis, true), (Effusion, false)],
    },
    Fixture {
        id: "fx02",
        text: "There has been mild improvement but not complete resolution of the pre-existing pulmonary edema, left pleural effusion with atelectasis, and cardiomegaly.",
        expect: &[(Effusion, true)],
    },
    Fixture {
        id: "fx03",
        text: "Improved right pneumothorax which is now small. Resolved right pleural effusion.",
        expect: &[(Effusion, false), (Pneumothorax, true)],
    },
    Fixture {
        id: "fx04",
        text: "The lungs are clear of consolidation or effusion. All left posterior 7th rib fracture is identified. Atherosclerotic calcifications noted at the aortic arch.",
        expect: &[(Fracture, true), (Consolidation, false), (Effusion, false)],
    },
    Fixture {
        id: "fx05",
        text: "There is top-normal heart size with tiny left pleural effusion.",
        expect: &[(WidenedMediastinalSilhouette, false), (Effusion, true)],
    },
    Fixture {
        id: "fx06",
        text: "Marked shift of the mediastinum and trachea to the left.",
        expect: &[(WidenedMediastinalSilhouette, false)],
    },
    Fixture {
        id: "fx07",
        text: "Three fractured median sternotomy wires. The wire located third from the top has a fracture fragment oriented posteriorly.",
        expect: &[(Fracture, false)],
    },
    Fixture {
        id: "fx08",
        text: "Stable deformity along the right lateral rib cage. No acute findings.",
        expect: &[(Fracture, true)],
    },
    Fixture {
        id: "fx09",
        text: "Persistent biapical fibrosis without superimposed acute consolidation.",
        expect: &[(LungOpacity, true), (Consolidation, false)],
    },
    Fixture {
        id: "fx10",
        text: "A calcified granuloma projects over the right lateral mid lung.",
        expect: &[(Nodule, true)],
    },
    Fixture {
        id: "fx11",
        text: "Blunting of the right costophrenic angle may be due to overlying soft tissue.",
        expect: &[(PleuralLesion, true)],
    },
    Fixture {
        id: "fx12",
        text: "Compared to prior study, there is increased pulmonary vascular congestion.",
        expect: &[(PulmonaryEdema, true)],
    },
    Fixture {
        id: "fx13",
        text: "No reaccumulation of pleural fluid or development of pneumothorax.",
        expect: &[(Pneumothorax, false), (Effusion, false)],
    },
    Fixture {
        id: "fx14",
        text: "Low lung volumes. No definite focal consolidation identified.",
        expect: &[(Consolidation, false)],
    },
    Fixture {
        id: "fx15",
        text: "Severe emphysema without superimposed consolidation.",
        expect: &[(Consolidation, false)],
    },
    Fixture {
        id: "fx16",
        text: "No evidence of pneumonia. The mediastinum is not widened.",
        expect: &[(WidenedMediastinalSilhouette, false), (Consolidation, false)],
    },
    Fixture { id: "fx17", text: "Improved right pneumothorax which is now small.", expect: &[(Pneumothorax, true)] },
    Fixture {
        id: "fx18",
        text: "Diffusely increased interstitial markings compatible with interstitial edema versus chronic changes.",
        expect: &[(PulmonaryEdema, true)],
    },
    Fixture {
        id: "fx19",
        text: "Improvement of multifocal infiltrates but persistent densities in right middle lobe and peripheral lingula.",
        expect: &[(LungOpacity, true)],
    },
    Fixture {
        id: "fx20",
        text: "Right middle lobe and lingular pneumonia.",
        expect: &[(Consolidation, false)],
    },
    Fixture {
        id: "fx21",
        text: "New retrocardiac opacity concerning for pneumonia in the appropriate clinical setting.",
        expect: &[(LungOpacity, true), (Consolidation, false)],
    },
    Fixture {
        id: "fx22",
        text: "Left perihilar opacity corresponding to known pulmonary mass again seen.",
        expect: &[(Nodule, true)],
    },
    Fixture {
        id: "fx23",
        text: "Vascular congestion without overt edema.",
        expect: &[(PulmonaryEdema, false)],
    },
    Fixture {
        id: "fx24",
        text: "Interval resolution of right pleural effusion.",
        expect: &[(Effusion, false)],
    },
];

/// Each failing expectation as `id: category expected X got Y`.
pub fn fixture_failures(lexicon: &MappingLexicon) -> Vec<String> {
    let mut out = Vec::new();
    for f in FIXTURES {
        let v = rule_label(f.id, SectionChoice::Findings, f.text, lexicon);
        for &(c, want) in f.expect {
            let got = v.is_positive(c).unwrap();
            if got != want {
                out.push(format!("{}: {} expected {} got {}", f.id, c.key(), want, got));
            }
        }
    }
    out
}

pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<CorpusRecord> {
    generate(&SynthConfig { n_reports: n, seed, ..Default::default() })
        .iter()
        .map(|r| CorpusRecord::from_report(r).unwrap())
        .collect()
}

/// Stub-provider pseudo-labels for every record's section (`None` = the
/// selected, longer section).
pub fn stub_labels(corpus: &[CorpusRecord], section: Option<SectionChoice>) -> Vec<LabelVector> {
    let lexicon = MappingLexicon::default_lexicon();
    let template = PromptTemplate::starter(LabelMode::ExtractFindings);
    let client = StubProvider::new(LabelMode::ExtractFindings, lexicon.clone());
    let labeler = Labeler {
        template: &template,
        lexicon: &lexicon,
        client: &client,
        cache: None,
        sleeper: &NoSleep,
        options: LabelerOptions { concurrency: 8, ..Default::default() },
    };
    let out = labeler.batch_label(corpus, section);
    assert!(out.quarantine.is_empty(), "{:?}", out.quarantine.first());
    out.labels
}

pub fn status_from(i: u8) -> ExtendedStatus {
    ExtendedStatus::ALL[(i % 4) as usize]
}

/// Four-status vectors for ids `s0..sN` in one section, cells drawn from
/// `cells` (values taken mod 4).
pub fn four_status_rows(section: SectionChoice, cells: &[[u8; NUM_CATEGORIES]]) -> Vec<LabelVector> {
    cells
        .iter()
        .enumerate()
        .map(|(i, row)| LabelVector::four_status(format!("s{i}"), section, row.map(status_from)))
        .collect()
}

pub fn binary_rows(section: SectionChoice, cells: &[[bool; NUM_CATEGORIES]]) -> Vec<LabelVector> {
    cells
        .iter()
        .enumerate()
        .map(|(i, row)| LabelVector::binary(format!("s{i}"), section, row.map(PresenceLabel::from_bool)))
        .collect()
}

/// Two hand-built three-study four-status files; `b` lists the studies in
/// a different order.
pub fn three_study_pair() -> (Vec<LabelVector>, Vec<LabelVector>) {
    use ExtendedStatus::*;
    let f = SectionChoice::Findings;
    let mut a1 = [NotMentioned; NUM_CATEGORIES];
    let mut b1 = [NotMentioned; NUM_CATEGORIES];
    a1[Effusion.index()] = Positive;
    b1[Effusion.index()] = Uncertain;
    a1[Atelectasis.index()] = Negative;
    b1[Atelectasis.index()] = Negative;
    let mut a2 = [Negative; NUM_CATEGORIES];
    let b2 = [NotMentioned; NUM_CATEGORIES];
    a2[Pneumothorax.index()] = Uncertain;
    let mut a3 = [NotMentioned; NUM_CATEGORIES];
    let mut b3 = [NotMentioned; NUM_CATEGORIES];
    a3[SubdiaphragmaticGas.index()] = Positive;
    b3[SubdiaphragmaticGas.index()] = Positive;
    a3[Nodule.index()] = Uncertain;
    b3[Nodule.index()] = Positive;
    let a = vec![
        LabelVector::four_status("x1", f, a1),
        LabelVector::four_status("x2", f, a2),
        LabelVector::four_status("x3", f, a3),
    ];
    let b = vec![
        LabelVector::four_status("x3", f, b3),
        LabelVector::four_status("x1", f, b1),
        LabelVector::four_status("x2", f, b2),
    ];
    (a, b)
}

/// Brute-force status-pair counts: join by id, then tally every cell.
pub fn cross_tab_oracle(a: &[LabelVector], b: &[LabelVector], sub: CategorySubset) -> [[u64; 4]; 4] {
    let mut oracle = [[0u64; 4]; 4];
    let by_id: BTreeMap<&str, &LabelVector> = b.iter().map(|v| (v.study_id.as_str(), v)).collect();
    for va in a {
        let vb = by_id[va.study_id.as_str()];
        for c in sub.categories() {
            let sa = va.status_labels().unwrap()[c.index()];
            let sb = vb.status_labels().unwrap()[c.index()];
            let i = ExtendedStatus::ALL.iter().position(|s| *s == sa).unwrap();
            let j = ExtendedStatus::ALL.iter().position(|s| *s == sb).unwrap();
            oracle[i][j] += 1;
        }
    }
    oracle
}
