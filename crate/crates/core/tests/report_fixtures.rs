mod common;

use cxrlabel::corpus::SectionChoice;
use cxrlabel::mapper::{map_phrase, rule_statuses, MappingLexicon};
use cxrlabel::taxonomy::{Category, ExtendedStatus};

#[test]
fn every_fixture_passes() {
    assert!(common::FIXTURES.len() >= 15);
    let failures = common::fixture_failures(&MappingLexicon::default_lexicon());
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn highlighted_phrases_map_alone() {
    let l = MappingLexicon::default_lexicon();
    let one = |p: &str| map_phrase(p, &l).into_iter().collect::<Vec<_>>();
    assert_eq!(one("calcified granuloma"), [Category::Nodule]);
    assert_eq!(one("deformity"), [Category::Fracture]);
    assert_eq!(one("fibrosis"), [Category::LungOpacity]);
    assert_eq!(one("densities"), [Category::LungOpacity]);
    assert_eq!(one("pulmonary vascular congestion"), [Category::PulmonaryEdema]);
    assert_eq!(one("pulmonary mass"), [Category::Nodule]);
    assert_eq!(one("pneumonia"), []);
    assert_eq!(one("top-normal heart size"), []);
}

#[test]
fn four_status_view_of_fixtures() {
    let l = MappingLexicon::default_lexicon();
    let st = rule_statuses("Resolved right pleural effusion.", &l);
    assert_eq!(st[Category::Effusion.index()], ExtendedStatus::Negative);
    let st = rule_statuses("No reaccumulation of pleural fluid or development of pneumothorax.", &l);
    assert_eq!(st[Category::Pneumothorax.index()], ExtendedStatus::Negative);
    assert_eq!(st[Category::Effusion.index()], ExtendedStatus::Negative);
    let st = rule_statuses("Blunting of the right costophrenic angle may be due to overlying soft tissue.", &l);
    assert_eq!(st[Category::PleuralLesion.index()], ExtendedStatus::Uncertain);
    assert_eq!(st[Category::Nodule.index()], ExtendedStatus::NotMentioned);
}

#[test]
fn section_does_not_change_rule_labels() {
    let l = MappingLexicon::default_lexicon();
    for f in common::FIXTURES {
        let a = cxrlabel::mapper::rule_label(f.id, SectionChoice::Findings, f.text, &l);
        let b = cxrlabel::mapper::rule_label(f.id, SectionChoice::Impression, f.text, &l);
        assert_eq!(a.labels, b.labels, "{}", f.id);
    }
}
