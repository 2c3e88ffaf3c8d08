//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cxrlabel::corpus::SectionChoice;
use cxrlabel::distill::{
    build_examples, learning_curve, predict_labels, steps_to_loss, train, Encoder, HashedNgramEncoder, TrainConfig,
    TrainedModel, Trainer,
};
use cxrlabel::evalkit::{
    cross_tab, distribution, evaluate, format_fixed, macro_mean, render_distribution_text, SectionDistribution,
};
use cxrlabel::labelfile::{labels_to_string, read_labels};
use cxrlabel::llm::{FaultPlan, LabelMode, Labeler, LabelerOptions, NoSleep, PromptTemplate, ResponseCache, StubProvider};
use cxrlabel::mapper::MappingLexicon;
use cxrlabel::taxonomy::{
    Category, CategorySubset, ExtendedStatus, LabelVector, PresenceLabel, UncertainPolicy, NUM_CATEGORIES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use Category::*;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

/// Category order of the reference per-category F1 values below.
const TABLE_ORDER: [Category; NUM_CATEGORIES] = [
    Atelectasis,
    Consolidation,
    Effusion,
    Fracture,
    LungOpacity,
    Nodule,
    PleuralLesion,
    Pneumothorax,
    PulmonaryEdema,
    WidenedMediastinalSilhouette,
    Hyperinflation,
    SubcutaneousEmphysema,
    SubdiaphragmaticGas,
];

fn aggregation_oracle() -> Check {
    let cases: [(&str, [f64; NUM_CATEGORIES], f64); 3] = [
        (
            "distilled findings",
            [96.34, 96.72, 97.77, 94.95, 88.56, 82.09, 92.91, 92.59, 83.00, 78.98, 99.08, 90.00, 85.71],
            90.67,
        ),
        (
            "llm findings",
            [96.63, 94.02, 97.52, 97.03, 88.47, 82.09, 96.06, 92.59, 80.16, 78.32, 96.23, 90.00, 85.71],
            90.37,
        ),
        (
            "distilled impression",
            [98.52, 99.01, 97.69, 88.89, 93.06, 85.71, 90.00, 95.45, 85.47, 94.12, 90.32, 90.91, 100.00],
            93.01,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, values, want) in cases {
        let m: BTreeMap<Category, f64> = TABLE_ORDER.iter().copied().zip(values).collect();
        let got = macro_mean(&m, CategorySubset::All13).unwrap();
        pass &= (got - want).abs() <= 0.01;
        parts.push(format!("{name} {got:.4} (want {want} +/- 0.01)"));
    }
    check(pass, parts.join("; "))
}

/// Category order of the reference label counts below; each count list
/// is followed by the no-abnormality count.
const DIST_ORDER: [Category; NUM_CATEGORIES] = [
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
];
const FINDINGS_COUNTS: ([usize; NUM_CATEGORIES], usize) =
    ([182, 60, 203, 49, 55, 217, 58, 61, 26, 147, 11, 4, 138], 77);
const IMPRESSION_COUNTS: ([usize; NUM_CATEGORIES], usize) =
    ([100, 51, 150, 9, 17, 139, 19, 9, 22, 134, 6, 1, 48], 165);

/// 500 binary rows with exactly the given per-category positives and
/// `normal` all-negative rows. Positives wrap around the abnormal rows so
/// each of them gets at least one.
fn rows_with_counts(prefix: &str, section: SectionChoice, counts: &[usize; NUM_CATEGORIES], normal: usize) -> Vec<LabelVector> {
    let abnormal = 500 - normal;
    let mut cells = vec![[false; NUM_CATEGORIES]; 500];
    let mut cursor = 0;
    for (c, &n) in DIST_ORDER.iter().zip(counts) {
        assert!(n <= abnormal);
        for k in 0..n {
            cells[(cursor + k) % abnormal][c.index()] = true;
        }
        cursor = (cursor + n) % abnormal;
    }
    assert!(cells[..abnormal].iter().all(|r| r.iter().any(|&x| x)));
    cells
        .iter()
        .enumerate()
        .map(|(i, r)| LabelVector::binary(format!("{prefix}{i:03}"), section, r.map(PresenceLabel::from_bool)))
        .collect()
}

fn distribution_oracle() -> Check {
    let mut rows = rows_with_counts("m", SectionChoice::Findings, &FINDINGS_COUNTS.0, FINDINGS_COUNTS.1);
    rows.extend(rows_with_counts("m", SectionChoice::Impression, &IMPRESSION_COUNTS.0, IMPRESSION_COUNTS.1));
    let reread = read_labels(labels_to_string(&rows).as_bytes()).unwrap();
    let dists = distribution(&reread).unwrap();
    let find = |s: SectionChoice| -> &SectionDistribution { dists.iter().find(|d| d.section == s).unwrap() };
    let cell = |d: &SectionDistribution, n: usize| format_fixed(d.percent(n).unwrap(), 1);

    let mut mismatches = Vec::new();
    for (section, (counts, normal)) in
        [(SectionChoice::Findings, FINDINGS_COUNTS), (SectionChoice::Impression, IMPRESSION_COUNTS)]
    {
        let d = find(section);
        if d.n_studies != 500 {
            mismatches.push(format!("{section} n={}", d.n_studies));
        }
        for (c, &n) in DIST_ORDER.iter().zip(&counts) {
            // one decimal of n/500 in percent is n/5 exactly
            let want = format!("{}.{}", (n * 2) / 10, (n * 2) % 10);
            if d.count(*c) != n || cell(d, n) != want {
                mismatches.push(format!("{section} {} {} vs {want}", c.key(), cell(d, d.count(*c))));
            }
        }
        if d.no_abnormality != normal {
            mismatches.push(format!("{section} no abnormality {}", d.no_abnormality));
        }
    }
    let atel = cell(find(SectionChoice::Findings), find(SectionChoice::Findings).count(Atelectasis));
    let normal = cell(find(SectionChoice::Impression), find(SectionChoice::Impression).no_abnormality);
    let text = render_distribution_text(&dists);
    let rendered = text.contains("182 (36.4%)") && text.contains("165 (33.0%)");
    check(
        mismatches.is_empty() && atel == "36.4" && normal == "33.0" && rendered,
        format!(
            "findings atelectasis {atel}%, impression no abnormality {normal}%, table rendering {}, {} mismatches {:?}",
            if rendered { "ok" } else { "wrong" },
            mismatches.len(),
            mismatches
        ),
    )
}

fn fixture_suite() -> Check {
    let failures = common::fixture_failures(&MappingLexicon::default_lexicon());
    let cases: usize = common::FIXTURES.len();
    let expectations: usize = common::FIXTURES.iter().map(|f| f.expect.len()).sum();
    check(
        failures.is_empty() && cases >= 15,
        format!("{cases} cases, {expectations} expectations, {} failures {:?}", failures.len(), failures),
    )
}

fn uncertain_policy_ordering() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1);
    let f = SectionChoice::Findings;
    let mut worst_gap = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..100 {
        let n = rng.gen_range(3..40);
        let mut gold: Vec<[bool; NUM_CATEGORIES]> =
            (0..n).map(|_| std::array::from_fn(|_| rng.gen_bool(0.3))).collect();
        let mut pred: Vec<[u8; NUM_CATEGORIES]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(0..4))).collect();
        let (i, c) = (rng.gen_range(0..n), rng.gen_range(0..NUM_CATEGORIES));
        gold[i][c] = true;
        pred[i][c] = ExtendedStatus::ALL.iter().position(|s| *s == ExtendedStatus::Uncertain).unwrap() as u8;
        let p = common::four_status_rows(f, &pred);
        let g = common::binary_rows(f, &gold);
        let merge = evaluate(&p, &g, f, CategorySubset::All13, UncertainPolicy::MergeUncertainAsPositive).unwrap();
        let strict = evaluate(&p, &g, f, CategorySubset::All13, UncertainPolicy::PositiveOnly).unwrap();
        let gap = merge.macro_.recall - strict.macro_.recall;
        worst_gap = worst_gap.min(gap);
        if gap <= 0.0 {
            violations += 1;
        }
    }
    check(violations == 0, format!("100 fixtures, smallest merge minus positive-only macro-recall {worst_gap:.4}"))
}

fn trainer_numerics() -> Check {
    let start = Instant::now();
    let worst = (0..100).map(common::numerics::gradient_check).fold(0.0, f64::max);
    let cfg = TrainConfig::default();
    let lrs = [0, 4000, 8000].map(|s| cfg.lr_at(s));
    let schedule_ok = lrs == [5e-5, 2.5e-5, 1.25e-5];

    let enc = common::numerics::small_encoder(1 << 10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let examples = common::numerics::random_examples(&mut rng, &enc, 40);
    let short = TrainConfig { steps: 300, ..Default::default() };
    let bytes = |m: &TrainedModel| {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        m.save(&p).unwrap();
        std::fs::read(p).unwrap()
    };
    let a = bytes(&train(&examples, &short, &enc).unwrap().0);
    let b = bytes(&train(&examples, &short, &enc).unwrap().0);
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && schedule_ok && a == b && elapsed < Duration::from_secs(30),
        format!(
            "worst gradient relative error {worst:.2e} (< 1e-4); lr at 0/4000/8000 = {:?}; identical model bytes {}; {:.1}s",
            lrs,
            a == b,
            elapsed.as_secs_f64()
        ),
    )
}

fn stub_corpus(n: usize, seed: u64) -> (Vec<cxrlabel::corpus::CorpusRecord>, Vec<LabelVector>) {
    let corpus = common::synthetic_corpus(n, seed);
    let labels = common::stub_labels(&corpus, None);
    (corpus, labels)
}

fn end_to_end_distillation() -> Check {
    let start = Instant::now();
    let (corpus, labels) = stub_corpus(5000, 101);
    // held-out labels use the findings section: reports whose longer
    // section is the impression are normal one-liners with nothing to find
    let held_corpus = common::synthetic_corpus(1000, 202);
    let held_labels = common::stub_labels(&held_corpus, Some(SectionChoice::Findings));
    let cfg = TrainConfig::default().scaled_to(2000);
    let enc = HashedNgramEncoder { max_tokens: cfg.max_tokens, ..Default::default() };

    let examples = build_examples(&labels, &corpus, &enc as &dyn Encoder).unwrap();
    let (model, _) = train(&examples, &cfg, &enc).unwrap();
    let pred = predict_labels(&model, &held_corpus, &held_labels, cfg.threshold).unwrap();
    let f = SectionChoice::Findings;
    let f1 = evaluate(&pred, &held_labels, f, CategorySubset::All13, UncertainPolicy::MergeUncertainAsPositive)
        .unwrap()
        .macro_
        .f1;
    let f1_ok = f1 >= 0.95;

    // learning curve over five seeds; each seed draws its own nested subsets
    let sizes = [500, 1500, 5000];
    let mut worst_drop: f64 = 0.0;
    let mut curve_rows = Vec::new();
    for seed in 0..5u64 {
        let seeded = TrainConfig { seed, ..cfg.clone() };
        let points = learning_curve(
            &corpus,
            &labels,
            &sizes,
            &held_corpus,
            &held_labels,
            &seeded,
            &enc,
            CategorySubset::All13,
        )
        .unwrap();
        let ys: Vec<f64> = points.iter().map(|p| p.macro_f1).collect();
        for w in ys.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        curve_rows.push(format!("[{}]", ys.iter().map(|y| format!("{y:.3}")).collect::<Vec<_>>().join(" ")));
    }
    let curve_ok = worst_drop <= 0.02;
    let elapsed = start.elapsed();
    check(
        f1_ok && curve_ok && elapsed < Duration::from_secs(300),
        format!(
            "held-out findings macro-F1 {f1:.3} (need >= 0.95) with lr {} over {} steps; curve at sizes {:?} for seeds 0-4 {}; worst drop {worst_drop:.3} (<= 0.02); {:.0}s",
            cfg.learning_rate,
            cfg.steps,
            sizes,
            curve_rows.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn warm_start() -> Check {
    let start = Instant::now();
    let enc = HashedNgramEncoder { feature_dim: 1 << 14, ..Default::default() };
    let fit = TrainConfig { steps: 3000, learning_rate: 1e-3, ..Default::default() };

    let (src_corpus, src_labels) = stub_corpus(800, 21);
    let src = build_examples(&src_labels, &src_corpus, &enc as &dyn Encoder).unwrap();
    let (prior, _) = train(&src, &fit, &enc).unwrap();
    let prior_loss = Trainer::new(&src, &fit, &enc)
        .map(|mut t| {
            t.warm_start(&prior).unwrap();
            t.full_loss()
        })
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let prior_path = dir.path().join("prior.bin");
    prior.save(&prior_path).unwrap();

    let (corpus, labels) = stub_corpus(800, 22);
    let ex = build_examples(&labels, &corpus, &enc as &dyn Encoder).unwrap();
    let warm_cfg = TrainConfig { warm_start: Some(prior_path), ..fit.clone() };
    let target = 0.05;
    let cold = steps_to_loss(&ex, &fit, &enc, target, 25).unwrap();
    let warm = steps_to_loss(&ex, &warm_cfg, &enc, target, 25).unwrap();
    let ok = match (warm, cold) {
        (Some(w), Some(c)) => w < c,
        (Some(_), None) => true,
        _ => false,
    };
    let elapsed = start.elapsed();
    check(
        ok && elapsed < Duration::from_secs(120),
        format!(
            "prior loss {prior_loss:.4}; steps to loss {target}: warm {warm:?}, cold {cold:?} (budget {}); {:.1}s",
            fit.steps,
            elapsed.as_secs_f64()
        ),
    )
}

fn cross_tab_integrity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc8);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..30);
        let cells = |rng: &mut ChaCha8Rng| -> Vec<[u8; NUM_CATEGORIES]> {
            (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(0..4))).collect()
        };
        let (a, b) = (cells(&mut rng), cells(&mut rng));
        let sub = if rng.gen_bool(0.5) { CategorySubset::All13 } else { CategorySubset::Comparison10 };
        let f = SectionChoice::Findings;
        let t = &cross_tab(&common::four_status_rows(f, &a), &common::four_status_rows(f, &b), sub).unwrap()[0];
        for (row, pct) in t.counts.iter().zip(t.row_percentages()) {
            if row.iter().sum::<u64>() > 0 {
                let s: f64 = pct.iter().map(|p| p.unwrap()).sum();
                worst = worst.max((s - 100.0).abs());
            }
        }
    }
    let (a, b) = common::three_study_pair();
    let oracle_ok = [CategorySubset::All13, CategorySubset::Comparison10]
        .into_iter()
        .all(|sub| cross_tab(&a, &b, sub).unwrap()[0].counts == common::cross_tab_oracle(&a, &b, sub));
    check(
        worst <= 0.01 && oracle_ok,
        format!("200 random fixtures, worst row-sum error {worst:.2e} (<= 0.01); 3-study oracle match {oracle_ok}"),
    )
}

fn pipeline_idempotence() -> Check {
    let lexicon = MappingLexicon::default_lexicon();
    let template = PromptTemplate::starter(LabelMode::ExtractFindings);
    fn labeler<'a>(
        template: &'a PromptTemplate,
        lexicon: &'a MappingLexicon,
        client: &'a StubProvider,
        cache: Option<&'a ResponseCache>,
    ) -> Labeler<'a> {
        Labeler {
            template,
            lexicon,
            client,
            cache,
            sleeper: &NoSleep,
            options: LabelerOptions { concurrency: 4, ..Default::default() },
        }
    }

    let corpus = common::synthetic_corpus(200, 9);
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let first_client = StubProvider::new(LabelMode::ExtractFindings, lexicon.clone());
    let first = labeler(&template, &lexicon, &first_client, Some(&cache)).batch_label(&corpus, None);
    let second_client = StubProvider::new(LabelMode::ExtractFindings, lexicon.clone());
    let second = labeler(&template, &lexicon, &second_client, Some(&cache)).batch_label(&corpus, None);
    let identical = labels_to_string(&first.labels) == labels_to_string(&second.labels);

    let faulty = common::synthetic_corpus(100, 10);
    let faults = FaultPlan::default().transient("effusion", 2).permanent("pneumothorax").malformed("nodule");
    let client = StubProvider::with_faults(LabelMode::ExtractFindings, lexicon.clone(), faults);
    let out = labeler(&template, &lexicon, &client, None).batch_label(&faulty, None);
    let mut seen: Vec<&str> =
        out.labels.iter().map(|l| l.study_id.as_str()).chain(out.quarantine.iter().map(|q| q.study_id.as_str())).collect();
    seen.sort_unstable();
    let mut want: Vec<&str> = faulty.iter().map(|r| r.study_id.as_str()).collect();
    want.sort_unstable();
    let exactly_once = seen == want && out.labels.len() + out.quarantine.len() == faulty.len();
    check(
        second_client.calls() == 0 && second.stats.network_calls == 0 && identical && exactly_once,
        format!(
            "warm rerun: {} calls, byte-identical {identical}; faults: {} labeled + {} quarantined = {} of {}",
            second_client.calls(),
            out.labels.len(),
            out.quarantine.len(),
            out.labels.len() + out.quarantine.len(),
            faulty.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("aggregation oracle", aggregation_oracle),
        ("distribution oracle", distribution_oracle),
        ("report phrase fixtures", fixture_suite),
        ("uncertain-policy ordering", uncertain_policy_ordering),
        ("trainer numerics", trainer_numerics),
        ("end-to-end distillation", end_to_end_distillation),
        ("warm start", warm_start),
        ("cross-tab integrity", cross_tab_integrity),
        ("pipeline idempotence", pipeline_idempotence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let c = run();
        if !c.pass {
            failed += 1;
        }
        println!("{} {}. {name}: {}", if c.pass { "PASS" } else { "FAIL" }, i + 1, c.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
