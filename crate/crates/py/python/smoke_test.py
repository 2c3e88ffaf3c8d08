"""Smoke test for the cxrlabel_py extension.

Build and run from the workspace root:

    cargo build --release -p cxrlabel-py --features extension-module
    cp target/release/libcxrlabel_py.so crates/py/python/cxrlabel_py.so
    python3 crates/py/python/smoke_test.py
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import cxrlabel_py as cx  # noqa: E402


def main():
    cats = cx.categories()
    assert len(cats) == 13, cats
    assert "effusion" in cats

    assert cx.normalize_text("  Small   effusion.\n ") == "Small effusion."
    findings, impression = cx.split_sections("FINDINGS: Small effusion. IMPRESSION: Effusion.")
    assert findings == "Small effusion." and impression == "Effusion.", (findings, impression)
    assert cx.select_section("FINDINGS: Small left effusion. IMPRESSION: Effusion.")[0] == "findings"

    lex = cx.Lexicon.default()
    assert lex.map_phrase("calcified granuloma") == ["nodule"]
    assert lex.map_phrase("fractured sternotomy wires") == []
    assert lex.rule_label("No pneumothorax. Small left pleural effusion.") == ["effusion"]
    statuses = lex.rule_statuses("No pneumothorax. Possible consolidation.")
    assert statuses["pneumothorax"] == "neg" and statuses["consolidation"] == "unc", statuses
    assert cx.Lexicon.from_toml(lex.to_toml()).map_phrase("granuloma") == ["nodule"]

    prompt = cx.build_prompt("Small left pleural effusion.")
    assert prompt.rstrip().endswith("Answer:"), prompt[-80:]
    binary = cx.stub_label("Small left pleural effusion. No pneumothorax.")
    assert binary["effusion"] == "1" and binary["pneumothorax"] == "0", binary
    four = cx.stub_label("Small left pleural effusion. No pneumothorax.", mode="four-status")
    assert four["effusion"] == "pos" and four["pneumothorax"] == "neg", four

    reports = cx.synth_reports(300, seed=3)
    assert len(reports) == 300
    texts = [cx.select_section(raw)[1] for _, raw in reports]
    labels = [lex.rule_label(t) for t in texts]
    model = cx.Model.train(texts, labels, steps=300, learning_rate=5e-3, feature_dim=1 << 14, seed=1)
    probs = model.probabilities(texts[0])
    assert set(probs) == set(cats) and all(0.0 <= p <= 1.0 for p in probs.values())
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.bin")
        model.save(path)
        again = cx.Model.load(path)
        assert again.probabilities(texts[0]) == probs
        assert again.manifest_hash == model.manifest_hash and len(model.manifest_hash) == 64

    preds = [model.predict(t) for t in texts]
    scores = cx.evaluate(preds, labels)
    assert set(scores) == set(cats) | {"micro", "macro"}
    assert 0.0 <= scores["macro"]["f1"] <= 1.0
    assert cx.evaluate(labels, labels)["micro"]["f1"] == 1.0

    assert abs(cx.macro_mean({c: 0.5 for c in cats}) - 0.5) < 1e-12
    dist = cx.distribution([["effusion"], [], ["effusion", "nodule"]])
    assert dist["effusion"] == 2 and dist["nodule"] == 1 and dist["no_abnormality"] == 1, dist

    try:
        cx.stub_label("x", mode="nonsense")
    except ValueError:
        pass
    else:
        raise AssertionError("bad mode accepted")

    print("smoke test ok: macro-F1 %.3f on %d training reports" % (scores["macro"]["f1"], len(texts)))


if __name__ == "__main__":
    main()
