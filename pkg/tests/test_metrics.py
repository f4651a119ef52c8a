import math

import numpy as np
import pytest

from cocosum.metrics import (
    REPORT_FIELDS,
    bleu,
    cider,
    evaluate_corpus,
    evaluate_pairs,
    lcs_length,
    meteor,
    meteor_alignment,
    rouge_l,
)
from cocosum.preprocess import write_jsonl

from oracles import brute_lcs, brute_meteor_alignment

s = str.split


def test_bleu_identical_is_one():
    assert bleu(s("a b c d e"), s("a b c d e")) == 1.0


def test_bleu_zero_unigram_overlap():
    assert bleu(s("x y z"), s("a b c")) == 0.0


def test_bleu_brevity_only():
    # every n-gram of the candidate matches; only BP = e^(1 - 5/4) remains
    assert abs(bleu(s("a b c d"), s("a b c d e")) - math.exp(1 - 5 / 4)) <= 1e-9


def test_bleu_hand_computed_partial():
    # p1 = 4/5, p2 = (1+1)/(4+1), p3 = (0+1)/(3+1), p4 = (0+1)/(2+1), BP = e^(1 - 6/5)
    expected = math.exp(1 - 6 / 5) * (0.8 * 0.4 * 0.25 * (1 / 3)) ** 0.25
    assert abs(bleu(s("the cat sat on mat"), s("the cat is on the mat")) - expected) <= 1e-9


def test_bleu_empty_candidate(caplog):
    assert bleu([], s("a b")) == 0.0


def test_rouge_l():
    assert rouge_l(s("a b c"), s("a b c")) == 1.0
    assert rouge_l(s("a b"), s("c d")) == 0.0
    p, r, b2 = 2 / 3, 1.0, 1.2**2
    assert abs(rouge_l(s("a b c"), s("a c")) - (1 + b2) * p * r / (r + b2 * p)) <= 1e-12
    assert rouge_l([], s("a")) == 0.0


def test_lcs_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = list(rng.choice(list("abc"), size=int(rng.integers(0, 8))))
        b = list(rng.choice(list("abc"), size=int(rng.integers(0, 8))))
        assert lcs_length(a, b) == brute_lcs(a, b)


def test_appending_matched_token_never_lowers_recall():
    rng = np.random.default_rng(1)
    for _ in range(200):
        ref = list(rng.choice(list("abcd"), size=int(rng.integers(1, 8))))
        cand = list(rng.choice(list("abcd"), size=int(rng.integers(1, 8))))
        tok = ref[int(rng.integers(len(ref)))]
        assert lcs_length(cand + [tok], ref) >= lcs_length(cand, ref)


def test_meteor_hand_values():
    for m in range(1, 7):
        toks = [f"w{i}" for i in range(m)]
        assert abs(meteor(toks, toks) - (1 - 0.5 / m**3)) <= 1e-9
    assert meteor(s("a b"), s("c d")) == 0.0
    # m = 3, three single-token chunks: F = 1, Pen = 0.5 * (3/3)^3
    assert meteor_alignment(s("the cat sat"), s("the sat cat")) == (3, 3)
    assert abs(meteor(s("the cat sat"), s("the sat cat")) - 0.5) <= 1e-9


def test_meteor_partial_hand_value():
    # m = 2 ("a b" contiguous in both) -> 1 chunk; P = 2/3, R = 2/4
    p, r = 2 / 3, 2 / 4
    f = p * r / (0.9 * p + 0.1 * r)
    expected = f * (1 - 0.5 * (1 / 2) ** 3)
    assert abs(meteor(s("a b x"), s("y a b z")) - expected) <= 1e-9


def test_meteor_alignment_against_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(150):
        c = list(rng.choice(list("abc"), size=int(rng.integers(1, 6))))
        r = list(rng.choice(list("abc"), size=int(rng.integers(1, 6))))
        assert meteor_alignment(c, r) == brute_meteor_alignment(c, r)


def test_cider_identical_distinct_references():
    refs = [s("open the file now"), s("close every socket here"), s("parse json into maps"),
            s("sort the list in place")]
    per, mean = cider(refs, refs)
    assert all(abs(v - 10.0) <= 1e-9 for v in per)
    assert abs(mean - 10.0) <= 1e-9


def test_cider_disjoint_is_zero():
    refs = [s("a b c"), s("d e f"), s("g h i")]
    per, _ = cider([s("x y z")] * 3, refs)
    assert per == [0.0, 0.0, 0.0]


def test_cider_two_sample_corpus_hand_value():
    # R = 2: every n-gram has df >= 1 so log(2 / (1 + df)) <= 0, clamped to 0
    per, mean = cider([s("a b"), s("a c")], [s("a d"), s("e f")])
    assert per == [0.0, 0.0] and mean == 0.0


def test_cider_four_sample_hand_value():
    refs = [s("x y"), s("x z"), s("u v"), s("w t")]
    cands = [s("x z"), s("x z"), s("u u"), s("q r")]
    l43, l2 = math.log(4 / 3), math.log(2)
    cos1 = l43**2 / (l43**2 + l2**2)  # x shared, z vs y differ; no bigram overlap
    expected = [5 * cos1, 10.0, 5 / math.sqrt(2), 0.0]
    per, _ = cider(cands, refs, max_n=2)
    np.testing.assert_allclose(per, expected, rtol=0, atol=1e-12)


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(3)
    words = list("abcdefg")
    cands = [list(rng.choice(words, size=int(rng.integers(1, 7)))) for _ in range(12)]
    refs = [list(rng.choice(words, size=int(rng.integers(1, 7)))) for _ in range(12)]
    a = evaluate_pairs(cands, refs).as_dict()
    perm = rng.permutation(12)
    b = evaluate_pairs([cands[i] for i in perm], [refs[i] for i in perm]).as_dict()
    for k in REPORT_FIELDS:
        assert a[k] == pytest.approx(b[k], abs=1e-12)


def test_evaluate_corpus(tmp_path):
    refs = [{"id": str(i), "tokens": t} for i, t in enumerate(
        [s("returns the list size"), s("adds an item to it"), s("removes all entries now")])]
    write_jsonl(tmp_path / "r.jsonl", refs)
    report = evaluate_corpus(tmp_path / "r.jsonl", tmp_path / "r.jsonl")
    d = report.as_dict()
    assert list(d) == ["BLEU-4", "METEOR", "ROUGE-L", "CIDER"]
    assert d["BLEU-4"] == 100.0 and d["ROUGE-L"] == 100.0
    assert abs(d["CIDER"] - 10.0) <= 1e-9
    assert report.text().splitlines()[0].split("\t") == list(REPORT_FIELDS)

    # under four tokens there is no 4-gram vector, so that order contributes 0
    short = [{"id": "0", "tokens": s("a b c")}, {"id": "1", "tokens": s("d e f")}, {"id": "2", "tokens": s("g h i")}]
    write_jsonl(tmp_path / "s.jsonl", short)
    assert abs(evaluate_corpus(tmp_path / "s.jsonl", tmp_path / "s.jsonl").cider - 7.5) <= 1e-9

    write_jsonl(tmp_path / "p.jsonl", refs[:2])
    with pytest.raises(KeyError, match="2"):
        evaluate_corpus(tmp_path / "p.jsonl", tmp_path / "r.jsonl")
    write_jsonl(tmp_path / "q.jsonl", [{"id": "zz", "tokens": ["a"]}])
    with pytest.raises(KeyError):
        evaluate_corpus(tmp_path / "q.jsonl", tmp_path / "r.jsonl")
