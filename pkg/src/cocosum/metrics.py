"""Sentence-level BLEU, ROUGE-L, METEOR and corpus-aware CIDEr."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .preprocess import read_jsonl

log = logging.getLogger(__name__)

REPORT_FIELDS = ("BLEU-4", "METEOR", "ROUGE-L", "CIDER")


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Smoothed sentence BLEU; n >= 2 precisions use (matches + 1) / (total + 1)."""
    c, r = len(candidate), len(reference)
    if c == 0:
        log.warning("BLEU of an empty candidate is 0")
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand = ngrams(candidate, n)
        ref = ngrams(reference, n)
        matches = sum(min(k, ref[g]) for g, k in cand.items())
        total = max(c - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            p = matches / total
        else:
            p = (matches + 1) / (total + 1)
        log_sum += math.log(p) / max_n
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str], beta: float = 1.2) -> float:
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


def meteor_alignment(candidate: Sequence[str], reference: Sequence[str]) -> tuple[int, int]:
    """(matches, chunks) for a maximum exact one-to-one alignment with fewest chunks."""
    cand_counts, ref_counts = Counter(candidate), Counter(reference)
    need = {w: min(k, ref_counts[w]) for w, k in cand_counts.items() if w in ref_counts}
    m = sum(need.values())
    if m == 0:
        return 0, 0
    ref_positions: dict[str, list[int]] = {}
    for j, w in enumerate(reference):
        if w in need:
            ref_positions.setdefault(w, []).append(j)
    word_masks = {w: sum(1 << j for j in js) for w, js in ref_positions.items()}
    # occurrences of each word from position i onwards (inclusive)
    remaining = []
    tail: Counter = Counter()
    for w in reversed(candidate):
        tail[w] += 1
        remaining.append(tail[w])
    remaining.reverse()
    n = len(candidate)

    @lru_cache(maxsize=None)
    def best(i: int, used: int, prev: int) -> float:
        if i == n:
            return 0.0
        w = candidate[i]
        if w not in need:
            return best(i + 1, used, -1)
        still = need[w] - bin(used & word_masks[w]).count("1")
        result = math.inf
        if still <= remaining[i] - 1:
            result = best(i + 1, used, -1)
        if still > 0:
            for j in ref_positions[w]:
                if used >> j & 1:
                    continue
                cost = 0 if prev >= 0 and j == prev + 1 else 1
                result = min(result, cost + best(i + 1, used | (1 << j), j))
        return result

    chunks = int(best(0, 0, -1))
    best.cache_clear()
    return m, chunks


def meteor(
    candidate: Sequence[str],
    reference: Sequence[str],
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
) -> float:
    if not candidate or not reference:
        return 0.0
    m, ch = meteor_alignment(candidate, reference)
    if m == 0:
        return 0.0
    p = m / len(candidate)
    r = m / len(reference)
    f = p * r / (alpha * p + (1 - alpha) * r)
    pen = gamma * (ch / m) ** beta
    return f * (1 - pen)


@dataclass
class CorpusStats:
    doc_freq: list[Counter]  # index n-1 -> n-gram -> number of references containing it
    ref_count: int

    def idf(self, gram: tuple, n: int) -> float:
        return max(0.0, math.log(self.ref_count / (1.0 + self.doc_freq[n - 1][gram])))


def corpus_stats(references: Sequence[Sequence[str]], max_n: int = 4) -> CorpusStats:
    if not references:
        raise ValueError("CIDEr needs at least one reference")
    df = [Counter() for _ in range(max_n)]
    for ref in references:
        for n in range(1, max_n + 1):
            df[n - 1].update(ngrams(ref, n).keys())
    return CorpusStats(df, len(references))


def _tfidf(tokens: Sequence[str], n: int, stats: CorpusStats) -> dict:
    return {g: k * stats.idf(g, n) for g, k in ngrams(tokens, n).items()}


def _cosine(u: dict, v: dict) -> float:
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(x * v.get(g, 0.0) for g, x in u.items()) / (nu * nv)


def cider(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    stats: CorpusStats | None = None,
    max_n: int = 4,
) -> tuple[list[float], float]:
    """Per-sample CIDEr in [0, 10] (weights 10/N) and their mean."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    if stats is None:
        stats = corpus_stats(references, max_n)
    if stats.ref_count == 0:
        raise ValueError("empty corpus statistics")
    scores = []
    for cand, ref in zip(candidates, references):
        total = 0.0
        for n in range(1, max_n + 1):
            total += (10.0 / max_n) * _cosine(_tfidf(cand, n, stats), _tfidf(ref, n, stats))
        scores.append(total)
    return scores, (sum(scores) / len(scores) if scores else 0.0)


@dataclass
class EvaluationReport:
    bleu4: float
    meteor: float
    rouge_l: float
    cider: float
    count: int
    per_sample: dict[str, list[float]]

    def as_dict(self) -> dict:
        return dict(zip(REPORT_FIELDS, (self.bleu4, self.meteor, self.rouge_l, self.cider)))

    def text(self) -> str:
        d = self.as_dict()
        head = "\t".join(REPORT_FIELDS)
        row = "\t".join(f"{d[k]:.2f}" if k != "CIDER" else f"{d[k]:.4f}" for k in REPORT_FIELDS)
        return f"{head}\n{row}\n"


def evaluate_pairs(candidates: list[list[str]], references: list[list[str]]) -> EvaluationReport:
    if not candidates:
        raise ValueError("nothing to evaluate")
    b = [bleu(c, r) for c, r in zip(candidates, references)]
    m = [meteor(c, r) for c, r in zip(candidates, references)]
    rl = [rouge_l(c, r) for c, r in zip(candidates, references)]
    ci, ci_mean = cider(candidates, references)
    n = len(candidates)
    return EvaluationReport(
        bleu4=100.0 * sum(b) / n,
        meteor=100.0 * sum(m) / n,
        rouge_l=100.0 * sum(rl) / n,
        cider=ci_mean,
        count=n,
        per_sample={"BLEU-4": b, "METEOR": m, "ROUGE-L": rl, "CIDER": ci},
    )


def _read_tokens(path: str | Path) -> dict[str, list[str]]:
    out = {}
    for rec in read_jsonl(path):
        toks = rec["tokens"]
        out[str(rec["id"])] = toks.split() if isinstance(toks, str) else [str(t) for t in toks]
    return out


def evaluate_corpus(predictions: str | Path, references: str | Path) -> EvaluationReport:
    preds = _read_tokens(predictions)
    refs = _read_tokens(references)
    missing_pred = sorted(set(refs) - set(preds))
    missing_ref = sorted(set(preds) - set(refs))
    if missing_pred or missing_ref or not refs:
        raise KeyError(
            "prediction/reference ids do not match; "
            f"missing predictions: {missing_pred}; missing references: {missing_ref}"
        )
    ids = sorted(refs)
    return evaluate_pairs([preds[i] for i in ids], [refs[i] for i in ids])
