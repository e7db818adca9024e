"""Corpus-level single-reference BLEU and OOV rates."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import DataError

MAX_ORDER = 4


def _words(s) -> tuple[str, ...]:
    if hasattr(s, "words"):
        return s.words
    if isinstance(s, str):
        return tuple(s.split())
    return tuple(s)


@dataclass(frozen=True)
class BleuStats:
    """Sufficient statistics: clipped matches and totals per order, lengths."""

    matches: tuple[int, ...]
    totals: tuple[int, ...]
    hyp_length: int
    ref_length: int

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
            self.hyp_length + other.hyp_length,
            self.ref_length + other.ref_length,
        )

    @classmethod
    def zero(cls) -> "BleuStats":
        return cls((0,) * MAX_ORDER, (0,) * MAX_ORDER, 0, 0)


def sentence_stats(hyp, ref) -> BleuStats:
    h, r = _words(hyp), _words(ref)
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        hc = Counter(h[k:k + n] for k in range(len(h) - n + 1))
        rc = Counter(r[k:k + n] for k in range(len(r) - n + 1))
        matches.append(sum(min(c, rc[g]) for g, c in hc.items()))
        totals.append(max(len(h) - n + 1, 0))
    return BleuStats(tuple(matches), tuple(totals), len(h), len(r))


@dataclass(frozen=True)
class BleuReport:
    score: float
    ngram_precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_length: int
    ref_length: int

    def recomputed_score(self) -> float:
        if min(self.ngram_precisions) == 0:
            return 0.0
        log_mean = sum(math.log(p) for p in self.ngram_precisions) / len(self.ngram_precisions)
        return 100.0 * self.brevity_penalty * math.exp(log_mean)

    def __str__(self):
        precs = "/".join(f"{100 * p:.1f}" for p in self.ngram_precisions)
        return (
            f"BLEU = {self.score:.2f}, {precs} (BP={self.brevity_penalty:.3f}, "
            f"hyp_len={self.hyp_length}, ref_len={self.ref_length})"
        )


def report_from_stats(stats: BleuStats) -> BleuReport:
    precisions = tuple(m / t if t else 0.0 for m, t in zip(stats.matches, stats.totals))
    h, r = stats.hyp_length, stats.ref_length
    if h == 0:
        bp = 0.0
    elif h < r:
        bp = math.exp(1 - r / h)
    else:
        bp = 1.0
    if min(precisions) == 0 or bp == 0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    return BleuReport(score, precisions, bp, h, r)


def bleu(hypotheses: Sequence, references: Sequence) -> BleuReport:
    """Unsmoothed corpus BLEU over whitespace tokens of detokenized text."""
    if len(hypotheses) != len(references):
        raise DataError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    total = BleuStats.zero()
    for h, r in zip(hypotheses, references):
        total = total + sentence_stats(h, r)
    return report_from_stats(total)


def oov_rate(test_source: Iterable, known_vocabulary: set) -> float:
    """Percentage of test source tokens that no table can translate as a unigram."""
    total = unknown = 0
    for sentence in test_source:
        for w in _words(sentence):
            total += 1
            unknown += w not in known_vocabulary
    if total == 0:
        raise DataError("OOV rate of an empty test set is undefined")
    return 100.0 * unknown / total
