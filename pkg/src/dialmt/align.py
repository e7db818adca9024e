"""IBM Model 1 training, Viterbi alignment and grow-diag-final symmetrization.

Alignments are 0-indexed ``(source, target)`` link sets, serialized in
Pharaoh format (``0-0 1-2 ...``, sorted).
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import DataError
from .corpus import ParallelCorpus

NULL = "<NULL>"
FLOOR = 1e-10
# Alignment prior of the NULL position; the rest is shared uniformly by the
# real source words.  ``None`` gives plain Model 1 (uniform over l+1).
NULL_PRIOR = 0.2

Pair = tuple[Sequence[str], Sequence[str]]


@dataclass(frozen=True)
class AlignmentSet:
    links: frozenset[tuple[int, int]]
    source_len: int
    target_len: int

    def __post_init__(self):
        if not isinstance(self.links, frozenset):
            object.__setattr__(self, "links", frozenset(self.links))
        for i, j in self.links:
            if not (0 <= i < self.source_len and 0 <= j < self.target_len):
                raise ValueError(f"link {i}-{j} outside {self.source_len}x{self.target_len}")

    def __len__(self):
        return len(self.links)

    def __iter__(self):
        return iter(sorted(self.links))

    def __contains__(self, link):
        return link in self.links

    def transposed(self) -> "AlignmentSet":
        return AlignmentSet(frozenset((j, i) for i, j in self.links), self.target_len, self.source_len)

    def to_pharaoh(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in sorted(self.links))

    @classmethod
    def from_pharaoh(cls, line: str, source_len: int, target_len: int) -> "AlignmentSet":
        links = set()
        for item in line.split():
            i, _, j = item.partition("-")
            links.add((int(i), int(j)))
        return cls(frozenset(links), source_len, target_len)


class TranslationTable:
    """Lexical translation probabilities t(target | source), NULL included."""

    def __init__(self, probs: dict[str, dict[str, float]]):
        # probs[source][target]
        self.probs = probs

    def t(self, target: str, source: str) -> float:
        row = self.probs.get(source)
        if row is None:
            return FLOOR
        return row.get(target, FLOOR)

    def row_sums(self) -> dict[str, float]:
        return {s: math.fsum(row.values()) for s, row in self.probs.items()}

    def __contains__(self, source: str) -> bool:
        return source in self.probs

    def items(self):
        for s in sorted(self.probs):
            for t in sorted(self.probs[s]):
                yield s, t, self.probs[s][t]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for s, t, p in self.items():
                fh.write(f"{s}\t{t}\t{p!r}\n")

    @classmethod
    def read(cls, path) -> "TranslationTable":
        probs: dict[str, dict[str, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                s, t, p = line.rstrip("\n").split("\t")
                probs.setdefault(s, {})[t] = float(p)
        return cls(probs)


def _word_pairs(corpus: ParallelCorpus | Iterable[Pair]) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    if isinstance(corpus, ParallelCorpus):
        return [(s.words, t.words) for s, t in corpus]
    return [(tuple(s), tuple(t)) for s, t in corpus]


def _alignment_prior(src_len: int, null_prior: float | None) -> tuple[float, float]:
    """(NULL weight, weight of each real source word) for a sentence of ``src_len`` words."""
    if null_prior is None:
        return 1.0 / (src_len + 1), 1.0 / (src_len + 1)
    return null_prior, (1.0 - null_prior) / src_len


def corpus_log_likelihood(ttable: TranslationTable, corpus, null_prior: float | None = NULL_PRIOR) -> float:
    """Model 1 log-likelihood (natural log), dropping the length term."""
    total = 0.0
    for src, tgt in _word_pairs(corpus):
        p_null, p_word = _alignment_prior(len(src), null_prior)
        for f in tgt:
            mass = p_null * ttable.t(f, NULL) + p_word * math.fsum(ttable.t(f, e) for e in src)
            total += math.log(mass)
    return total


def train_ibm1(corpus, iterations: int = 5, callback=None, null_prior: float | None = NULL_PRIOR) -> TranslationTable:
    """EM training from a uniform start.

    A NULL word is prepended to every source sentence.  ``callback(iteration,
    table)`` is invoked after every iteration, which is how tests observe the
    likelihood trajectory.
    """
    pairs = _word_pairs(corpus)
    if not pairs:
        raise DataError("cannot train IBM Model 1 on an empty corpus")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if null_prior is not None and not 0.0 < null_prior < 1.0:
        raise ValueError("null_prior must lie strictly between 0 and 1")
    sents = []
    for s, t in pairs:
        if not s or not t:
            raise DataError("sentence pair with an empty side")
        p_null, p_word = _alignment_prior(len(s), null_prior)
        sents.append(((NULL,) + s, t, (p_null,) + (p_word,) * len(s)))
    probs: dict[str, dict[str, float]] | None = None

    for it in range(iterations):
        counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        for src, tgt, prior in sents:
            if probs is None:
                # uniform t: the posterior is the alignment prior itself
                for f in tgt:
                    for e, a in zip(src, prior):
                        counts[e][f] += a
                continue
            rows = [probs[e] for e in src]
            for f in tgt:
                weights = [a * row[f] for a, row in zip(prior, rows)]
                z = sum(weights)
                for e, w in zip(src, weights):
                    counts[e][f] += w / z
        probs = {}
        for e, row in counts.items():
            z = math.fsum(row.values())
            probs[e] = {f: c / z for f, c in row.items()}
        if callback is not None:
            callback(it + 1, TranslationTable(probs))
    return TranslationTable(probs)


def viterbi_align(ttable: TranslationTable, pair: Pair) -> AlignmentSet:
    """Link each target word to its most probable source word.

    NULL only wins when strictly more probable than every real source word;
    ties among source positions go to the smaller index.
    """
    src, tgt = pair
    src = src.words if hasattr(src, "words") else tuple(src)
    tgt = tgt.words if hasattr(tgt, "words") else tuple(tgt)
    links = set()
    for j, f in enumerate(tgt):
        best_i, best_p = -1, -1.0
        for i, e in enumerate(src):
            p = ttable.t(f, e)
            if p > best_p:
                best_i, best_p = i, p
        if best_i >= 0 and ttable.t(f, NULL) <= best_p:
            links.add((best_i, j))
    return AlignmentSet(frozenset(links), len(src), len(tgt))


NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def grow_diag_final(fwd: AlignmentSet, rev: AlignmentSet) -> AlignmentSet:
    """Symmetrize two directional alignments given in the same orientation."""
    if (fwd.source_len, fwd.target_len) != (rev.source_len, rev.target_len):
        raise DataError(
            f"alignment dimensions differ: {fwd.source_len}x{fwd.target_len} "
            f"vs {rev.source_len}x{rev.target_len}"
        )
    n, m = fwd.source_len, fwd.target_len
    union = fwd.links | rev.links
    current = set(fwd.links & rev.links)
    src_aligned = {i for i, _ in current}
    tgt_aligned = {j for _, j in current}

    def add(i, j):
        current.add((i, j))
        src_aligned.add(i)
        tgt_aligned.add(j)

    added = True
    while added:
        added = False
        for i in range(n):
            for j in range(m):
                if (i, j) not in current:
                    continue
                for di, dj in NEIGHBORS:
                    ni, nj = i + di, j + dj
                    if (ni, nj) in current or (ni, nj) not in union:
                        continue
                    if ni not in src_aligned or nj not in tgt_aligned:
                        add(ni, nj)
                        added = True

    for directional in (fwd.links, rev.links):
        for i in range(n):
            for j in range(m):
                if (i, j) in directional and (i not in src_aligned or j not in tgt_aligned):
                    add(i, j)

    return AlignmentSet(frozenset(current), n, m)


def align_corpus(corpus: ParallelCorpus, iterations: int = 5):
    """Train both directions, Viterbi-align, symmetrize.

    Returns ``(ttable_fwd, ttable_rev, alignments)`` where ``ttable_fwd``
    holds t(target|source) and ``ttable_rev`` holds t(source|target).
    """
    fwd_table = train_ibm1(corpus, iterations)
    rev_table = train_ibm1(corpus.swapped(), iterations)
    alignments = []
    for src, tgt in corpus:
        a_fwd = viterbi_align(fwd_table, (src.words, tgt.words))
        a_rev = viterbi_align(rev_table, (tgt.words, src.words)).transposed()
        alignments.append(grow_diag_final(a_fwd, a_rev))
    return fwd_table, rev_table, alignments


def write_alignments(path, alignments: Iterable[AlignmentSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in alignments:
            fh.write(a.to_pharaoh() + "\n")


def read_alignments(path, corpus: ParallelCorpus) -> list[AlignmentSet]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) != len(corpus):
        raise DataError(f"alignment count mismatch {len(lines)} vs {len(corpus)}")
    out = []
    for k, (line, (s, t)) in enumerate(zip(lines, corpus)):
        try:
            out.append(AlignmentSet.from_pharaoh(line, len(s), len(t)))
        except ValueError as exc:
            raise DataError(f"alignment line {k + 1}: {exc}") from None
    return out
