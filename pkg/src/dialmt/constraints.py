"""Morpho-syntactic property distributions and constraint features.

A property set is the conjunction of definiteness, number, gender and POS.
From the aligned training corpus we estimate how likely each source property
set is to be aligned with each target property set (and the reverse), with
unaligned tokens paired against the empty set of a null token.  Every entry
of a pivoted phrase table then gets two scores::

    W_s = 1/A * sum over a of P(MLE(i) | MLE(j))
    W_t = 1/B * sum over b of P(MLE(j) | MLE(i))

where ``a`` is the entry's alignment plus a null link for each unaligned
source token, ``b`` likewise from the target side, and A, B their sizes.
The MLE picks, per aligned token pair, the property sets (among all those
the token types were ever analyzed with) maximizing the directional
probability.

Variants that require MLE pairs to have been seen in training, or property
sequences to be syntactically feasible, were tried in the original work
without benefit and are deliberately left out.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import DataError
from .align import AlignmentSet
from .corpus import ParallelCorpus, Sentence
from .morphology import (
    CORE_FEATURES,
    EMPTY_PROPERTIES,
    NA_PROPERTIES,
    AnalyzerLexicon,
    PropertySet,
    analyze,
    segment_with_properties,
)
from .phrases import Phrase, PhraseTable

EPSILON = 1e-6
MORPH_FEATURES = ("morph_ws", "morph_wt")
SOURCE_GIVEN_TARGET = "source-given-target"
TARGET_GIVEN_SOURCE = "target-given-source"


def _lexicon_pair(lexicon) -> tuple[AnalyzerLexicon, AnalyzerLexicon]:
    if isinstance(lexicon, AnalyzerLexicon):
        return lexicon, lexicon
    src, tgt = lexicon
    return src, tgt


class TypePropertyInventory:
    """All property sets each (segmented) token type was analyzed with."""

    def __init__(self, sets: dict[str, frozenset[PropertySet]] | None = None):
        self.sets = dict(sets or {})

    def get(self, token_type: str | None) -> frozenset[PropertySet]:
        if token_type is None:
            return frozenset({EMPTY_PROPERTIES})
        return self.sets.get(token_type, frozenset({NA_PROPERTIES}))

    def __len__(self):
        return len(self.sets)


def build_property_inventory(corpora: Iterable[Iterable[Sentence]], lexicon: AnalyzerLexicon) -> TypePropertyInventory:
    """Collect, for every token type produced by segmenting the words of
    ``corpora``, the property sets of all lexicon analyses."""
    seen_words: set[str] = set()
    sets: dict[str, set[PropertySet]] = {}
    for corpus in corpora:
        for sentence in corpus:
            for tok in sentence:
                if tok.surface in seen_words:
                    continue
                seen_words.add(tok.surface)
                for analysis in analyze(lexicon, tok):
                    for seg, props in zip(analysis.segments, analysis.segment_properties()):
                        sets.setdefault(seg.surface, set()).add(props)
    return TypePropertyInventory({k: frozenset(v) for k, v in sets.items()})


@dataclass
class PropertyDistribution:
    counts: Counter = field(default_factory=Counter)  # (source set, target set) -> count
    epsilon: float = EPSILON

    def __post_init__(self):
        self._fwd: dict[tuple[PropertySet, PropertySet], float] = {}
        self._bwd: dict[tuple[PropertySet, PropertySet], float] = {}
        by_q: Counter = Counter()
        by_p: Counter = Counter()
        for (p, q), c in self.counts.items():
            by_q[q] += c
            by_p[p] += c
        for (p, q), c in self.counts.items():
            self._fwd[(p, q)] = c / by_q[q]
            self._bwd[(p, q)] = c / by_p[p]

    @property
    def fwd(self) -> dict:
        """(p, q) -> P(source set p | target set q)."""
        return self._fwd

    @property
    def bwd(self) -> dict:
        """(p, q) -> P(target set q | source set p)."""
        return self._bwd

    def source_given_target(self, p: PropertySet, q: PropertySet) -> float:
        return self._fwd.get((p, q), self.epsilon)

    def target_given_source(self, p: PropertySet, q: PropertySet) -> float:
        return self._bwd.get((p, q), self.epsilon)

    def to_tsv(self) -> str:
        rows = ["source\ttarget\tcount\tp_source_given_target\tp_target_given_source"]
        for (p, q), c in sorted(self.counts.items(), key=lambda kv: (kv[0][0].key(), kv[0][1].key())):
            rows.append(f"{p.key()}\t{q.key()}\t{c}\t{self._fwd[(p, q)]!r}\t{self._bwd[(p, q)]!r}")
        return "\n".join(rows) + "\n"


def _analyzed_pairs(train: ParallelCorpus, alignments: Sequence[AlignmentSet], lexicon):
    src_lex, tgt_lex = _lexicon_pair(lexicon)
    if len(train) != len(alignments):
        raise DataError(f"{len(train)} sentence pairs but {len(alignments)} alignments")
    for k, ((s, t), a) in enumerate(zip(train, alignments)):
        s_seg, s_props = segment_with_properties(src_lex, s)
        t_seg, t_props = segment_with_properties(tgt_lex, t)
        if (len(s_seg), len(t_seg)) != (a.source_len, a.target_len):
            raise DataError(
                f"pair {k}: segmented lengths {len(s_seg)}x{len(t_seg)} do not match "
                f"alignment {a.source_len}x{a.target_len}"
            )
        yield s_props, t_props, a


def estimate_property_distributions(train: ParallelCorpus, alignments: Sequence[AlignmentSet], lexicon, epsilon: float = EPSILON) -> PropertyDistribution:
    """Relative frequencies of aligned one-best property sets.

    ``train`` holds unsegmented sentences; ``alignments`` refer to their D3
    segmentation under ``lexicon`` (one lexicon, or a (source, target) pair).
    """
    counts: Counter = Counter()
    for s_props, t_props, a in _analyzed_pairs(train, alignments, lexicon):
        src_linked = set()
        tgt_linked = set()
        for i, j in a.links:
            counts[(s_props[i], t_props[j])] += 1
            src_linked.add(i)
            tgt_linked.add(j)
        for i, p in enumerate(s_props):
            if i not in src_linked:
                counts[(p, EMPTY_PROPERTIES)] += 1
        for j, q in enumerate(t_props):
            if j not in tgt_linked:
                counts[(EMPTY_PROPERTIES, q)] += 1
    return PropertyDistribution(counts, epsilon)


def _known_features(lexicon) -> set[str]:
    names = set(CORE_FEATURES)
    for lex in _lexicon_pair(lexicon):
        for analyses in lex.entries.values():
            for a in analyses:
                names.update(k for k, _ in a.properties.extended)
    return names


def measure_feature_consistency(train: ParallelCorpus, alignments: Sequence[AlignmentSet], lexicon, feature: str) -> float:
    """Percentage of alignment links whose two tokens share the feature value."""
    if feature not in _known_features(lexicon):
        raise DataError(f"unknown feature {feature!r}")
    kept = total = 0
    for s_props, t_props, a in _analyzed_pairs(train, alignments, lexicon):
        for i, j in a.links:
            total += 1
            kept += s_props[i].value(feature) == t_props[j].value(feature)
    return 100.0 * kept / total if total else 0.0


def consistency_report(train, alignments, lexicon, features: Sequence[str]) -> str:
    lines = ["feature\tpercentage"]
    for f in features:
        lines.append(f"{f}\t{measure_feature_consistency(train, alignments, lexicon, f):.2f}")
    return "\n".join(lines) + "\n"


def _inventory_pair(inventory):
    if isinstance(inventory, TypePropertyInventory):
        return inventory, inventory
    return inventory


def mle_property_pair(i_type: str | None, j_type: str | None, direction: str, inventory, dist: PropertyDistribution) -> tuple[PropertySet, PropertySet]:
    """Most likely (source set, target set) for an aligned token pair.

    ``None`` stands for the null token.  Ties go to the lexicographically
    smallest serialized pair.
    """
    src_inv, tgt_inv = _inventory_pair(inventory)
    if direction == SOURCE_GIVEN_TARGET:
        prob = dist.source_given_target
    elif direction == TARGET_GIVEN_SOURCE:
        prob = dist.target_given_source
    else:
        raise ValueError(f"unknown direction {direction!r}")
    best = None
    for p in src_inv.get(i_type):
        for q in tgt_inv.get(j_type):
            rank = (-prob(p, q), p.key(), q.key())
            if best is None or rank < best[0]:
                best = (rank, p, q)
    return best[1], best[2]


class _Scorer:
    """Memoizes MLE probabilities per (source type, target type, direction)."""

    def __init__(self, inventory, dist):
        self.inventory = inventory
        self.dist = dist
        self.cache: dict = {}

    def prob(self, i_type, j_type, direction) -> float:
        key = (i_type, j_type, direction)
        hit = self.cache.get(key)
        if hit is None:
            p, q = mle_property_pair(i_type, j_type, direction, self.inventory, self.dist)
            if direction == SOURCE_GIVEN_TARGET:
                hit = self.dist.source_given_target(p, q)
            else:
                hit = self.dist.target_given_source(p, q)
            self.cache[key] = hit
        return hit

    def scores(self, source: Phrase, target: Phrase, alignment: AlignmentSet) -> tuple[float, float]:
        links = sorted(alignment.links)
        src_linked = {i for i, _ in links}
        tgt_linked = {j for _, j in links}
        a = [(source[i], target[j]) for i, j in links]
        a += [(source[i], None) for i in range(len(source)) if i not in src_linked]
        b = [(source[i], target[j]) for i, j in links]
        b += [(None, target[j]) for j in range(len(target)) if j not in tgt_linked]
        w_s = sum(self.prob(i, j, SOURCE_GIVEN_TARGET) for i, j in a) / len(a)
        w_t = sum(self.prob(i, j, TARGET_GIVEN_SOURCE) for i, j in b) / len(b)
        return w_s, w_t


def morph_constraint_scores(source: Phrase, target: Phrase, alignment: AlignmentSet, inventory, dist: PropertyDistribution) -> tuple[float, float]:
    """(W_s, W_t) for one phrase pair with its source-target alignment."""
    return _Scorer(inventory, dist).scores(tuple(source), tuple(target), alignment)


def annotate_phrase_table(table: PhraseTable, inventory, dist: PropertyDistribution) -> PhraseTable:
    scorer = _Scorer(inventory, dist)

    def values(key, entry):
        if not entry.alignment.links:
            return (dist.epsilon, dist.epsilon)
        return scorer.scores(key[0], key[1], entry.alignment)

    return table.extended(MORPH_FEATURES, values)
