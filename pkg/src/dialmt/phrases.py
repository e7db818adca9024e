"""Consistent phrase-pair extraction, scoring and the Moses phrase-table format.

Table lines look like::

    src ||| tgt ||| f1 f2 ... fk ||| 0-0 1-1 ||| c_st c_s c_t

preceded by a ``# features: name1 name2 ...`` header that fixes the order of
the feature columns.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import DataError
from .align import NULL, AlignmentSet, TranslationTable

BASE_FEATURES = ("p_s_given_t", "lex_s_given_t", "p_t_given_s", "lex_t_given_s", "phrase_penalty")
PROBABILITY_FEATURES = BASE_FEATURES[:4]
PHRASE_PENALTY = math.e

Phrase = tuple[str, ...]


@dataclass(frozen=True)
class PhrasePair:
    source: Phrase
    target: Phrase
    internal_alignment: AlignmentSet
    count: int = 1


def extract_phrases(pair, alignment: AlignmentSet, max_len: int = 8) -> list[PhrasePair]:
    """All phrase pairs consistent with ``alignment``, up to ``max_len`` on each side."""
    src, tgt = pair
    src = src.words if hasattr(src, "words") else tuple(src)
    tgt = tgt.words if hasattr(tgt, "words") else tuple(tgt)
    n, m = len(src), len(tgt)
    if (alignment.source_len, alignment.target_len) != (n, m):
        raise DataError(
            f"alignment is {alignment.source_len}x{alignment.target_len} but pair is {n}x{m}"
        )
    links = sorted(alignment.links)
    tgt_aligned = [False] * m
    for _, j in links:
        tgt_aligned[j] = True

    out = []
    for s_start in range(n):
        for s_end in range(s_start, min(n, s_start + max_len)):
            t_start, t_end = m, -1
            for i, j in links:
                if s_start <= i <= s_end:
                    t_start = min(t_start, j)
                    t_end = max(t_end, j)
            if t_end < 0 or t_end - t_start + 1 > max_len:
                continue
            if any(t_start <= j <= t_end and not s_start <= i <= s_end for i, j in links):
                continue
            # widen the target span over unaligned boundary words
            ts = t_start
            while True:
                te = t_end
                while True:
                    if te - ts + 1 <= max_len:
                        inner = frozenset(
                            (i - s_start, j - ts) for i, j in links if s_start <= i <= s_end
                        )
                        out.append(PhrasePair(
                            src[s_start:s_end + 1],
                            tgt[ts:te + 1],
                            AlignmentSet(inner, s_end - s_start + 1, te - ts + 1),
                        ))
                    te += 1
                    if te >= m or tgt_aligned[te]:
                        break
                ts -= 1
                if ts < 0 or tgt_aligned[ts]:
                    break
    return out


@dataclass
class PhraseCounts:
    """Extraction counts aggregated over a corpus."""

    pair_counts: Counter = field(default_factory=Counter)
    alignments: dict = field(default_factory=lambda: defaultdict(Counter))

    def add(self, pp: PhrasePair) -> None:
        key = (pp.source, pp.target)
        self.pair_counts[key] += pp.count
        self.alignments[key][pp.internal_alignment] += pp.count

    def merge(self, other: "PhraseCounts") -> None:
        self.pair_counts.update(other.pair_counts)
        for key, c in other.alignments.items():
            self.alignments[key].update(c)

    def best_alignment(self, key) -> AlignmentSet:
        # most frequent internal alignment; ties by Pharaoh string
        return min(self.alignments[key].items(), key=lambda kv: (-kv[1], kv[0].to_pharaoh()))[0]

    def __len__(self):
        return len(self.pair_counts)


def collect_phrases(corpus, alignments: Sequence[AlignmentSet], max_len: int = 8) -> PhraseCounts:
    pairs = list(corpus)
    if len(pairs) != len(alignments):
        raise DataError(f"{len(pairs)} sentence pairs but {len(alignments)} alignments")
    counts = PhraseCounts()
    for pair, a in zip(pairs, alignments):
        for pp in extract_phrases(pair, a, max_len):
            counts.add(pp)
    return counts


@dataclass(frozen=True)
class PhraseEntry:
    features: tuple[float, ...]
    alignment: AlignmentSet
    counts: tuple[float, float, float] = (0, 0, 0)


class PhraseTable:
    def __init__(self, schema: Sequence[str], entries: dict[tuple[Phrase, Phrase], PhraseEntry] | None = None):
        self.schema = tuple(schema)
        self.entries: dict[tuple[Phrase, Phrase], PhraseEntry] = {}
        self._by_source: dict[Phrase, list[tuple[Phrase, PhraseEntry]]] | None = None
        for key, entry in (entries or {}).items():
            self.add(key[0], key[1], entry)

    def add(self, source: Phrase, target: Phrase, entry: PhraseEntry) -> None:
        if len(entry.features) != len(self.schema):
            raise DataError(
                f"entry {' '.join(source)} ||| {' '.join(target)} has {len(entry.features)} "
                f"features, schema has {len(self.schema)}"
            )
        self.entries[(tuple(source), tuple(target))] = entry
        self._by_source = None

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def __getitem__(self, key) -> PhraseEntry:
        return self.entries[key]

    def __eq__(self, other):
        return isinstance(other, PhraseTable) and self.schema == other.schema and self.entries == other.entries

    def items(self):
        return sorted(self.entries.items(), key=lambda kv: kv[0])

    def feature(self, key, name: str) -> float:
        return self.entries[key].features[self.schema.index(name)]

    def by_source(self) -> dict[Phrase, list[tuple[Phrase, PhraseEntry]]]:
        if self._by_source is None:
            index: dict[Phrase, list] = defaultdict(list)
            for (s, t), e in sorted(self.entries.items()):
                index[s].append((t, e))
            self._by_source = dict(index)
        return self._by_source

    def source_phrases(self) -> set[Phrase]:
        return set(self.by_source())

    def source_vocabulary(self) -> set[str]:
        return {s[0] for s in self.by_source() if len(s) == 1}

    def max_source_len(self) -> int:
        return max((len(s) for s in self.by_source()), default=0)

    def filtered(self, keep: Callable[[Phrase], bool]) -> "PhraseTable":
        return PhraseTable(self.schema, {k: e for k, e in self.entries.items() if keep(k[0])})

    def extended(self, names: Sequence[str], values: Callable[[tuple[Phrase, Phrase], PhraseEntry], Sequence[float]]) -> "PhraseTable":
        """Copy with extra feature columns appended."""
        out = PhraseTable(self.schema + tuple(names))
        for key, e in self.items():
            extra = tuple(values(key, e))
            out.add(key[0], key[1], PhraseEntry(e.features + extra, e.alignment, e.counts))
        return out

    # --- file format -------------------------------------------------------

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# features: " + " ".join(self.schema) + "\n")
            for (s, t), e in self.items():
                fh.write(
                    f"{' '.join(s)} ||| {' '.join(t)} ||| "
                    f"{' '.join(_num(v) for v in e.features)} ||| "
                    f"{e.alignment.to_pharaoh()} ||| {' '.join(_num(c) for c in e.counts)}\n"
                )

    @classmethod
    def read(cls, path: str | Path) -> "PhraseTable":
        table = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if line.startswith("# features:"):
                    table = cls(line[len("# features:"):].split())
                    continue
                if not line.strip() or line.startswith("#"):
                    continue
                if table is None:
                    raise DataError(f"{path}: missing '# features:' header")
                fields = [f.strip() for f in line.split("|||")]
                if len(fields) != 5:
                    raise DataError(f"{path}:{lineno}: expected 5 '|||' fields")
                s, t = tuple(fields[0].split()), tuple(fields[1].split())
                try:
                    feats = tuple(float(v) for v in fields[2].split())
                    align = AlignmentSet.from_pharaoh(fields[3], len(s), len(t))
                    counts = tuple(_parse_num(v) for v in fields[4].split())
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
                table.add(s, t, PhraseEntry(feats, align, counts))
        if table is None:
            raise DataError(f"{path}: missing '# features:' header")
        return table


def _num(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def _parse_num(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def lexical_weight(src: Phrase, tgt: Phrase, alignment: AlignmentSet, table: TranslationTable) -> float:
    """lex(tgt|src): per target word, the average t(tgt_j|src_i) over its
    links, or t(tgt_j|NULL) when unaligned."""
    linked: dict[int, list[int]] = defaultdict(list)
    for i, j in alignment.links:
        linked[j].append(i)
    weight = 1.0
    for j, word in enumerate(tgt):
        if j in linked:
            weight *= sum(table.t(word, src[i]) for i in linked[j]) / len(linked[j])
        else:
            weight *= table.t(word, NULL)
    return weight


def score_phrase_table(counts: PhraseCounts, ttable_fwd: TranslationTable, ttable_rev: TranslationTable) -> PhraseTable:
    """Relative-frequency and lexical scoring.

    ``ttable_fwd`` holds t(target|source), ``ttable_rev`` holds t(source|target).
    """
    src_totals: Counter = Counter()
    tgt_totals: Counter = Counter()
    for (s, t), c in counts.pair_counts.items():
        src_totals[s] += c
        tgt_totals[t] += c
    table = PhraseTable(BASE_FEATURES)
    for (s, t), c in sorted(counts.pair_counts.items()):
        a = counts.best_alignment((s, t))
        feats = (
            c / tgt_totals[t],
            lexical_weight(t, s, a.transposed(), ttable_rev),
            c / src_totals[s],
            lexical_weight(s, t, a, ttable_fwd),
            PHRASE_PENALTY,
        )
        table.add(s, t, PhraseEntry(feats, a, (c, src_totals[s], tgt_totals[t])))
    return table


def train_phrase_table(corpus, alignments, ttable_fwd, ttable_rev, max_len: int = 8) -> PhraseTable:
    return score_phrase_table(collect_phrases(corpus, alignments, max_len), ttable_fwd, ttable_rev)
