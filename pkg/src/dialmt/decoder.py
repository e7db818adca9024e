"""Log-linear stack decoder.

Feature conventions (all summed over the derivation):

* phrase-table features contribute ``ln(value)``; features missing from the
  table an option came from contribute 0 (a neutral 1.0)
* ``lm``: natural-log LM probability of the target including ``</s>``
* ``word_penalty``: minus the number of target tokens
* ``distortion``: minus the total jump distance ``|start - (prev_end + 1)|``
* ``oov``: minus the number of source tokens copied through untranslated
* ``provenance``: number of phrases taken from a table other than the first
  (only active when more than one table is consulted)

Positive weights therefore penalize the three penalty-style features.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import DataError
from .corpus import Sentence
from .lm import EOS, NGramLM
from .phrases import PhraseEntry, PhraseTable

LN10 = math.log(10)
DECODER_FEATURES = ("lm", "word_penalty", "distortion", "oov")
PROVENANCE = "provenance"

DEFAULT_WEIGHTS = {
    "p_s_given_t": 0.2,
    "lex_s_given_t": 0.2,
    "p_t_given_s": 0.2,
    "lex_t_given_s": 0.2,
    "phrase_penalty": 0.2,
    "lm": 0.5,
    "word_penalty": -0.5,
    "distortion": 0.3,
    "oov": 1.0,
    "provenance": 0.0,
    "conn_s": 0.1,
    "conn_t": 0.1,
    "morph_ws": 0.0,
    "morph_wt": 0.0,
}


class LogLinearWeights(dict):
    """Feature name -> weight."""

    def require(self, names) -> None:
        missing = sorted(set(names) - set(self))
        if missing:
            raise DataError(f"no weight for feature(s): {', '.join(missing)}")

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for name in sorted(self):
                fh.write(f"{name}\t{self[name]!r}\n")

    @classmethod
    def read(cls, path: str | Path) -> "LogLinearWeights":
        out = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise DataError(f"{path}:{lineno}: expected 'feature<TAB>weight'")
                out[parts[0]] = float(parts[1])
        return out

    @classmethod
    def defaults(cls, names) -> "LogLinearWeights":
        return cls({n: DEFAULT_WEIGHTS.get(n, 0.1) for n in names})


def model_features(tables: Sequence[PhraseTable]) -> list[str]:
    """Ordered feature names of the log-linear model over ``tables``."""
    names: list[str] = []
    for t in tables:
        for f in t.schema:
            if f not in names:
                names.append(f)
    names.extend(DECODER_FEATURES)
    if len(tables) > 1:
        names.append(PROVENANCE)
    return names


def combine_tables(tables: Sequence[PhraseTable], combination: str = "backoff") -> PhraseTable:
    """Merge tables into one that decodes like consulting them together.

    Missing columns are filled with the neutral 1.0 and a ``provenance``
    column holds e for entries from a later table, so ``ln`` gives the
    decoder's provenance count.  With ``backoff`` a source phrase is taken
    only from the first table that has it; with ``union`` every pair is
    kept, the first table winning on duplicate pairs.
    """
    if combination not in ("backoff", "union"):
        raise ValueError(f"unknown table combination {combination!r}")
    tables = list(tables)
    if len(tables) < 2:
        return tables[0] if tables else PhraseTable(())
    schema = [n for n in model_features(tables) if n not in DECODER_FEATURES]
    out = PhraseTable(schema)
    for ti, table in enumerate(tables):
        for (s, t), e in table.items():
            if (s, t) in out or (combination == "backoff" and any(s in tables[k].by_source() for k in range(ti))):
                continue
            have = dict(zip(table.schema, e.features))
            have[PROVENANCE] = math.e if ti > 0 else 1.0
            out.add(s, t, PhraseEntry(tuple(have.get(n, 1.0) for n in schema), e.alignment, e.counts))
    return out


@dataclass(frozen=True)
class TranslationOption:
    start: int
    end: int  # exclusive
    target: tuple[str, ...]
    features: tuple[tuple[str, float], ...]  # static features (no lm/distortion)
    static_score: float
    table: int  # -1 for copy-through


class _Hyp:
    __slots__ = ("coverage", "state", "end", "score", "total", "back", "option", "lm", "jump", "arcs")

    def __init__(self, coverage, state, end, score, total, back, option, lm, jump):
        self.coverage = coverage
        self.state = state
        self.end = end  # last covered source index
        self.score = score
        self.total = total  # score + future cost
        self.back = back
        self.option = option
        self.lm = lm  # ln LM delta of this step (incl. </s> when completing)
        self.jump = jump
        self.arcs: list[_Hyp] = []

    def chain(self) -> list["_Hyp"]:
        out = []
        h = self
        while h.option is not None:
            out.append(h)
            h = h.back
        return out  # newest first

    def target(self) -> tuple[str, ...]:
        words: list[str] = []
        for h in reversed(self.chain()):
            words.extend(h.option.target)
        return tuple(words)


@dataclass
class Derivation:
    target: tuple[str, ...]
    score: float
    features: dict[str, float]
    phrases: list[tuple[tuple[int, int], tuple[str, ...], int]] = field(default_factory=list)

    def sentence(self) -> Sentence:
        return Sentence.from_words(self.target)


def _features_of(nodes: Sequence[_Hyp]) -> tuple[dict[str, float], list]:
    feats: dict[str, float] = {}
    phrases = []
    for h in nodes:  # oldest first
        for name, v in h.option.features:
            feats[name] = feats.get(name, 0.0) + v
        feats["lm"] = feats.get("lm", 0.0) + h.lm
        feats["distortion"] = feats.get("distortion", 0.0) - h.jump
        phrases.append(((h.option.start, h.option.end), h.option.target, h.option.table))
    return feats, phrases


def score_features(features: Mapping[str, float], weights: Mapping[str, float]) -> float:
    return math.fsum(weights[name] * v for name, v in features.items())


class Decoder:
    def __init__(
        self,
        tables: Sequence[PhraseTable],
        lm: NGramLM,
        weights: Mapping[str, float],
        distortion_limit: int | None = 6,
        stack_size: int | None = 100,
        ttable_limit: int | None = 20,
        combination: str = "backoff",
    ):
        if combination not in ("backoff", "union"):
            raise ValueError(f"unknown table combination {combination!r}")
        self.tables = list(tables)
        self.lm = lm
        self.feature_names = model_features(self.tables)
        weights = LogLinearWeights(weights)
        weights.require(self.feature_names)
        self.weights = weights
        self.distortion_limit = distortion_limit
        self.stack_size = stack_size
        self.ttable_limit = ttable_limit
        self.combination = combination
        self.max_phrase = max((t.max_source_len() for t in self.tables), default=1) or 1
        self._option_cache: dict = {}

    # --- translation options ------------------------------------------------

    def _lm_isolated(self, target) -> float:
        state: tuple[str, ...] = ()
        total = 0.0
        for w in target:
            lp, state = self.lm.score_word(state, w)
            total += lp
        return total * LN10

    def _phrase_options(self, src: tuple[str, ...]):
        """(target, static features, static score, table index) for a source phrase."""
        hit = self._option_cache.get(src)
        if hit is not None:
            return hit
        w = self.weights
        found = []
        for ti, table in enumerate(self.tables):
            cands = table.by_source().get(src)
            if not cands:
                continue
            for tgt, entry in cands:
                feats = [(name, math.log(v)) for name, v in zip(table.schema, entry.features)]
                feats.append(("word_penalty", -float(len(tgt))))
                if len(self.tables) > 1:
                    feats.append((PROVENANCE, 1.0 if ti > 0 else 0.0))
                feats = tuple(feats)
                score = sum(w[n] * v for n, v in feats)
                found.append((tgt, feats, score, ti))
            if self.combination == "backoff":
                break
        if self.ttable_limit is not None and len(found) > self.ttable_limit:
            wl = w["lm"]
            found.sort(key=lambda o: (-(o[2] + wl * self._lm_isolated(o[0])), o[0], o[3]))
            found = found[:self.ttable_limit]
        self._option_cache[src] = found
        return found

    def translation_options(self, words: Sequence[str]) -> dict[tuple[int, int], list[TranslationOption]]:
        n = len(words)
        options: dict[tuple[int, int], list[TranslationOption]] = {}
        for i in range(n):
            for j in range(i + 1, min(n, i + self.max_phrase) + 1):
                found = self._phrase_options(tuple(words[i:j]))
                if found:
                    options[(i, j)] = [TranslationOption(i, j, t, f, s, ti) for t, f, s, ti in found]
            if (i, i + 1) not in options:
                feats = (("word_penalty", -1.0), ("oov", -1.0))
                score = sum(self.weights[k] * v for k, v in feats)
                options[(i, i + 1)] = [TranslationOption(i, i + 1, (words[i],), feats, score, -1)]
        return options

    # --- search --------------------------------------------------------------

    def _future_costs(self, n, options):
        wl = self.weights["lm"]
        fc = [[-math.inf] * (n + 1) for _ in range(n + 1)]
        for (i, j), opts in options.items():
            fc[i][j] = max(o.static_score + wl * self._lm_isolated(o.target) for o in opts)
        for length in range(2, n + 1):
            for i in range(0, n - length + 1):
                j = i + length
                best = fc[i][j]
                for k in range(i + 1, j):
                    v = fc[i][k] + fc[k][j]
                    if v > best:
                        best = v
                fc[i][j] = best
        return fc

    def _allowed(self, coverage: int, prev_end: int, start: int, end: int, n: int) -> bool:
        limit = self.distortion_limit
        if limit is None:
            return True
        if abs(start - prev_end - 1) > limit:
            return False
        new_cov = coverage | (((1 << (end - start)) - 1) << start)
        first_gap = 0
        while first_gap < n and new_cov >> first_gap & 1:
            first_gap += 1
        if first_gap < n and first_gap < start and abs(first_gap - end) > limit:
            return False
        return True

    def _search(self, words: Sequence[str]):
        n = len(words)
        if n == 0:
            raise DataError("cannot decode an empty sentence")
        w = self.weights
        wl, wd = w["lm"], w["distortion"]
        options = self.translation_options(words)
        by_start: dict[int, list] = {}
        for (i, j), opts in options.items():
            by_start.setdefault(i, []).append((j, ((1 << (j - i)) - 1) << i, opts))
        fc = self._future_costs(n, options)
        full = (1 << n) - 1
        fc_cache: dict[int, float] = {}

        def future(cov):
            v = fc_cache.get(cov)
            if v is None:
                v = 0.0
                i = 0
                while i < n:
                    if cov >> i & 1:
                        i += 1
                        continue
                    j = i
                    while j < n and not cov >> j & 1:
                        j += 1
                    v += fc[i][j]
                    i = j
                fc_cache[cov] = v
            return v

        stacks: list[dict] = [dict() for _ in range(n + 1)]
        root = _Hyp(0, self.lm.begin_state(), -1, 0.0, future(0), None, None, 0.0, 0)
        stacks[0][(0, root.state, -1)] = root

        for k in range(n):
            hyps = list(stacks[k].values())
            hyps.sort(key=lambda h: -h.total)
            if self.stack_size is not None:
                hyps = hyps[:self.stack_size]
            for h in hyps:
                cov = h.coverage
                for start in range(n):
                    if cov >> start & 1:
                        continue
                    for end, mask, opts in by_start.get(start, ()):
                        if cov & mask:
                            continue
                        if not self._allowed(cov, h.end, start, end, n):
                            continue
                        jump = abs(start - h.end - 1)
                        new_cov = cov | mask
                        done = new_cov == full
                        fut = 0.0 if done else future(new_cov)
                        for o in opts:
                            state = h.state
                            lm = 0.0
                            for word in o.target:
                                lp, state = self.lm.score_word(state, word)
                                lm += lp
                            if done:
                                lp, state = self.lm.score_word(state, EOS)
                                lm += lp
                            lm *= LN10
                            score = h.score + o.static_score + wl * lm - wd * jump
                            new = _Hyp(new_cov, state, end - 1, score, score + fut, h, o, lm, jump)
                            self._insert(stacks[k + end - start], (new_cov, state, end - 1), new)
        return list(stacks[n].values())

    @staticmethod
    def _insert(stack: dict, key, new: _Hyp) -> None:
        old = stack.get(key)
        if old is None:
            stack[key] = new
            return
        if new.score > old.score or (new.score == old.score and new.target() < old.target()):
            new.arcs.append(old)
            new.arcs.extend(old.arcs)
            old.arcs = []
            stack[key] = new
        else:
            old.arcs.append(new)

    def _derivation(self, nodes_newest_first: Sequence[_Hyp], score: float) -> Derivation:
        nodes = list(reversed(nodes_newest_first))
        feats, phrases = _features_of(nodes)
        target: list[str] = []
        for h in nodes:
            target.extend(h.option.target)
        return Derivation(tuple(target), score, feats, phrases)

    def decode_best(self, sentence) -> Derivation:
        words = sentence.words if hasattr(sentence, "words") else tuple(sentence)
        finals = self._search(words)
        best = min(finals, key=lambda h: (-h.score, h.target()))
        return self._derivation(best.chain(), best.score)

    def decode(self, sentence) -> Sentence:
        return self.decode_best(sentence).sentence()

    def nbest(self, sentence, n: int = 100, distinct: bool = True) -> list[Derivation]:
        """Lazily enumerate derivations in score order via recombination arcs."""
        words = sentence.words if hasattr(sentence, "words") else tuple(sentence)
        return self._nbest_from(self._search(words), n, distinct)

    def decode_with_nbest(self, sentence, n: int = 100, distinct: bool = True) -> tuple[Derivation, list[Derivation]]:
        """The 1-best (as ``decode_best``) and an n-best list from one search."""
        words = sentence.words if hasattr(sentence, "words") else tuple(sentence)
        finals = self._search(words)
        best = min(finals, key=lambda h: (-h.score, h.target()))
        return self._derivation(best.chain(), best.score), self._nbest_from(finals, n, distinct)

    def _nbest_from(self, finals, n: int, distinct: bool) -> list[Derivation]:
        heap: list = []
        counter = 0
        for h in finals:
            heapq.heappush(heap, (-h.score, counter, h.chain(), 0))
            counter += 1
        out: list[Derivation] = []
        seen: set = set()
        pops = 0
        while heap and len(out) < n and pops < 20 * n:
            neg, _, nodes, start = heapq.heappop(heap)
            pops += 1
            d = self._derivation(nodes, -neg)
            if not distinct or d.target not in seen:
                seen.add(d.target)
                out.append(d)
            for pos in range(start, len(nodes)):
                for arc in nodes[pos].arcs:
                    new_nodes = nodes[:pos] + arc.chain()
                    new_score = -neg - nodes[pos].score + arc.score
                    heapq.heappush(heap, (-new_score, counter, new_nodes, pos + 1))
                    counter += 1
        out.sort(key=lambda d: (-d.score, d.target))
        return out


def decode(sentence, tables, lm, weights, distortion_limit: int | None = 6, stack_size: int | None = 100) -> Sentence:
    return Decoder(tables, lm, weights, distortion_limit, stack_size).decode(sentence)


def no_translation(sentence: Sentence) -> Sentence:
    return sentence


def format_nbest(sent_id: int, derivations: Sequence[Derivation]) -> str:
    lines = []
    for d in derivations:
        feats = " ".join(f"{k}:{v!r}" for k, v in sorted(d.features.items()))
        lines.append(f"{sent_id} ||| {' '.join(d.target)} ||| {feats} ||| {d.score!r}")
    return "\n".join(lines)


def parse_nbest(text: str) -> dict[int, list[Derivation]]:
    out: dict[int, list[Derivation]] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        sid, tgt, feats, score = (f.strip() for f in line.split("|||"))
        fd = {}
        for item in feats.split():
            k, _, v = item.rpartition(":")
            fd[k] = float(v)
        out.setdefault(int(sid), []).append(Derivation(tuple(tgt.split()), float(score), fd))
    return out
