"""Interpolated Kneser-Ney n-gram language model with ARPA serialization.

Listed n-grams store fully interpolated probabilities and every history
stores its interpolation weight as the back-off weight, so querying through
the ordinary ARPA back-off chain reproduces the interpolated distribution.
Lower orders use continuation counts except for n-grams that start with
``<s>``, which never have a left context and keep their raw counts.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from . import DataError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
DISCOUNT = 0.75
# log10 probability written for <s>, which is never predicted
NEVER = -99.0


def _words(sentence) -> tuple[str, ...]:
    if hasattr(sentence, "words"):
        return sentence.words
    if isinstance(sentence, str):
        return tuple(sentence.split())
    return tuple(sentence)


class NGramLM:
    def __init__(self, order: int, ngrams: dict[tuple[str, ...], tuple[float, float | None]]):
        self.order = order
        self.ngrams = ngrams
        self.vocabulary = {g[0] for g in ngrams if len(g) == 1}
        self._cache: dict = {}

    def map_word(self, word: str) -> str:
        return word if word in self.vocabulary else UNK

    def logprob(self, context: Sequence[str], word: str) -> float:
        """log10 P(word | context); ``context`` holds already-mapped tokens."""
        word = self.map_word(word)
        ctx = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        backoff = 0.0
        while True:
            entry = self.ngrams.get(ctx + (word,))
            if entry is not None:
                return backoff + entry[0]
            if not ctx:
                # only reached for words absent from the vocabulary table
                return backoff + self.ngrams[(UNK,)][0]
            hist = self.ngrams.get(ctx)
            if hist is not None and hist[1] is not None:
                backoff += hist[1]
            ctx = ctx[1:]

    def state_after(self, state: tuple[str, ...], word: str) -> tuple[str, ...]:
        if self.order == 1:
            return ()
        return (state + (self.map_word(word),))[-(self.order - 1):]

    def score_word(self, state: tuple[str, ...], word: str) -> tuple[float, tuple[str, ...]]:
        """Incremental scoring for the decoder; memoized."""
        key = (state, word)
        hit = self._cache.get(key)
        if hit is None:
            hit = (self.logprob(state, word), self.state_after(state, word))
            self._cache[key] = hit
        return hit

    def begin_state(self) -> tuple[str, ...]:
        return (BOS,) if self.order > 1 else ()

    def score_sequence(self, tokens) -> float:
        """Sentence log10 probability with <s> and </s> markers."""
        words = _words(tokens)
        ctx: list[str] = [BOS]
        total = 0.0
        for w in words + (EOS,):
            total += self.logprob(ctx, w)
            ctx.append(self.map_word(w))
        return total

    def predictive_vocabulary(self) -> list[str]:
        """Every token the model can emit (all of the vocabulary except <s>)."""
        return sorted(w for w in self.vocabulary if w != BOS)

    # --- ARPA --------------------------------------------------------------

    def write_arpa(self, path: str | Path) -> None:
        by_order: dict[int, list] = defaultdict(list)
        for g, v in self.ngrams.items():
            by_order[len(g)].append((g, v))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n\\data\\\n")
            for n in range(1, self.order + 1):
                fh.write(f"ngram {n}={len(by_order[n])}\n")
            for n in range(1, self.order + 1):
                fh.write(f"\n\\{n}-grams:\n")
                for g, (lp, bow) in sorted(by_order[n]):
                    line = f"{lp!r}\t{' '.join(g)}"
                    if bow is not None:
                        line += f"\t{bow!r}"
                    fh.write(line + "\n")
            fh.write("\n\\end\\\n")

    @classmethod
    def read_arpa(cls, path: str | Path) -> "NGramLM":
        ngrams: dict[tuple[str, ...], tuple[float, float | None]] = {}
        counts: dict[int, int] = {}
        section = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                if line == "\\data\\":
                    section = 0
                    continue
                if line == "\\end\\":
                    break
                if line.startswith("\\") and line.endswith("-grams:"):
                    section = int(line[1:line.index("-")])
                    continue
                if section == 0:
                    if line.startswith("ngram "):
                        n, c = line[6:].split("=")
                        counts[int(n)] = int(c)
                    continue
                if not section:
                    raise DataError(f"{path}:{lineno}: content outside a section")
                parts = line.split("\t")
                if len(parts) not in (2, 3):
                    raise DataError(f"{path}:{lineno}: malformed n-gram line")
                g = tuple(parts[1].split())
                if len(g) != section:
                    raise DataError(f"{path}:{lineno}: {len(g)}-gram in the {section}-gram section")
                ngrams[g] = (float(parts[0]), float(parts[2]) if len(parts) == 3 else None)
        if not counts:
            raise DataError(f"{path}: missing \\data\\ header")
        for n, c in counts.items():
            found = sum(1 for g in ngrams if len(g) == n)
            if found != c:
                raise DataError(f"{path}: header declares {c} {n}-grams, found {found}")
        return cls(max(counts), ngrams)


def train_lm(corpus: Iterable, order: int = 5, discount: float = DISCOUNT) -> NGramLM:
    if order < 1:
        raise ValueError("order must be >= 1")
    sentences = [_words(s) for s in corpus]
    if not sentences:
        raise DataError("cannot train a language model on an empty corpus")

    raw: list[Counter] = [Counter() for _ in range(order + 1)]
    vocab = {BOS, EOS, UNK}
    for words in sentences:
        vocab.update(words)
        toks = (BOS,) + words + (EOS,)
        for k in range(1, len(toks)):
            for n in range(1, min(order, k + 1) + 1):
                raw[n][toks[k - n + 1:k + 1]] += 1

    # adjusted counts per order
    adjusted: list[dict] = [dict() for _ in range(order + 1)]
    adjusted[order] = dict(raw[order])
    for n in range(order - 1, 0, -1):
        cont: Counter = Counter()
        for g in raw[n + 1]:
            cont[g[1:]] += 1
        adj = {}
        for g, c in raw[n].items():
            adj[g] = c if g[0] == BOS else cont[g]
        adjusted[n] = adj

    ngrams: dict[tuple[str, ...], tuple[float, float | None]] = {}
    probs: dict[tuple[str, ...], float] = {}

    # unigrams: discounted continuation counts interpolated with a uniform
    # distribution over everything but <s>
    uni = {g: c for g, c in adjusted[1].items() if g != (BOS,)}
    total = sum(uni.values())
    uniform_mass = discount * len(uni) / total
    targets = sorted(vocab - {BOS})
    for w in targets:
        c = uni.get((w,), 0)
        probs[(w,)] = max(c - discount, 0.0) / total + uniform_mass / len(targets)

    for n in range(2, order + 1):
        denom: Counter = Counter()
        distinct: Counter = Counter()
        for g, c in adjusted[n].items():
            denom[g[:-1]] += c
            distinct[g[:-1]] += 1
        for g, c in adjusted[n].items():
            h = g[:-1]
            gamma = discount * distinct[h] / denom[h]
            probs[g] = (c - discount) / denom[h] + gamma * _interp(probs, g[1:])

    # back-off weights are the interpolation weights of each history
    bows: dict[tuple[str, ...], float] = {}
    for n in range(2, order + 1):
        denom = Counter()
        distinct = Counter()
        for g, c in adjusted[n].items():
            denom[g[:-1]] += c
            distinct[g[:-1]] += 1
        for h in denom:
            bows[h] = math.log10(discount * distinct[h] / denom[h])

    for g, p in probs.items():
        ngrams[g] = (math.log10(p), bows.get(g))
    ngrams[(BOS,)] = (NEVER, bows.get((BOS,)))
    return NGramLM(order, ngrams)


def _interp(probs, g):
    """Interpolated lower-order probability of g (already computed or backed off)."""
    p = probs.get(g)
    if p is not None:
        return p
    raise AssertionError(f"lower-order n-gram {g} missing")  # KN keeps all suffixes
