import random

import pytest
from hypothesis import strategies as st

from dialmt.align import AlignmentSet
from dialmt.corpus import Token
from dialmt.morphology import AnalyzerLexicon, MorphAnalysis, PropertySet


@st.composite
def alignment_sets(draw, max_n=6, max_m=6, min_n=1, min_m=1):
    n = draw(st.integers(min_n, max_n))
    m = draw(st.integers(min_m, max_m))
    cells = [(i, j) for i in range(n) for j in range(m)]
    links = draw(st.sets(st.sampled_from(cells), max_size=len(cells)))
    return AlignmentSet(frozenset(links), n, m)


@st.composite
def alignment_pairs(draw, max_n=6, max_m=6):
    """Two link sets over the same dimensions."""
    a = draw(alignment_sets(max_n, max_m))
    cells = [(i, j) for i in range(a.source_len) for j in range(a.target_len)]
    links = draw(st.sets(st.sampled_from(cells), max_size=len(cells)))
    return a, AlignmentSet(frozenset(links), a.source_len, a.target_len)


words = st.sampled_from(["a", "b", "c", "d", "e"])
sentences = st.lists(words, min_size=1, max_size=6)


def random_links(rng: random.Random, n: int, m: int, density: float) -> AlignmentSet:
    links = {(i, j) for i in range(n) for j in range(m) if rng.random() < density}
    return AlignmentSet(frozenset(links), n, m)


def analysis(segmentation: str, pos: str, definiteness="na", number="na", gender="na", freq=1, extended=()):
    return MorphAnalysis(
        tuple(Token(s) for s in segmentation.split()),
        PropertySet(definiteness, number, gender, pos, tuple(extended)),
        freq,
    )


@pytest.fixture
def small_lexicon():
    return AnalyzerLexicon({
        "HyktbwhA": [analysis("H+ yktbw +hA", "verb", number="pl", gender="m", freq=5)],
        "wAlktAb": [analysis("w+ Al+ ktAb", "noun", "def", "sg", "m", freq=3)],
        "ktAb": [
            analysis("ktAb", "noun", "indef", "sg", "m", freq=5),
            analysis("ktAb", "verb", freq=2),
        ],
        "bytk": [analysis("byt +k", "noun", "def", "sg", "m", freq=2)],
        "AnA": [analysis("AnA", "pron", number="sg", freq=7)],
    })


def random_decoding_problem(rng: random.Random, max_len: int = 6, max_options: int = 5, n_tables: int | None = None):
    """A sentence, sparse random phrase tables and an LM for decoder checks.

    Returns ``(words, tables, oracle_tables, lm, weights)`` where
    ``oracle_tables`` holds the same entries as plain dicts.
    """
    import math

    from dialmt.decoder import model_features
    from dialmt.lm import train_lm
    from dialmt.phrases import BASE_FEATURES, PhraseEntry, PhraseTable

    src_vocab = ["s0", "s1", "s2", "s3"]
    tgt_vocab = ["t0", "t1", "t2", "t3", "t4"]
    n = rng.randint(1, max_len)
    words = tuple(rng.choice(src_vocab) for _ in range(n))
    if n_tables is None:
        n_tables = rng.choice([1, 1, 2])
    tables, oracle = [], []
    for _ in range(n_tables):
        per_source = {}
        for i in range(n):
            for length, p in ((1, 0.6), (2, 0.3), (3, 0.15)):
                src = words[i:i + length]
                if len(src) < length or src in per_source or rng.random() > p:
                    continue
                options = per_source.setdefault(src, {})
                for _ in range(rng.choice([1, 1, 1, 2, 2, 3, max_options])):
                    tgt = tuple(rng.choice(tgt_vocab) for _ in range(rng.choice([1, 1, 2])))
                    options[tgt] = tuple(rng.choice([0.05, 0.2, 0.5, 0.9, 1.0]) for _ in range(4)) + (math.e,)
        entries = {(s, t): f for s, options in per_source.items() for t, f in options.items()}
        table = PhraseTable(BASE_FEATURES)
        for (s, t), f in entries.items():
            table.add(s, t, PhraseEntry(f, AlignmentSet(frozenset(), len(s), len(t))))
        tables.append(table)
        oracle.append((BASE_FEATURES, entries))
    lm_corpus = [" ".join(rng.choice(tgt_vocab) for _ in range(rng.randint(1, 5))) for _ in range(12)]
    lm = train_lm(lm_corpus, order=3)
    weights = {name: round(rng.uniform(-1.0, 1.0), 3) for name in model_features(tables)}
    weights["lm"] = round(rng.uniform(0.1, 1.0), 3)
    return words, tables, oracle, lm, weights


# one line per acceptance criterion, repeated in the terminal summary so it
# survives output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
