import math
import random
from collections import defaultdict

import pytest
from conftest import alignment_sets, random_links
from hypothesis import given

from dialmt import DataError
from dialmt.align import NULL, AlignmentSet, TranslationTable
from dialmt.oracles import consistent_phrase_spans
from dialmt.phrases import (
    BASE_FEATURES,
    PhraseCounts,
    PhraseEntry,
    PhrasePair,
    PhraseTable,
    collect_phrases,
    extract_phrases,
    lexical_weight,
    score_phrase_table,
)


def spans_of(pairs, n, m):
    """Map extracted pairs back to spans; words are position-unique."""
    out = set()
    for p in pairs:
        s0 = int(p.source[0][1:])
        t0 = int(p.target[0][1:])
        out.add((s0, s0 + len(p.source) - 1, t0, t0 + len(p.target) - 1))
    return out


def words(prefix, n):
    return tuple(f"{prefix}{k}" for k in range(n))


def test_monotone_pair():
    pairs = extract_phrases((("a", "b"), ("x", "y")), AlignmentSet(frozenset({(0, 0), (1, 1)}), 2, 2))
    assert {(p.source, p.target) for p in pairs} == {(("a",), ("x",)), (("b",), ("y",)), (("a", "b"), ("x", "y"))}


def test_unaligned_middle_word_matches_oracle():
    a = AlignmentSet(frozenset({(0, 0), (2, 1)}), 3, 2)
    pairs = extract_phrases((words("s", 3), words("t", 2)), a)
    assert spans_of(pairs, 3, 2) == consistent_phrase_spans(3, 2, a.links)
    assert len(pairs) == len(spans_of(pairs, 3, 2))


def test_empty_alignment_gives_nothing():
    assert extract_phrases((("a", "b"), ("x",)), AlignmentSet(frozenset(), 2, 1)) == []


def test_dimension_mismatch():
    with pytest.raises(DataError):
        extract_phrases((("a",), ("x",)), AlignmentSet(frozenset(), 2, 1))


def test_internal_alignment_is_relative():
    a = AlignmentSet(frozenset({(0, 0), (1, 2), (2, 1)}), 3, 3)
    pairs = {(p.source, p.target): p for p in extract_phrases((("a", "b", "c"), ("x", "y", "z")), a)}
    assert pairs[(("b", "c"), ("y", "z"))].internal_alignment.links == {(0, 1), (1, 0)}


@given(alignment_sets(max_n=7, max_m=7))
def test_extraction_equals_oracle(a):
    n, m = a.source_len, a.target_len
    pairs = extract_phrases((words("s", n), words("t", m)), a, max_len=4)
    spans = spans_of(pairs, n, m)
    assert len(spans) == len(pairs)
    assert spans == consistent_phrase_spans(n, m, a.links, max_len=4)
    for p in pairs:
        assert 1 <= len(p.source) <= 4 and 1 <= len(p.target) <= 4
        for i, j in p.internal_alignment.links:
            assert i < len(p.source) and j < len(p.target)


def test_extraction_oracle_on_random_pairs():
    rng = random.Random(9)
    for _ in range(100):
        n, m = rng.randint(1, 10), rng.randint(1, 10)
        a = random_links(rng, n, m, rng.choice([0.1, 0.2, 0.4]))
        pairs = extract_phrases((words("s", n), words("t", m)), a)
        assert spans_of(pairs, n, m) == consistent_phrase_spans(n, m, a.links)


def _uniform_tables():
    one = defaultdict(dict)
    return TranslationTable(one), TranslationTable(one)


def test_single_pair_seen_once():
    counts = PhraseCounts()
    counts.add(PhrasePair(("a",), ("x",), AlignmentSet(frozenset({(0, 0)}), 1, 1)))
    table = score_phrase_table(counts, TranslationTable({"a": {"x": 1.0}}), TranslationTable({"x": {"a": 1.0}}))
    assert table.schema == BASE_FEATURES
    entry = table[(("a",), ("x",))]
    assert entry.features == (1.0, 1.0, 1.0, 1.0, math.e)


def test_relative_frequencies():
    counts = PhraseCounts()
    link = AlignmentSet(frozenset({(0, 0)}), 1, 1)
    for _ in range(3):
        counts.add(PhrasePair(("s",), ("t1",), link))
    counts.add(PhrasePair(("s",), ("t2",), link))
    fwd, rev = _uniform_tables()
    table = score_phrase_table(counts, fwd, rev)
    assert table.feature((("s",), ("t1",)), "p_t_given_s") == 0.75
    assert table.feature((("s",), ("t2",)), "p_t_given_s") == 0.25
    assert table.feature((("s",), ("t2",)), "p_s_given_t") == 1.0


def test_lexical_weight_examples():
    t = TranslationTable({"a": {"x": 1.0}, "b": {"y": 1.0}})
    diag = AlignmentSet(frozenset({(0, 0), (1, 1)}), 2, 2)
    assert lexical_weight(("a", "b"), ("x", "y"), diag, t) == 1.0
    t = TranslationTable({"a": {"x": 0.5}, "b": {"x": 0.3}, NULL: {"y": 0.2}})
    both = AlignmentSet(frozenset({(0, 0), (1, 0)}), 2, 2)
    assert lexical_weight(("a", "b"), ("x", "y"), both, t) == pytest.approx(0.4 * 0.2)


def test_conditionals_sum_to_one():
    rng = random.Random(3)
    corpus, alignments = [], []
    for _ in range(30):
        n, m = rng.randint(1, 6), rng.randint(1, 6)
        corpus.append((tuple(rng.choice("abcd") for _ in range(n)), tuple(rng.choice("wxyz") for _ in range(m))))
        alignments.append(random_links(rng, n, m, 0.3))
    fwd, rev = _uniform_tables()
    table = score_phrase_table(collect_phrases(corpus, alignments), fwd, rev)
    sums = defaultdict(float)
    for (s, _), e in table.items():
        sums[s] += e.features[2]
    for v in sums.values():
        assert abs(v - 1.0) <= 1e-9


def test_file_round_trip(tmp_path):
    table = PhraseTable(BASE_FEATURES + ("conn_s",))
    table.add(("a", "b"), ("x",), PhraseEntry((0.5, 0.25, 1.0, 0.1, math.e, 1e-4), AlignmentSet(frozenset({(0, 0), (1, 0)}), 2, 1), (2, 4, 2)))
    table.add(("a",), ("y", "z"), PhraseEntry((1 / 3, 0.2, 0.7, 0.3, math.e, 0.6), AlignmentSet(frozenset(), 1, 2), (1, 1, 3)))
    path = tmp_path / "pt"
    table.write(path)
    again = PhraseTable.read(path)
    assert again == table
    lines = path.read_text().splitlines()
    assert lines[0] == "# features: p_s_given_t lex_s_given_t p_t_given_s lex_t_given_s phrase_penalty conn_s"
    assert lines[1].startswith("a ||| y z ||| ")


def test_schema_length_enforced():
    with pytest.raises(DataError):
        PhraseTable(BASE_FEATURES).add(("a",), ("x",), PhraseEntry((1.0,), AlignmentSet(frozenset(), 1, 1)))
