import itertools
import math
import random

import pytest
from conftest import alignment_pairs, random_links
from hypothesis import given, settings

from dialmt import DataError
from dialmt.align import (
    NULL,
    AlignmentSet,
    TranslationTable,
    align_corpus,
    corpus_log_likelihood,
    grow_diag_final,
    read_alignments,
    train_ibm1,
    viterbi_align,
    write_alignments,
)
from dialmt.corpus import ParallelCorpus
from dialmt.oracles import grow_diag_final_matrix


def A(links, n, m):
    return AlignmentSet(frozenset(links), n, m)


def test_disambiguation_corpus():
    table = train_ibm1([(("a", "b"), ("x", "y")), (("a",), ("x",))], iterations=5)
    assert table.t("x", "a") > 0.9


def test_single_cooccurrence():
    table = train_ibm1([(("a",), ("x",))], iterations=3)
    assert table.t("x", "a") >= table.t("x", NULL)
    assert table.row_sums() == pytest.approx({"a": 1.0, NULL: 1.0})


def test_likelihood_non_decreasing_one_vs_two_iterations():
    corpus = [(("a", "b"), ("x", "y")), (("a",), ("x",)), (("b", "c"), ("y", "z"))]
    one = corpus_log_likelihood(train_ibm1(corpus, 1), corpus)
    two = corpus_log_likelihood(train_ibm1(corpus, 2), corpus)
    assert two >= one - 1e-9


def test_empty_corpus_and_bad_iterations():
    with pytest.raises(DataError):
        train_ibm1([], 5)
    with pytest.raises(ValueError):
        train_ibm1([(("a",), ("x",))], 0)


def test_rows_are_normalized():
    rng = random.Random(4)
    corpus = [
        (tuple(rng.choice("abcde") for _ in range(rng.randint(1, 5))),
         tuple(rng.choice("vwxyz") for _ in range(rng.randint(1, 5))))
        for _ in range(20)
    ]
    table = train_ibm1(corpus, 4)
    for total in table.row_sums().values():
        assert abs(total - 1.0) <= 1e-6


def test_table_round_trip(tmp_path):
    table = train_ibm1([(("a", "b"), ("x", "y")), (("a",), ("x",))], 3)
    table.write(tmp_path / "t.tsv")
    again = TranslationTable.read(tmp_path / "t.tsv")
    assert again.probs == table.probs


def test_viterbi_identity_table():
    table = TranslationTable({"a": {"x": 1.0}, "b": {"y": 1.0}, NULL: {"x": 0.5, "y": 0.5}})
    assert viterbi_align(table, (("a", "b"), ("x", "y"))).links == {(0, 0), (1, 1)}


def test_viterbi_all_mass_on_null():
    table = TranslationTable({NULL: {"x": 1.0, "y": 1.0}})
    assert viterbi_align(table, (("a", "b"), ("x", "y"))).links == frozenset()


def test_viterbi_matches_brute_force_argmax():
    rng = random.Random(11)
    for _ in range(50):
        src = ("a", "b", "c")
        tgt = ("x", "y", "z")
        probs = {e: {f: rng.choice([0.1, 0.2, 0.3, 0.5]) for f in tgt} for e in src + (NULL,)}
        table = TranslationTable(probs)
        expected = set()
        for j, f in enumerate(tgt):
            cands = [(probs[e][f], -i) for i, e in enumerate(src)]
            best_p, neg_i = max(cands)
            if probs[NULL][f] <= best_p:
                expected.add((-neg_i, j))
        assert viterbi_align(table, (src, tgt)).links == expected


def test_gdf_equal_inputs():
    links = {(0, 1), (1, 0), (2, 2)}
    assert grow_diag_final(A(links, 3, 3), A(links, 3, 3)).links == links


def test_gdf_bounding_example():
    out = grow_diag_final(A({(0, 0), (1, 1)}, 2, 2), A({(0, 0)}, 2, 2)).links
    assert {(0, 0)} <= out <= {(0, 0), (1, 1)}


# Hand-traced instances.
#
# 1. Growth reaches the whole union: from {(0,0)} the scan adds (0,1) (target 1
#    unaligned), then (1,1) (source 1 unaligned); visiting (1,1) adds (2,1) and
#    then (2,2) (target 2 still unaligned).
# 2. Nothing grows or is finalized: the off-diagonal corners are not adjacent
#    to the intersection, and in the final step both of their words are
#    already aligned.
# 3. Order matters: visiting (1,1) adds (1,2) first (target 2 unaligned), after
#    which (0,2) joins two aligned words and is rejected by growth and final.
HAND_TRACED = [
    (3, 3, {(0, 0), (1, 1), (2, 2)}, {(0, 0), (0, 1), (2, 1)}, {(0, 0), (0, 1), (1, 1), (2, 1), (2, 2)}),
    (3, 3, {(0, 0), (2, 2), (0, 2)}, {(0, 0), (2, 2), (2, 0)}, {(0, 0), (2, 2)}),
    (2, 3, {(0, 0), (1, 1), (0, 2)}, {(0, 0), (1, 1), (1, 2)}, {(0, 0), (1, 1), (1, 2)}),
]


@pytest.mark.parametrize("n,m,fwd,rev,expected", HAND_TRACED)
def test_gdf_hand_traced(n, m, fwd, rev, expected):
    assert grow_diag_final(A(fwd, n, m), A(rev, n, m)).links == expected
    assert grow_diag_final_matrix(n, m, fwd, rev) == expected


def test_gdf_dimension_mismatch():
    with pytest.raises(DataError):
        grow_diag_final(A(set(), 2, 2), A(set(), 2, 3))


@given(alignment_pairs())
def test_gdf_bounds(pair):
    fwd, rev = pair
    out = grow_diag_final(fwd, rev).links
    assert fwd.links & rev.links <= out <= fwd.links | rev.links


@settings(max_examples=300)
@given(alignment_pairs(max_n=5, max_m=5))
def test_gdf_matches_matrix_oracle(pair):
    fwd, rev = pair
    assert grow_diag_final(fwd, rev).links == grow_diag_final_matrix(
        fwd.source_len, fwd.target_len, fwd.links, rev.links
    )


def test_gdf_matches_oracle_on_random_4x4():
    rng = random.Random(2)
    for _ in range(500):
        fwd = random_links(rng, 4, 4, 0.3)
        rev = random_links(rng, 4, 4, 0.3)
        assert grow_diag_final(fwd, rev).links == grow_diag_final_matrix(4, 4, fwd.links, rev.links)


def test_pharaoh_round_trip(tmp_path):
    corpus = ParallelCorpus.from_texts([("a b", "x y z"), ("c", "w")])
    alignments = [A({(0, 0), (1, 2)}, 2, 3), A(set(), 1, 1)]
    write_alignments(tmp_path / "a.txt", alignments)
    assert (tmp_path / "a.txt").read_text() == "0-0 1-2\n\n"
    assert read_alignments(tmp_path / "a.txt", corpus) == alignments


def test_out_of_range_link():
    with pytest.raises(ValueError):
        A({(2, 0)}, 2, 2)


def test_align_corpus_is_deterministic():
    corpus = ParallelCorpus.from_texts([("a b", "x y"), ("a", "x"), ("b c", "y z")])
    first = align_corpus(corpus, 5)[2]
    second = align_corpus(corpus, 5)[2]
    assert first == second
    assert (0, 0) in first[1].links


def _likelihood_trajectory(corpus, iterations):
    values = []
    train_ibm1(corpus, iterations, callback=lambda it, t: values.append(corpus_log_likelihood(t, corpus)))
    return values


def test_em_is_monotone_on_random_corpora():
    rng = random.Random(5)
    for _ in range(5):
        corpus = [
            (tuple(rng.choice("abcdef") for _ in range(rng.randint(1, 6))),
             tuple(rng.choice("uvwxyz") for _ in range(rng.randint(1, 6))))
            for _ in range(15)
        ]
        values = _likelihood_trajectory(corpus, 10)
        assert all(math.isfinite(v) for v in values)
        for a, b in itertools.pairwise(values):
            assert b >= a - 1e-9


def test_plain_model1_prior_is_also_monotone():
    corpus = [(("a", "b"), ("x", "y")), (("a",), ("x",)), (("b", "c", "a"), ("y", "z"))]
    values = []
    train_ibm1(corpus, 8, callback=lambda it, t: values.append(corpus_log_likelihood(t, corpus, None)), null_prior=None)
    for a, b in itertools.pairwise(values):
        assert b >= a - 1e-9


def test_bad_null_prior():
    with pytest.raises(ValueError):
        train_ibm1([(("a",), ("x",))], 2, null_prior=1.0)
