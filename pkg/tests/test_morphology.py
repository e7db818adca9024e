import pytest
from conftest import analysis
from hypothesis import given
from hypothesis import strategies as st

from dialmt import DataError
from dialmt.corpus import Sentence, Token
from dialmt.morphology import (
    NA_PROPERTIES,
    AnalyzerLexicon,
    PropertySet,
    analyze,
    detokenize,
    load_lexicon,
    segment_d3,
    segment_with_properties,
    write_lexicon,
)


def test_future_verb_with_object_clitic(small_lexicon):
    out = segment_d3(small_lexicon, Sentence.from_text("HyktbwhA"))
    assert str(out) == "H+ yktbw +hA"
    assert [a.segmentation for a in analyze(small_lexicon, Token("HyktbwhA"))] == ["H+ yktbw +hA"]


def test_unknown_token_fallback(small_lexicon):
    (a,) = analyze(small_lexicon, "xyzzy")
    assert [t.surface for t in a.segments] == ["xyzzy"]
    assert a.properties == NA_PROPERTIES
    assert a.frequency == 0


def test_analyses_ranked_by_frequency(small_lexicon):
    freqs = [a.frequency for a in analyze(small_lexicon, "ktAb")]
    assert freqs == [5, 2]


def test_frequency_ties_break_on_segmentation():
    lex = AnalyzerLexicon({"ab": [analysis("ab", "x", freq=1), analysis("a+ b", "y", freq=1)]})
    assert analyze(lex, "ab")[0].segmentation == "a+ b"


def test_unknown_sentence_unchanged(small_lexicon):
    s = Sentence.from_text("foo bar")
    assert segment_d3(small_lexicon, s) == s


def test_mixed_sentence_expands_only_known_tokens(small_lexicon):
    out = segment_d3(small_lexicon, Sentence.from_text("foo wAlktAb bar bytk"))
    assert out.words == ("foo", "w+", "Al+", "ktAb", "bar", "byt", "+k")


def test_detokenize_examples():
    assert detokenize(Sentence.from_text("H+ yktbw +hA")).words == ("HyktbwhA",)
    assert detokenize(Sentence.from_text("AnA ςndy")).words == ("AnA", "ςndy")


def test_dangling_markers():
    with pytest.raises(DataError, match="dangling clitic prefix at position 0"):
        detokenize(Sentence.from_text("H+"))
    with pytest.raises(DataError, match="dangling clitic suffix at position 0"):
        detokenize(Sentence.from_text("+hA x"))
    assert detokenize(Sentence.from_text("a H+"), strict=False).words == ("a", "H")


def test_segment_properties_label_clitics(small_lexicon):
    seg, props = segment_with_properties(small_lexicon, Sentence.from_text("HyktbwhA xyz"))
    assert len(seg) == len(props) == 4
    assert [p.pos for p in props] == ["prc", "verb", "enc", "na"]


def test_rewrite_segmentations_need_the_option():
    entries = {"HyktbwhA": [analysis("H+ yktbwA +hA", "verb")]}
    with pytest.raises(DataError):
        AnalyzerLexicon(entries)
    lex = AnalyzerLexicon(entries, allow_rewrite=True)
    assert analyze(lex, "HyktbwhA")[0].segmentation == "H+ yktbwA +hA"


def test_property_set_validation():
    with pytest.raises(ValueError):
        PropertySet("maybe", "sg", "m", "noun")
    assert PropertySet("def", "sg", "f", "noun").key() == "def/sg/f/noun"


def test_lexicon_file_round_trip(tmp_path, small_lexicon):
    lex = AnalyzerLexicon({
        **small_lexicon.entries,
        "ktbt": [analysis("ktbt", "verb", number="sg", gender="f", freq=4, extended=(("aspect", "perf"), ("person", "3")))],
    })
    path = tmp_path / "lex.tsv"
    write_lexicon(path, lex)
    again = load_lexicon(path)
    assert again.entries == lex.entries
    assert again.entries["ktbt"][0].properties.value("aspect") == "perf"


def test_lexicon_file_errors(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("ab\ta+ c\tna\tna\tna\tx\t1\n", encoding="utf-8")
    with pytest.raises(DataError, match="concatenate"):
        load_lexicon(path)
    path.write_text("ab\tab\tna\n", encoding="utf-8")
    with pytest.raises(DataError, match="columns"):
        load_lexicon(path)


def test_round_trip_on_every_surface_form(small_lexicon):
    for surface in small_lexicon.entries:
        assert detokenize(segment_d3(small_lexicon, Sentence.from_text(surface))).words == (surface,)


stems = st.text(alphabet="abcdefgAHwyk", min_size=1, max_size=6)


@st.composite
def lexicons(draw):
    entries = {}
    for _ in range(draw(st.integers(1, 8))):
        pre = draw(st.lists(stems, max_size=2))
        base = draw(stems)
        suf = draw(st.lists(stems, max_size=2))
        surface = "".join(pre) + base + "".join(suf)
        seg = " ".join([p + "+" for p in pre] + [base] + ["+" + s for s in suf])
        entries.setdefault(surface, []).append(analysis(seg, "x", freq=draw(st.integers(0, 9))))
    return AnalyzerLexicon(entries)


@given(lexicons(), st.lists(stems, max_size=4))
def test_segmentation_round_trip_and_marker_only_changes(lex, extra):
    words = list(lex.entries) + extra
    sentence = Sentence.from_words(words)
    seg = segment_d3(lex, sentence)
    assert len(seg) >= len(sentence)
    assert "".join(t.bare for t in seg) == "".join(words)
    assert detokenize(seg) == sentence
