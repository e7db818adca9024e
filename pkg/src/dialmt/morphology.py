"""Lexicon-driven morphological analysis, D3 segmentation and detokenization.

The analyzer is a flat TSV database, one analysis per line::

    surface<TAB>segmentation<TAB>definiteness<TAB>number<TAB>gender<TAB>pos<TAB>frequency[<TAB>key=value;...]

Segmentations are strictly concatenative by default: stripping the ``+``
markers from the segments and joining them must give back the surface form.
A lexicon loaded with ``allow_rewrite=True`` accepts rewrite-style entries
(``HyktbwhA -> H+ yktbwA +hA``) at the cost of lossy detokenization.

Tokens that the lexicon does not know fall back to a single unsegmented
analysis whose core properties are all ``na``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import DataError
from .corpus import Sentence, Token, normalize_text

DEFINITENESS = ("def", "indef", "na")
NUMBER = ("sg", "du", "pl", "na")
GENDER = ("m", "f", "na")
CORE_FEATURES = ("definiteness", "number", "gender", "pos")

PROCLITIC_POS = "prc"
ENCLITIC_POS = "enc"


@dataclass(frozen=True, order=True)
class PropertySet:
    definiteness: str = "na"
    number: str = "na"
    gender: str = "na"
    pos: str = "na"
    # extra features (aspect, person, ...) only used for consistency measurement
    extended: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        core = (self.definiteness, self.number, self.gender, self.pos)
        if core == ("", "", "", ""):
            return  # the empty set assigned to null tokens
        if self.definiteness not in DEFINITENESS:
            raise ValueError(f"bad definiteness {self.definiteness!r}")
        if self.number not in NUMBER:
            raise ValueError(f"bad number {self.number!r}")
        if self.gender not in GENDER:
            raise ValueError(f"bad gender {self.gender!r}")
        if not self.pos or any(c.isspace() for c in self.pos):
            raise ValueError(f"bad pos {self.pos!r}")

    @property
    def is_empty(self) -> bool:
        return self.pos == ""

    def value(self, feature: str) -> str:
        if feature in CORE_FEATURES:
            return getattr(self, feature)
        return dict(self.extended).get(feature, "na")

    def key(self) -> str:
        """Serialized form used for deterministic tie-breaking and reports."""
        if self.is_empty:
            return "<null>"
        return f"{self.definiteness}/{self.number}/{self.gender}/{self.pos}"

    def __str__(self):
        return self.key()


EMPTY_PROPERTIES = PropertySet("", "", "", "")
NA_PROPERTIES = PropertySet()


def clitic_properties(token: Token) -> PropertySet:
    return PropertySet(pos=PROCLITIC_POS if token.is_clitic_prefix else ENCLITIC_POS)


@dataclass(frozen=True)
class MorphAnalysis:
    segments: tuple[Token, ...]
    properties: PropertySet
    frequency: int = 0

    @property
    def segmentation(self) -> str:
        return " ".join(t.surface for t in self.segments)

    def concatenation(self) -> str:
        return "".join(t.bare for t in self.segments)

    def segment_properties(self) -> list[PropertySet]:
        """Property set for every segment: clitics get a clitic label,
        base segments carry the word's analysis."""
        return [
            clitic_properties(t) if (t.is_clitic_prefix or t.is_clitic_suffix) else self.properties
            for t in self.segments
        ]


def _rank_key(a: MorphAnalysis):
    return (-a.frequency, a.segmentation)


class AnalyzerLexicon:
    def __init__(self, entries: Mapping[str, Iterable[MorphAnalysis]], allow_rewrite: bool = False):
        self.allow_rewrite = allow_rewrite
        self.entries: dict[str, tuple[MorphAnalysis, ...]] = {}
        for surface, analyses in entries.items():
            analyses = tuple(sorted(analyses, key=_rank_key))
            if not analyses:
                raise DataError(f"lexicon entry {surface!r} has no analyses")
            if not allow_rewrite:
                for a in analyses:
                    if a.concatenation() != surface:
                        raise DataError(
                            f"segmentation {a.segmentation!r} does not concatenate to {surface!r}"
                        )
            self.entries[surface] = analyses

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, surface: str) -> tuple[MorphAnalysis, ...] | None:
        return self.entries.get(surface)


def fallback_analysis(token: Token) -> MorphAnalysis:
    return MorphAnalysis((token,), NA_PROPERTIES, 0)


def analyze(lexicon: AnalyzerLexicon, token: Token | str) -> tuple[MorphAnalysis, ...]:
    if isinstance(token, str):
        token = Token(token)
    found = lexicon.get(token.surface)
    if found is None:
        return (fallback_analysis(token),)
    return found


def segment_d3(lexicon: AnalyzerLexicon, sentence: Sentence) -> Sentence:
    out = []
    for tok in sentence:
        out.extend(analyze(lexicon, tok)[0].segments)
    return Sentence(tuple(out))


def segment_with_properties(lexicon: AnalyzerLexicon, sentence: Sentence) -> tuple[Sentence, list[PropertySet]]:
    """One-best segmentation plus the property set of every output token."""
    tokens: list[Token] = []
    props: list[PropertySet] = []
    for tok in sentence:
        best = analyze(lexicon, tok)[0]
        tokens.extend(best.segments)
        props.extend(best.segment_properties())
    return Sentence(tuple(tokens)), props


def detokenize(sentence: Sentence | Sequence[str], strict: bool = True) -> Sentence:
    """Glue clitic-marked tokens back onto their hosts.

    With ``strict=False`` dangling markers (which a decoder may produce) are
    dropped instead of raising.
    """
    words = sentence.words if isinstance(sentence, Sentence) else tuple(sentence)
    toks = [Token(w) for w in words]
    if strict and toks:
        if toks[0].is_clitic_suffix:
            raise DataError("dangling clitic suffix at position 0")
        if toks[-1].is_clitic_prefix:
            raise DataError(f"dangling clitic prefix at position {len(toks) - 1}")
    out: list[str] = []
    glue = False
    for tok in toks:
        if out and (glue or tok.is_clitic_suffix):
            out[-1] += tok.bare
        else:
            out.append(tok.bare)
        glue = tok.is_clitic_prefix
    return Sentence.from_words(w for w in out if w)


# --- TSV I/O -----------------------------------------------------------------


def parse_extended(spec: str) -> tuple[tuple[str, str], ...]:
    items = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad extended feature {part!r}")
        k, v = part.split("=", 1)
        items.append((k.strip(), v.strip()))
    return tuple(sorted(items))


def format_extended(extended: tuple[tuple[str, str], ...]) -> str:
    return ";".join(f"{k}={v}" for k, v in extended)


def load_lexicon(path: str | Path, allow_rewrite: bool = False) -> AnalyzerLexicon:
    entries: dict[str, list[MorphAnalysis]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (7, 8):
            raise DataError(f"{path}:{lineno}: expected 7 or 8 tab-separated columns, got {len(cols)}")
        try:
            surface = normalize_text(cols[0])
            segments = tuple(Token(s) for s in normalize_text(cols[1]).split())
            props = PropertySet(
                cols[2], cols[3], cols[4], cols[5],
                parse_extended(cols[7]) if len(cols) == 8 else (),
            )
            freq = int(cols[6])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if freq < 0 or not segments:
            raise DataError(f"{path}:{lineno}: bad frequency or empty segmentation")
        entries.setdefault(surface, []).append(MorphAnalysis(segments, props, freq))
    try:
        return AnalyzerLexicon(entries, allow_rewrite=allow_rewrite)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_lexicon(path: str | Path, lexicon: AnalyzerLexicon) -> None:
    lines = []
    for surface in sorted(lexicon.entries):
        for a in lexicon.entries[surface]:
            p = a.properties
            cols = [surface, a.segmentation, p.definiteness, p.number, p.gender, p.pos, str(a.frequency)]
            if p.extended:
                cols.append(format_extended(p.extended))
            lines.append("\t".join(cols))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
