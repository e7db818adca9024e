"""Text normalization, corpus containers, splits and plain-text corpus I/O.

Corpus files are UTF-8, one sentence per line, tokens separated by single
spaces.  Segmented text marks proclitics with a trailing ``+`` and enclitics
with a leading ``+`` (``H+ yktbw +hA``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import DataError

# Alif variants (madda, hamza above, hamza below, wasla) -> bare alif;
# alif maqsura -> ya.
DEFAULT_NORMALIZATION = {
    "آ": "ا",
    "أ": "ا",
    "إ": "ا",
    "ٱ": "ا",
    "ى": "ي",
}

_TABLE = str.maketrans(DEFAULT_NORMALIZATION)


def load_normalization_table(path: str | Path) -> dict[str, str]:
    """Read an override table: one ``source<TAB>replacement`` pair per line.

    Characters may be given literally or as ``U+XXXX`` code points.
    """

    def char(spec: str) -> str:
        spec = spec.strip()
        if spec.upper().startswith("U+"):
            return chr(int(spec[2:], 16))
        return spec

    table = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 tab-separated fields")
        src, dst = char(parts[0]), char(parts[1])
        if len(src) != 1:
            raise DataError(f"{path}:{lineno}: source must be a single character")
        table[src] = dst
    return table


def normalize_text(raw: str, table: dict[str, str] | None = None) -> str:
    """Alif/Ya normalization plus whitespace collapsing.

    >>> normalize_text("hello  world ")
    'hello world'
    """
    trans = _TABLE if table is None else str.maketrans(table)
    return " ".join(raw.translate(trans).split())


@dataclass(frozen=True)
class Token:
    surface: str

    def __post_init__(self):
        s = self.surface
        if not s or any(c.isspace() for c in s):
            raise ValueError(f"invalid token {s!r}")
        if s == "+" or (len(s) > 1 and s.startswith("+") and s.endswith("+")):
            raise ValueError(f"token {s!r} carries both clitic markers")

    @property
    def is_clitic_prefix(self) -> bool:
        return self.surface.endswith("+") and not self.surface.startswith("+")

    @property
    def is_clitic_suffix(self) -> bool:
        return self.surface.startswith("+") and not self.surface.endswith("+")

    @property
    def bare(self) -> str:
        """Surface with the clitic marker removed."""
        return self.surface.strip("+")

    def __str__(self):
        return self.surface


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Sentence":
        return cls(tuple(Token(w) for w in words))

    @classmethod
    def from_text(cls, text: str) -> "Sentence":
        return cls.from_words(text.split())

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __str__(self):
        return " ".join(self.words)


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[tuple[Sentence, Sentence], ...]
    side_labels: tuple[str, str] = ("src", "tgt")
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        for k, (s, t) in enumerate(self.pairs):
            if len(s) == 0 or len(t) == 0:
                raise DataError(f"pair {k} has an empty side")

    @classmethod
    def from_texts(cls, pairs: Iterable[tuple[str, str]], side_labels=("src", "tgt")):
        return cls(
            tuple((Sentence.from_text(s), Sentence.from_text(t)) for s, t in pairs),
            side_labels,
        )

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self) -> list[Sentence]:
        return [s for s, _ in self.pairs]

    @property
    def targets(self) -> list[Sentence]:
        return [t for _, t in self.pairs]

    def swapped(self) -> "ParallelCorpus":
        return ParallelCorpus(
            tuple((t, s) for s, t in self.pairs), self.side_labels[::-1], self.dropped
        )

    def subset(self, indices: Sequence[int]) -> "ParallelCorpus":
        return ParallelCorpus(tuple(self.pairs[i] for i in indices), self.side_labels)


@dataclass(frozen=True)
class DataSplit:
    train: ParallelCorpus
    tune: ParallelCorpus
    dev: ParallelCorpus
    test: ParallelCorpus


def _read_lines(path: str | Path) -> list[str]:
    data = Path(path).read_bytes()
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = []
    for lineno, raw in enumerate(lines, 1):
        try:
            out.append(raw.decode("utf-8").rstrip("\r"))
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: undecodable bytes on line {lineno}: {exc.reason}") from None
    return out


def load_sentences(path: str | Path, normalize: bool = False) -> list[Sentence]:
    """Monolingual loader; blank lines are skipped."""
    out = []
    for line in _read_lines(path):
        text = normalize_text(line) if normalize else line
        if text.split():
            out.append(Sentence.from_text(text))
    return out


def load_parallel(src_path, tgt_path, normalize: bool = False, side_labels=("src", "tgt")) -> ParallelCorpus:
    src_lines = _read_lines(src_path)
    tgt_lines = _read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise DataError(f"line count mismatch {len(src_lines)} vs {len(tgt_lines)}")
    pairs = []
    dropped = 0
    for s, t in zip(src_lines, tgt_lines):
        if normalize:
            s, t = normalize_text(s), normalize_text(t)
        if not s.split() or not t.split():
            dropped += 1
            continue
        pairs.append((Sentence.from_text(s), Sentence.from_text(t)))
    return ParallelCorpus(tuple(pairs), tuple(side_labels), dropped)


def write_sentences(path: str | Path, sentences: Iterable[Sentence | Sequence[str] | str]) -> None:
    lines = []
    for s in sentences:
        if isinstance(s, str):
            lines.append(s)
        elif isinstance(s, Sentence):
            lines.append(str(s))
        else:
            lines.append(" ".join(s))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_parallel(src_path, tgt_path, corpus: ParallelCorpus) -> None:
    write_sentences(src_path, corpus.sources)
    write_sentences(tgt_path, corpus.targets)


def split_corpus(corpus: ParallelCorpus, sizes: Sequence[int], seed: int) -> DataSplit:
    """Shuffle deterministically, then cut train/tune/dev/test contiguously."""
    if len(sizes) != 4 or any(n < 0 for n in sizes):
        raise ValueError("sizes must be four non-negative counts")
    if sum(sizes) > len(corpus):
        raise DataError(f"split sizes sum to {sum(sizes)} but corpus has {len(corpus)} pairs")
    order = list(range(len(corpus)))
    random.Random(seed).shuffle(order)
    parts = []
    start = 0
    for n in sizes:
        parts.append(corpus.subset(order[start:start + n]))
        start += n
    return DataSplit(*parts)
