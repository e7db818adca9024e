"""Checked-in fixtures: small inputs, oracle-generated expectations.

``manifest.tsv`` lists ``name<TAB>stage<TAB>tolerance``.  For fixture
``name`` the inputs are the ``name.*`` files next to it and the expected
output is ``name.expected.txt``, which only :func:`regenerate` writes, from
the brute-force code in :mod:`dialmt.oracles`.  :func:`verify_fixtures`
runs the production code for each stage and compares.

Run ``python -m dialmt.fixtures`` to verify, ``--regenerate`` to rewrite
the expectations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .. import oracles
from ..align import AlignmentSet, grow_diag_final
from ..corpus import Sentence
from ..evaluation import bleu
from ..morphology import load_lexicon, segment_d3
from ..phrases import extract_phrases
from ..pivot import connectivity_scores

FIXTURE_DIR = Path(__file__).parent


@dataclass(frozen=True)
class Fixture:
    name: str
    stage: str
    tolerance: float
    directory: Path

    def path(self, suffix: str) -> Path:
        return self.directory / f"{self.name}.{suffix}"

    def lines(self, suffix: str) -> list[str]:
        return self.path(suffix).read_text(encoding="utf-8").splitlines()


@dataclass(frozen=True)
class FixtureResult:
    name: str
    ok: bool
    diff: list[str]


def load_manifest(directory: str | Path = FIXTURE_DIR) -> list[Fixture]:
    directory = Path(directory)
    rows = (directory / "manifest.tsv").read_text(encoding="utf-8").splitlines()
    if not rows or rows[0].split("\t") != ["name", "stage", "tolerance"]:
        raise ValueError("manifest.tsv must start with 'name<TAB>stage<TAB>tolerance'")
    out = []
    for row in rows[1:]:
        if row.strip():
            name, stage, tol = row.split("\t")
            out.append(Fixture(name, stage, float(tol), directory))
    return out


def _pairs(fx: Fixture):
    for line in fx.lines("input.tsv"):
        dims, *links = line.split("\t")
        yield [int(x) for x in dims.split()], links


def _parse_links(text: str) -> set[tuple[int, int]]:
    return {tuple(int(v) for v in item.split("-")) for item in text.split()}


def _fmt_links(links) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(links))


# --- production runs ---------------------------------------------------------


def _run_segment(fx):
    lex = load_lexicon(fx.path("lexicon.tsv"))
    return [str(segment_d3(lex, Sentence.from_text(s))) for s in fx.lines("input.txt")]


def _run_connectivity(fx):
    out = []
    for (n, k, m), (sp, pt) in _pairs(fx):
        c = connectivity_scores(AlignmentSet.from_pharaoh(sp, n, k), AlignmentSet.from_pharaoh(pt, k, m))
        out.append(f"{c[0]!r}\t{c[1]!r}")
    return out


def _run_bleu(fx):
    return [repr(bleu(fx.lines("hyp.txt"), fx.lines("ref.txt")).score)]


def _run_extract(fx):
    out = []
    for k, (s, t, a) in enumerate(zip(fx.lines("src.txt"), fx.lines("tgt.txt"), fx.lines("align.txt"))):
        s, t = s.split(), t.split()
        for p in extract_phrases((s, t), AlignmentSet.from_pharaoh(a, len(s), len(t))):
            out.append(f"{k} ||| {' '.join(p.source)} ||| {' '.join(p.target)}")
    return sorted(out)


def _run_symmetrize(fx):
    out = []
    for (n, m), (fwd, rev) in _pairs(fx):
        a = grow_diag_final(AlignmentSet.from_pharaoh(fwd, n, m), AlignmentSet.from_pharaoh(rev, n, m))
        out.append(a.to_pharaoh())
    return out


# --- oracle runs -------------------------------------------------------------


def _oracle_segment(fx):
    rows = [line.split("\t")[:7] for line in fx.lines("lexicon.tsv") if line.strip()]
    triples = [(r[0], r[1], r[6]) for r in rows]
    return [" ".join(oracles.segment_lookup(triples, s.split())) for s in fx.lines("input.txt")]


def _oracle_connectivity(fx):
    out = []
    for _, (sp, pt) in _pairs(fx):
        c = oracles.connectivity_bruteforce(_parse_links(sp), _parse_links(pt))
        out.append(f"{c[0]!r}\t{c[1]!r}")
    return out


def _oracle_bleu(fx):
    hyps = [h.split() for h in fx.lines("hyp.txt")]
    refs = [r.split() for r in fx.lines("ref.txt")]
    return [repr(oracles.bleu_bruteforce(hyps, refs))]


def _oracle_extract(fx):
    out = []
    for k, (s, t, a) in enumerate(zip(fx.lines("src.txt"), fx.lines("tgt.txt"), fx.lines("align.txt"))):
        s, t = s.split(), t.split()
        for s0, s1, t0, t1 in oracles.consistent_phrase_spans(len(s), len(t), _parse_links(a)):
            out.append(f"{k} ||| {' '.join(s[s0:s1 + 1])} ||| {' '.join(t[t0:t1 + 1])}")
    return sorted(out)


def _oracle_symmetrize(fx):
    return [
        _fmt_links(oracles.grow_diag_final_matrix(n, m, _parse_links(fwd), _parse_links(rev)))
        for (n, m), (fwd, rev) in _pairs(fx)
    ]


STAGES = {
    "segment": (_run_segment, _oracle_segment),
    "connectivity": (_run_connectivity, _oracle_connectivity),
    "bleu": (_run_bleu, _oracle_bleu),
    "extract": (_run_extract, _oracle_extract),
    "symmetrize": (_run_symmetrize, _oracle_symmetrize),
}


def _close(got: str, want: str, tol: float) -> bool:
    if got == want:
        return True
    a, b = got.split("\t"), want.split("\t")
    if len(a) != len(b):
        return False
    try:
        return all(math.isclose(float(x), float(y), rel_tol=0.0, abs_tol=tol) for x, y in zip(a, b))
    except ValueError:
        return False


def verify_fixture(fx: Fixture) -> FixtureResult:
    if fx.stage not in STAGES:
        return FixtureResult(fx.name, False, [f"unknown stage {fx.stage!r}"])
    got = STAGES[fx.stage][0](fx)
    want = fx.lines("expected.txt")
    diff = []
    for k in range(max(len(got), len(want))):
        g = got[k] if k < len(got) else "<missing>"
        w = want[k] if k < len(want) else "<missing>"
        if not _close(g, w, fx.tolerance):
            diff.append(f"line {k + 1}: expected {w!r}, got {g!r}")
    return FixtureResult(fx.name, not diff, diff)


def verify_fixtures(directory: str | Path = FIXTURE_DIR) -> list[FixtureResult]:
    return [verify_fixture(fx) for fx in load_manifest(directory)]


def regenerate(directory: str | Path = FIXTURE_DIR) -> list[Path]:
    written = []
    for fx in load_manifest(directory):
        lines = STAGES[fx.stage][1](fx)
        path = fx.path("expected.txt")
        path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        written.append(path)
    return written
