"""Phrase-table triangulation through a pivot language.

Two tables, source->pivot and pivot->target, are joined on shared pivot
phrases.  The four probability features are marginalized over the pivots
(summed by default, or maximized), and each resulting entry gets two
connectivity scores measuring how many of its alignment links actually chain
through the pivot phrase.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from . import DataError
from .align import AlignmentSet
from .phrases import BASE_FEATURES, PHRASE_PENALTY, Phrase, PhraseEntry, PhraseTable

log = logging.getLogger(__name__)

CONNECTIVITY_FEATURES = ("conn_s", "conn_t")
CONNECTIVITY_FLOOR = 1e-4


def compose_alignment(a_sp: AlignmentSet, a_pt: AlignmentSet) -> AlignmentSet:
    if a_sp.target_len != a_pt.source_len:
        raise DataError(f"pivot length mismatch: {a_sp.target_len} vs {a_pt.source_len}")
    by_pivot: dict[int, list[int]] = {}
    for k, j in a_pt.links:
        by_pivot.setdefault(k, []).append(j)
    links = {(i, j) for i, k in a_sp.links for j in by_pivot.get(k, ())}
    return AlignmentSet(frozenset(links), a_sp.source_len, a_pt.target_len)


def connectivity_scores(a_sp: AlignmentSet, a_pt: AlignmentSet, floor: float = CONNECTIVITY_FLOOR) -> tuple[float, float]:
    """Fraction of source-side and target-side links that reach the other side.

    Empty link sets and zero fractions are floored so the log-linear model
    stays finite.
    """
    if a_sp.target_len != a_pt.source_len:
        raise DataError(f"pivot length mismatch: {a_sp.target_len} vs {a_pt.source_len}")
    pivots_sp = {k for _, k in a_sp.links}
    pivots_pt = {k for k, _ in a_pt.links}
    c_s = floor
    if a_sp.links:
        c_s = max(floor, sum(1 for _, k in a_sp.links if k in pivots_pt) / len(a_sp.links))
    c_t = floor
    if a_pt.links:
        c_t = max(floor, sum(1 for k, _ in a_pt.links if k in pivots_sp) / len(a_pt.links))
    return c_s, c_t


@dataclass
class PivotedEntry:
    source: Phrase
    target: Phrase
    pivot_support: set
    a_sp: AlignmentSet
    a_pt: AlignmentSet
    composed: AlignmentSet
    connectivity: tuple[float, float]
    features: list  # the four marginalized probability features, BASE_FEATURES order


def _feature_getter(table: PhraseTable) -> Callable[[PhraseEntry], tuple[float, float, float, float]]:
    try:
        idx = [table.schema.index(name) for name in BASE_FEATURES[:4]]
    except ValueError:
        raise DataError(f"table schema {table.schema} lacks the base phrase features") from None
    return lambda e: tuple(e.features[i] for i in idx)


def triangulate_entries(
    table_sp: PhraseTable,
    table_pt: PhraseTable,
    combine: str = "sum",
    source_filter: Callable[[Phrase], bool] | None = None,
) -> dict[tuple[Phrase, Phrase], PivotedEntry]:
    if combine not in ("sum", "max"):
        raise ValueError(f"unknown pivot combination {combine!r}")
    get_sp = _feature_getter(table_sp)
    get_pt = _feature_getter(table_pt)

    # sort-merge join on the pivot phrase
    left = sorted(
        (p, s, e) for (s, p), e in table_sp.entries.items()
        if source_filter is None or source_filter(s)
    )
    right = table_pt.by_source()
    right_keys = sorted(right)

    out: dict[tuple[Phrase, Phrase], PivotedEntry] = {}
    li = ri = 0
    while li < len(left) and ri < len(right_keys):
        p = left[li][0]
        rp = right_keys[ri]
        if p < rp:
            li += 1
            continue
        if rp < p:
            ri += 1
            continue
        group_end = li
        while group_end < len(left) and left[group_end][0] == p:
            group_end += 1
        for _, s, e1 in left[li:group_end]:
            # features of s->p as (p_s_given_t, lex_s_given_t, p_t_given_s, lex_t_given_s)
            f1 = get_sp(e1)
            for t, e2 in right[p]:
                f2 = get_pt(e2)
                prods = [f1[k] * f2[k] for k in range(4)]
                conn = connectivity_scores(e1.alignment, e2.alignment)
                key = (s, t)
                entry = out.get(key)
                if entry is None:
                    out[key] = PivotedEntry(
                        s, t, {p}, e1.alignment, e2.alignment,
                        compose_alignment(e1.alignment, e2.alignment), conn, prods,
                    )
                    continue
                entry.pivot_support.add(p)
                if combine == "sum":
                    entry.features = [a + b for a, b in zip(entry.features, prods)]
                else:
                    entry.features = [max(a, b) for a, b in zip(entry.features, prods)]
                # pivots arrive in sorted order, so ties keep the smaller pivot
                if conn[0] + conn[1] > entry.connectivity[0] + entry.connectivity[1]:
                    entry.a_sp, entry.a_pt = e1.alignment, e2.alignment
                    entry.composed = compose_alignment(e1.alignment, e2.alignment)
                    entry.connectivity = conn
        li = group_end
        ri += 1
    return out


def triangulate(
    table_sp: PhraseTable,
    table_pt: PhraseTable,
    combine: str = "sum",
    source_filter: Callable[[Phrase], bool] | None = None,
) -> PhraseTable:
    entries = triangulate_entries(table_sp, table_pt, combine, source_filter)
    table = PhraseTable(BASE_FEATURES + CONNECTIVITY_FEATURES)
    if not entries:
        log.warning("triangulation produced no entries: the tables share no pivot phrase")
    for (s, t), e in sorted(entries.items()):
        probs = tuple(min(1.0, v) for v in e.features)
        table.add(s, t, PhraseEntry(probs + (PHRASE_PENALTY,) + e.connectivity, e.composed, (0, 0, 0)))
    return table
