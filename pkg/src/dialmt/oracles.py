"""Slow, independently written reference implementations.

These exist to check the fast code paths and to regenerate fixtures.  They
share no helpers with the modules they check beyond the plain data types
(alignments as link sets, tables as dicts) and the LM's own probability
lookup.  Everything here is brute force: enumerate, filter, compare.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np

NEIGHBORHOOD = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


# --- phrase extraction ---------------------------------------------------------


def consistent_phrase_spans(n: int, m: int, links, max_len: int = 8) -> set[tuple[int, int, int, int]]:
    """Every (s_start, s_end, t_start, t_end) box, inclusive, that contains at
    least one link and that no link leaves through a single side."""
    links = list(links)
    out = set()
    for s0 in range(n):
        for s1 in range(s0, min(n, s0 + max_len)):
            for t0 in range(m):
                for t1 in range(t0, min(m, t0 + max_len)):
                    inside = False
                    ok = True
                    for i, j in links:
                        a = s0 <= i <= s1
                        b = t0 <= j <= t1
                        if a and b:
                            inside = True
                        elif a != b:
                            ok = False
                            break
                    if ok and inside:
                        out.add((s0, s1, t0, t1))
    return out


# --- symmetrization --------------------------------------------------------------


def grow_diag_final_matrix(n: int, m: int, fwd_links, rev_links) -> set[tuple[int, int]]:
    """grow-diag-final over boolean matrices, transcribed from the pseudocode."""
    fwd = np.zeros((n, m), dtype=bool)
    rev = np.zeros((n, m), dtype=bool)
    for i, j in fwd_links:
        fwd[i, j] = True
    for i, j in rev_links:
        rev[i, j] = True
    union = fwd | rev
    a = fwd & rev

    def row_free(i):
        return not a[i, :].any()

    def col_free(j):
        return not a[:, j].any()

    while True:
        grew = False
        for i in range(n):
            for j in range(m):
                if not a[i, j]:
                    continue
                for di, dj in NEIGHBORHOOD:
                    ni, nj = i + di, j + dj
                    if not (0 <= ni < n and 0 <= nj < m):
                        continue
                    if a[ni, nj] or not union[ni, nj]:
                        continue
                    if row_free(ni) or col_free(nj):
                        a[ni, nj] = True
                        grew = True
        if not grew:
            break
    for d in (fwd, rev):
        for i in range(n):
            for j in range(m):
                if d[i, j] and (row_free(i) or col_free(j)):
                    a[i, j] = True
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(a))}


# --- pivoting --------------------------------------------------------------------


def compose_join(sp_links, pt_links) -> set[tuple[int, int]]:
    """Relational join of (src, piv) and (piv, tgt) on the pivot column."""
    return {(i, j) for (i, k1) in sp_links for (k2, j) in pt_links if k1 == k2}


def connectivity_bruteforce(sp_links, pt_links, floor: float = 1e-4) -> tuple[float, float]:
    sp = list(sp_links)
    pt = list(pt_links)
    if sp:
        hit = 0
        for _, k in sp:
            if any(k2 == k for k2, _ in pt):
                hit += 1
        c_s = max(floor, hit / len(sp))
    else:
        c_s = floor
    if pt:
        hit = 0
        for k, _ in pt:
            if any(k1 == k for _, k1 in sp):
                hit += 1
        c_t = max(floor, hit / len(pt))
    else:
        c_t = floor
    return c_s, c_t


def triangulate_bruteforce(sp: dict, pt: dict, combine: str = "sum", floor: float = 1e-4) -> dict:
    """``sp``/``pt``: {(src, tgt): (four probabilities, link set)}.

    Returns {(src, tgt): (four marginalized probabilities clipped at 1,
    (C_s, C_t), composed link set)} where the connectivity and composed
    links come from the pivot with the largest C_s + C_t (smallest pivot on
    ties).
    """
    paths = defaultdict(list)
    for (s, p1), (f1, l1) in sp.items():
        for (p2, t), (f2, l2) in pt.items():
            if p1 == p2:
                paths[(s, t)].append((p1, [a * b for a, b in zip(f1, f2)], l1, l2))
    out = {}
    for key, items in paths.items():
        items.sort(key=lambda x: x[0])
        if combine == "sum":
            feats = [sum(x[1][k] for x in items) for k in range(4)]
        else:
            feats = [max(x[1][k] for x in items) for k in range(4)]
        best = None
        for p, _, l1, l2 in items:
            c = connectivity_bruteforce(l1, l2, floor)
            if best is None or c[0] + c[1] > best[0][0] + best[0][1]:
                best = (c, compose_join(l1, l2))
        out[key] = (tuple(min(1.0, v) for v in feats), best[0], best[1])
    return out


# --- morpho-syntactic constraint scores ------------------------------------------


def conditional_tables(counts: dict) -> tuple[dict, dict]:
    """From {(p, q): count} build P(p|q) and P(q|p) tables."""
    col = defaultdict(float)
    row = defaultdict(float)
    for (p, q), c in counts.items():
        col[q] += c
        row[p] += c
    p_given_q = {(p, q): c / col[q] for (p, q), c in counts.items()}
    q_given_p = {(p, q): c / row[p] for (p, q), c in counts.items()}
    return p_given_q, q_given_p


def constraint_scores_bruteforce(source, target, links, src_sets, tgt_sets, counts, epsilon, null_set, key) -> tuple[float, float]:
    """W_s and W_t by enumerating every candidate property-set pair.

    ``src_sets(token)`` / ``tgt_sets(token)`` give candidate sets (``token``
    None for the null token); ``key`` serializes a set for tie-breaking.
    """
    p_given_q, q_given_p = conditional_tables(counts)

    def best_prob(i_tok, j_tok, table):
        cands = []
        for p, q in itertools.product(src_sets(i_tok), tgt_sets(j_tok)):
            cands.append((table.get((p, q), epsilon), key(p), key(q)))
        # highest probability, then smallest serialized pair
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        return cands[0][0]

    links = sorted(links)
    a_pairs = [(source[i], target[j]) for i, j in links]
    a_pairs += [(source[i], None) for i in range(len(source)) if all(i != x for x, _ in links)]
    b_pairs = [(source[i], target[j]) for i, j in links]
    b_pairs += [(None, target[j]) for j in range(len(target)) if all(j != y for _, y in links)]
    w_s = sum(best_prob(i, j, p_given_q) for i, j in a_pairs) / len(a_pairs)
    w_t = sum(best_prob(i, j, q_given_p) for i, j in b_pairs) / len(b_pairs)
    return w_s, w_t


# --- decoding ----------------------------------------------------------------------


def exhaustive_decode(words, tables, lm, weights, distortion_limit=None, combination="backoff"):
    """Best (score, target, features) over every derivation, by enumeration.

    ``tables``: list of (schema, {(src, tgt): feature tuple}).  Scores use
    the decoder's documented feature conventions but are computed from the
    finished target string (LM via ``lm.score_sequence``).
    """
    n = len(words)
    words = tuple(words)
    options = defaultdict(list)
    for i in range(n):
        for j in range(i + 1, n + 1):
            src = words[i:j]
            for ti, (schema, entries) in enumerate(tables):
                found = [(t, f) for (s, t), f in entries.items() if s == src]
                for t, f in sorted(found):
                    feats = {name: math.log(v) for name, v in zip(schema, f)}
                    if len(tables) > 1:
                        feats["provenance"] = 1.0 if ti > 0 else 0.0
                    options[(i, j)].append((t, feats))
                if found and combination == "backoff":
                    break
        if not options[(i, i + 1)]:
            options[(i, i + 1)].append(((words[i],), {"oov": -1.0}))

    def allowed(covered, prev_end, start, end):
        if distortion_limit is None:
            return True
        if abs(start - (prev_end + 1)) > distortion_limit:
            return False
        after = covered | set(range(start, end))
        gaps = [k for k in range(n) if k not in after]
        if gaps and gaps[0] < start and abs(gaps[0] - end) > distortion_limit:
            return False
        return True

    def static_score(feats):
        return math.fsum(weights[k] * v for k, v in feats.items())

    # Every derivation is enumerated; only the LM term is shared between
    # derivations with the same target string, so it is added per string.
    by_target: dict[tuple, tuple[float, list]] = {}

    def rec(covered, prev_end, target, score, path):
        if len(covered) == n:
            key = tuple(target)
            old = by_target.get(key)
            if old is None or score > old[0]:
                by_target[key] = (score, list(path))
            return
        for (i, j), opts in options.items():
            if any(k in covered for k in range(i, j)):
                continue
            if not allowed(covered, prev_end, i, j):
                continue
            jump = abs(i - (prev_end + 1))
            for t, f in opts:
                step = static_score(f) - weights["word_penalty"] * len(t) - weights["distortion"] * jump
                path.append((t, f, jump))
                rec(covered | set(range(i, j)), j - 1, target + list(t), score + step, path)
                path.pop()

    rec(frozenset(), -1, [], 0.0, [])

    best = None
    for target, (_, path) in by_target.items():
        total: dict[str, float] = {}
        for t, f, jump in path:
            for k, v in f.items():
                total[k] = total.get(k, 0.0) + v
            total["distortion"] = total.get("distortion", 0.0) - jump
        total["lm"] = lm.score_sequence(target) * math.log(10)
        total["word_penalty"] = -float(len(target))
        score = math.fsum(weights[k] * v for k, v in total.items())
        if best is None or score > best[0] + 1e-12 or (abs(score - best[0]) <= 1e-12 and target < best[1]):
            best = (score, target, total)
    return best


# --- segmentation and BLEU ------------------------------------------------------


def segment_lookup(rows, words) -> list[str]:
    """D3 segmentation by direct lookup in raw lexicon rows.

    ``rows``: (surface, segmentation, frequency) triples.  The most frequent
    analysis wins, then the alphabetically first segmentation; unknown
    words stay whole.
    """
    best = {}
    for surface, seg, freq in rows:
        cand = (-int(freq), seg)
        if surface not in best or cand < best[surface]:
            best[surface] = cand
    out = []
    for w in words:
        out.extend(best[w][1].split() if w in best else [w])
    return out


def bleu_bruteforce(hyps, refs, max_order: int = 4) -> float:
    """Corpus BLEU in percent with one reference per segment."""
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs, strict=True):
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, max_order + 1):
            hg = [tuple(h[i:i + n]) for i in range(len(h) - n + 1)]
            rg = [tuple(r[i:i + n]) for i in range(len(r) - n + 1)]
            totals[n - 1] += len(hg)
            for g in set(hg):
                matches[n - 1] += min(hg.count(g), rg.count(g))
    if min(matches) == 0:
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_order
    bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    return 100 * bp * math.exp(log_p)


# --- tuning ----------------------------------------------------------------------------


def grid_argmax(values, objective):
    """First grid value with the highest objective."""
    scores = [objective(v) for v in values]
    k = max(range(len(values)), key=lambda x: (scores[x], -x))
    return values[k], scores[k]
