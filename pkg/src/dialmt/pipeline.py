"""End-to-end systems: training stage graphs, tuning, synthesis, reports.

Each system kind may read only certain classes of training data:

================  ========  ===========  =====
kind              parallel  monolingual  pivot
================  ========  ===========  =====
no_translation
direct            x
synthetic         x         x
phrase_pivot                             x
dir_pp            x                      x
dir_pp_morph      x                      x
synthetic_dir_pp  x         x            x
================  ========  ===========  =====

Tune/dev/test sets, analyzer lexicons and explicitly configured LM-only
text are available to every kind.  All reads go through a
:class:`DataCatalog`, which records them and refuses anything outside the
kind's column set.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import DataError
from .align import align_corpus, write_alignments
from .constraints import (
    EPSILON,
    MORPH_FEATURES,
    annotate_phrase_table,
    build_property_inventory,
    estimate_property_distributions,
)
from .corpus import ParallelCorpus, Sentence, load_parallel, load_sentences
from .decoder import Decoder, LogLinearWeights, model_features
from .evaluation import MAX_ORDER, bleu, oov_rate, sentence_stats
from .lm import NGramLM, train_lm
from .morphology import AnalyzerLexicon, detokenize, load_lexicon, segment_d3
from .phrases import PhraseTable, train_phrase_table
from .pivot import triangulate

log = logging.getLogger(__name__)

KINDS = ("no_translation", "direct", "synthetic", "phrase_pivot", "dir_pp", "dir_pp_morph", "synthetic_dir_pp")
DISPLAY_NAMES = {
    "no_translation": "No-Translation",
    "direct": "Direct",
    "synthetic": "Synthetic",
    "phrase_pivot": "Phrase Pivot",
    "dir_pp": "Dir+PP",
    "dir_pp_morph": "Dir+PP+Morph",
    "synthetic_dir_pp": "Synthetic-Dir+PP",
}
PARALLEL, MONOLINGUAL, PIVOT = "parallel", "monolingual", "pivot"
DATA_CLASSES = (PARALLEL, MONOLINGUAL, PIVOT)
REQUIREMENTS = {
    "no_translation": frozenset(),
    "direct": frozenset({PARALLEL}),
    "synthetic": frozenset({PARALLEL, MONOLINGUAL}),
    "phrase_pivot": frozenset({PIVOT}),
    "dir_pp": frozenset({PARALLEL, PIVOT}),
    "dir_pp_morph": frozenset({PARALLEL, PIVOT}),
    "synthetic_dir_pp": frozenset({PARALLEL, MONOLINGUAL, PIVOT}),
}
# catalog item -> data class; classes outside DATA_CLASSES are always readable
ITEM_CLASSES = {
    "train": PARALLEL,
    "mono_src": MONOLINGUAL,
    "mono_tgt": MONOLINGUAL,
    "pivot_src": PIVOT,
    "pivot_tgt": PIVOT,
    "tune": "evaluation",
    "dev": "evaluation",
    "test": "evaluation",
    "src_lexicon": "analyzer",
    "tgt_lexicon": "analyzer",
    "lm_extra": "lm-only",
}
TUNING_GRID = tuple(round(-1.0 + 0.1 * k, 10) for k in range(21))


@dataclass
class SystemConfig:
    kind: str = "direct"
    systems: list[str] = field(default_factory=list)  # for multi-system runs
    # corpora: parallel files as [source, target] path pairs
    train: list[str] | None = None
    tune: list[str] | None = None
    dev: list[str] | None = None
    test: list[str] | None = None
    mono_src: str | None = None
    mono_tgt: str | None = None
    pivot_src: list[str] | None = None  # [source dialect, pivot]
    pivot_tgt: list[str] | None = None  # [pivot, target dialect]
    src_lexicon: str | None = None
    tgt_lexicon: str | None = None
    lm_extra: list[str] = field(default_factory=list)
    normalize: bool = True
    workdir: str | None = None
    # hyperparameters
    lm_order: int = 5
    max_phrase_len: int = 8
    ibm_iterations: int = 5
    distortion_limit: int | None = 6
    stack_size: int | None = 100
    ttable_limit: int | None = 20
    table_combination: str = "backoff"
    epsilon: float = EPSILON
    pivot_combine: str = "sum"
    pivot_filter: bool = True
    tune_restarts: int = 3
    tune_iterations: int = 3
    tune_nbest: int = 100
    tune_search: str = "nbest"
    skip_tuning: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown system kind {self.kind!r}; choose from {', '.join(KINDS)}")
        for k in self.systems:
            if k not in KINDS:
                raise DataError(f"unknown system kind {k!r}")
        if self.pivot_combine not in ("sum", "max"):
            raise DataError(f"pivot_combine must be sum or max, not {self.pivot_combine!r}")
        if self.table_combination not in ("backoff", "union"):
            raise DataError(f"table_combination must be backoff or union, not {self.table_combination!r}")
        if self.tune_search not in ("nbest", "redecode"):
            raise DataError(f"tune_search must be nbest or redecode, not {self.tune_search!r}")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> "SystemConfig":
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise DataError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        data = dict(data)
        if base_dir is not None:
            data = _resolve_paths(data, Path(base_dir))
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "SystemConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise DataError(f"config {path} must hold a JSON object")
        return cls.from_dict(data, Path(path).parent)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_kind(self, kind: str) -> "SystemConfig":
        return SystemConfig(**{**self.to_dict(), "kind": kind})

    def hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in ("workdir", "kind")}
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


PATH_FIELDS = ("train", "tune", "dev", "test", "mono_src", "mono_tgt", "pivot_src", "pivot_tgt", "src_lexicon", "tgt_lexicon", "lm_extra", "workdir")


def _resolve_paths(data: dict, base: Path) -> dict:
    def fix(p):
        return str(p if Path(p).is_absolute() else base / p)

    for key in PATH_FIELDS:
        v = data.get(key)
        if v is None:
            continue
        data[key] = [fix(x) for x in v] if isinstance(v, list) else fix(v)
    return data


# --- data access -------------------------------------------------------------


class DataCatalog:
    """Named inputs, loaded lazily, with every read recorded.

    Values are either the data itself or zero-argument loaders.
    """

    def __init__(self, **items):
        unknown = set(items) - set(ITEM_CLASSES)
        if unknown:
            raise ValueError(f"unknown catalog item(s): {', '.join(sorted(unknown))}")
        self._items = {k: v for k, v in items.items() if v is not None}
        self._loaded: dict = {}
        self.reads: list[tuple[str, str]] = []  # (data class, item)

    def has(self, item: str) -> bool:
        return item in self._items

    def get(self, item: str):
        if item not in self._items:
            raise DataError(f"{item} is not configured")
        self.reads.append((ITEM_CLASSES[item], item))
        if item not in self._loaded:
            v = self._items[item]
            self._loaded[item] = v() if callable(v) else v
        return self._loaded[item]

    def classes_read(self) -> set[str]:
        return {c for c, _ in self.reads if c in DATA_CLASSES}

    def view(self, kind: str) -> "CatalogView":
        return CatalogView(self, kind)

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "DataCatalog":
        norm = cfg.normalize

        def par(paths, labels=("src", "tgt")):
            if paths is None:
                return None
            if len(paths) != 2:
                raise DataError(f"parallel corpus needs [source, target] paths, got {paths}")
            return lambda: load_parallel(paths[0], paths[1], normalize=norm, side_labels=labels)

        def mono(path):
            return None if path is None else (lambda: load_sentences(path, normalize=norm))

        def lex(path):
            return None if path is None else (lambda: load_lexicon(path))

        lm_extra = None
        if cfg.lm_extra:
            lm_extra = lambda: [s for p in cfg.lm_extra for s in load_sentences(p, normalize=norm)]  # noqa: E731
        return cls(
            train=par(cfg.train), tune=par(cfg.tune), dev=par(cfg.dev), test=par(cfg.test),
            mono_src=mono(cfg.mono_src), mono_tgt=mono(cfg.mono_tgt),
            pivot_src=par(cfg.pivot_src, ("src", "piv")), pivot_tgt=par(cfg.pivot_tgt, ("piv", "tgt")),
            src_lexicon=lex(cfg.src_lexicon), tgt_lexicon=lex(cfg.tgt_lexicon), lm_extra=lm_extra,
        )

    @classmethod
    def from_toy(cls, data) -> "DataCatalog":
        return cls(
            train=data.train, tune=data.tune, dev=data.dev, test=data.test,
            mono_src=data.mono_src, mono_tgt=data.mono_tgt,
            pivot_src=data.pivot_src, pivot_tgt=data.pivot_tgt,
            src_lexicon=data.src_lexicon, tgt_lexicon=data.tgt_lexicon,
        )


class CatalogView:
    """A catalog restricted to the data classes one system kind may read."""

    def __init__(self, catalog: DataCatalog, kind: str):
        self.catalog = catalog
        self.kind = kind
        self.allowed = REQUIREMENTS[kind]

    def _check(self, item: str):
        cls = ITEM_CLASSES[item]
        if cls in DATA_CLASSES and cls not in self.allowed:
            raise DataError(f"{DISPLAY_NAMES[self.kind]} may not read {cls} data ({item})")

    def has(self, item: str) -> bool:
        self._check(item)
        return self.catalog.has(item)

    def get(self, item: str):
        self._check(item)
        return self.catalog.get(item)

    def optional(self, item: str):
        return self.get(item) if self.has(item) else None

    def require(self):
        needed = {PARALLEL: ("train",), MONOLINGUAL: ("mono_src", "mono_tgt"), PIVOT: ("pivot_src", "pivot_tgt")}
        for cls in sorted(self.allowed):
            for item in needed[cls]:
                if not self.catalog.has(item):
                    raise DataError(f"{DISPLAY_NAMES[self.kind]} requires {cls} data: {item} is not configured")


# --- trained systems ---------------------------------------------------------


@dataclass
class TrainedSystem:
    kind: str
    tables: list[PhraseTable]
    lm: NGramLM | None
    weights: LogLinearWeights
    src_lexicon: AnalyzerLexicon | None = None
    distortion_limit: int | None = 6
    stack_size: int | None = 100
    ttable_limit: int | None = 20
    combination: str = "backoff"
    artifacts: dict = field(default_factory=dict)

    @property
    def is_identity(self) -> bool:
        return not self.tables

    def feature_names(self) -> list[str]:
        return model_features(self.tables)

    def segment(self, sentence: Sentence) -> Sentence:
        return segment_d3(self.src_lexicon, sentence) if self.src_lexicon is not None else sentence

    def decoder(self, weights=None) -> Decoder:
        return Decoder(
            self.tables, self.lm, weights if weights is not None else self.weights,
            self.distortion_limit, self.stack_size, self.ttable_limit, self.combination,
        )

    def translate(self, sentences: Sequence[Sentence], weights=None) -> list[Sentence]:
        """Detokenized translations of unsegmented source sentences."""
        if self.is_identity:
            return list(sentences)
        dec = self.decoder(weights)
        return [detokenize(dec.decode(self.segment(s)), strict=False) for s in sentences]

    def known_vocabulary(self) -> set[str]:
        vocab: set[str] = set()
        for t in self.tables:
            vocab |= t.source_vocabulary()
        return vocab

    def oov_rate(self, sentences: Sequence[Sentence]) -> float | None:
        if self.is_identity:
            return None
        return oov_rate([self.segment(s) for s in sentences], self.known_vocabulary())


def identity_system() -> TrainedSystem:
    return TrainedSystem("no_translation", [], None, LogLinearWeights())


# --- tuning ------------------------------------------------------------------


def _bleu_from_sums(m: np.ndarray, t: np.ndarray, h: np.ndarray, r: float) -> np.ndarray:
    """Vectorized corpus BLEU: m, t are (..., 4) match/total sums, h hyp lengths."""
    with np.errstate(divide="ignore", invalid="ignore"):
        prec = np.where(t > 0, m / np.maximum(t, 1), 0.0)
        ok = np.all(prec > 0, axis=-1) & (h > 0)
        logmean = np.sum(np.log(np.where(prec > 0, prec, 1.0)), axis=-1) / MAX_ORDER
        bp = np.where(h < r, np.exp(1.0 - r / np.maximum(h, 1)), 1.0)
        return np.where(ok, 100.0 * bp * np.exp(logmean), 0.0)


class _CandidatePool:
    """Pooled n-best candidates per tune sentence, as dense arrays."""

    def __init__(self, names: list[str], refs: list[Sentence]):
        self.names = names
        self.refs = refs
        self.ref_len = float(sum(len(r) for r in refs))
        self.cands: list[dict] = [dict() for _ in refs]  # target -> (features, stats)
        self._arrays = None

    def add(self, k: int, derivations):
        for d in derivations:
            if d.target in self.cands[k]:
                continue
            hyp = detokenize(Sentence.from_words(d.target), strict=False) if d.target else Sentence(())
            st = sentence_stats(hyp, self.refs[k])
            vec = [d.features.get(n, 0.0) for n in self.names]
            self.cands[k][d.target] = (vec, list(st.matches) + list(st.totals) + [st.hyp_length])
            self._arrays = None

    def arrays(self):
        if self._arrays is None:
            maxc = max(len(c) for c in self.cands)
            n, f = len(self.cands), len(self.names)
            X = np.zeros((n, maxc, f))
            S = np.zeros((n, maxc, 2 * MAX_ORDER + 1))
            valid = np.zeros((n, maxc), dtype=bool)
            for k, c in enumerate(self.cands):
                # sorted targets: argmax picks the first maximum, i.e. the
                # lexicographically smallest target among ties
                for c_i, tgt in enumerate(sorted(c)):
                    vec, st = c[tgt]
                    X[k, c_i] = vec
                    S[k, c_i] = st
                    valid[k, c_i] = True
            self._arrays = (X, S, valid)
        return self._arrays

    def bleu_for(self, w: np.ndarray, f: int, grid: np.ndarray) -> np.ndarray:
        """Pool BLEU for each grid value of feature ``f`` with others fixed."""
        X, S, valid = self.arrays()
        base = X @ w - X[:, :, f] * w[f]
        scores = base[:, :, None] + X[:, :, f, None] * grid[None, None, :]  # n, c, g
        scores = np.where(valid[:, :, None], scores, -np.inf)
        pick = np.argmax(scores, axis=1)  # n, g
        chosen = np.take_along_axis(S[:, :, None, :], pick[:, None, :, None], axis=1)[:, 0]  # n, g, stats
        sums = chosen.sum(axis=0)  # g, stats
        return _bleu_from_sums(sums[:, :MAX_ORDER], sums[:, MAX_ORDER:2 * MAX_ORDER], sums[:, -1], self.ref_len)


@dataclass
class TuningRecord:
    iteration: int
    weights: dict
    bleu: float


class Tuner:
    """Random-restart coordinate ascent over a fixed weight grid.

    ``search="nbest"`` scores line-search points by re-ranking n-best lists
    pooled over outer decoding iterations; ``search="redecode"`` decodes the
    tune set for every grid point.  Either way the returned weights are the
    best, by actually decoded tune-set BLEU, among the start weights and
    every outer iterate.
    """

    def __init__(self, system: TrainedSystem, tune_set: ParallelCorpus, restarts: int = 3, iterations: int = 3,
                 seed: int = 0, grid: Sequence[float] = TUNING_GRID, nbest: int = 100, search: str = "nbest",
                 tunable: Sequence[str] | None = None, max_sweeps: int = 4):
        if len(tune_set) == 0:
            raise DataError("tune set is empty")
        self.system = system
        self.tune_set = tune_set
        self.restarts = max(1, restarts)
        self.iterations = max(1, iterations)
        self.seed = seed
        self.grid = np.array(sorted(grid), dtype=float)
        self.nbest = nbest
        self.search = search
        self.names = system.feature_names()
        self.tunable = [n for n in (tunable if tunable is not None else self.names) if n in self.names]
        self.max_sweeps = max_sweeps
        self.sources = [system.segment(s) for s, _ in tune_set]
        self.refs = [t for _, t in tune_set]
        self.history: list[TuningRecord] = []

    def decoded_bleu(self, weights) -> float:
        hyps = self.system.translate([s for s, _ in self.tune_set], weights)
        return bleu(hyps, self.refs).score

    def _ascend(self, start: np.ndarray, objective: Callable[[np.ndarray, int, np.ndarray], np.ndarray], rng: random.Random):
        """Coordinate ascent; ``objective(w, f, values)`` scores each value of weight ``f``."""
        idx = [self.names.index(n) for n in self.tunable]
        best_w, best_b = start, -1.0
        for r in range(self.restarts):
            w = start.copy()
            if r > 0:
                for f in idx:
                    w[f] = rng.choice(list(self.grid))
            cur = float(objective(w, idx[0], np.array([w[idx[0]]]))[0])
            for _ in range(self.max_sweeps):
                changed = False
                for f in idx:
                    curve = objective(w, f, self.grid)
                    g = int(np.argmax(curve))
                    if curve[g] > cur + 1e-12:
                        w[f] = self.grid[g]
                        cur = float(curve[g])
                        changed = True
                if not changed:
                    break
            if cur > best_b + 1e-12:
                best_w, best_b = w.copy(), cur
        return best_w, best_b

    def run(self, start: dict | None = None) -> LogLinearWeights:
        rng = random.Random(self.seed)
        weights = LogLinearWeights.defaults(self.names)
        if start:
            weights.update({k: v for k, v in start.items() if k in weights})
        w = np.array([weights[n] for n in self.names], dtype=float)
        if not self.tunable:
            return weights

        def to_weights(vec):
            return LogLinearWeights({n: float(v) for n, v in zip(self.names, vec)})

        if self.search == "redecode":
            def objective(vec, f, values):
                out = []
                for v in values:
                    trial = vec.copy()
                    trial[f] = v
                    out.append(self.decoded_bleu(to_weights(trial)))
                return np.array(out)

            self.history.append(TuningRecord(0, dict(to_weights(w)), self.decoded_bleu(to_weights(w))))
            new_w, _ = self._ascend(w, objective, rng)
            self.history.append(TuningRecord(1, dict(to_weights(new_w)), self.decoded_bleu(to_weights(new_w))))
        else:
            pool = _CandidatePool(self.names, self.refs)
            current = w
            for it in range(self.iterations + 1):
                dec = self.system.decoder(to_weights(current))
                hyps = []
                for k, src in enumerate(self.sources):
                    best, nb = dec.decode_with_nbest(src, self.nbest)
                    pool.add(k, nb)
                    pool.add(k, [best])
                    hyps.append(detokenize(best.sentence(), strict=False))
                score = bleu(hyps, self.refs).score
                self.history.append(TuningRecord(it, dict(to_weights(current)), score))
                log.info("tuning iteration %d: BLEU %.2f", it, score)
                if it == self.iterations:
                    break
                current, _ = self._ascend(current, pool.bleu_for, rng)
        best = max(self.history, key=lambda rec: (rec.bleu, -rec.iteration))
        return LogLinearWeights(best.weights)


def tune_weights(system: TrainedSystem, tune_set: ParallelCorpus, restarts: int = 3, iterations: int = 3,
                 seed: int = 0, start: dict | None = None, **kwargs) -> LogLinearWeights:
    return Tuner(system, tune_set, restarts, iterations, seed, **kwargs).run(start)


# --- stage graph -------------------------------------------------------------


class Workspace:
    """Per-experiment cache of stage outputs, so systems share earlier stages."""

    def __init__(self):
        self.cache: dict = {}

    def get(self, key, build: Callable):
        if key not in self.cache:
            self.cache[key] = build()
        return self.cache[key]


def _segment_corpus(corpus: ParallelCorpus, src_lex, tgt_lex) -> ParallelCorpus:
    def seg(lex, s):
        return segment_d3(lex, s) if lex is not None else s

    return ParallelCorpus(
        tuple((seg(src_lex, s), seg(tgt_lex, t)) for s, t in corpus), corpus.side_labels, corpus.dropped,
    )


def _ngrams(sentences: Sequence[Sentence], max_len: int) -> set[tuple[str, ...]]:
    out = set()
    for s in sentences:
        w = s.words
        for i in range(len(w)):
            for j in range(i + 1, min(len(w), i + max_len) + 1):
                out.add(w[i:j])
    return out


@dataclass
class _Stages:
    cfg: SystemConfig
    data: CatalogView
    ws: Workspace
    reverse: bool = False  # build the target->source direction

    # lexicons ------------------------------------------------------------
    def lexicons(self):
        src = self.data.optional("src_lexicon")
        tgt = self.data.optional("tgt_lexicon")
        return (tgt, src) if self.reverse else (src, tgt)

    def _tag(self, name):
        return (name, "rev" if self.reverse else "fwd")

    def _out(self, name: str) -> Path | None:
        if not self.cfg.workdir:
            return None
        d = Path(self.cfg.workdir) / self.cfg.kind
        d.mkdir(parents=True, exist_ok=True)
        return d / (("rev." if self.reverse else "") + name)

    def eval_set(self, name):
        c = self.data.get(name)
        return c.swapped() if self.reverse else c

    # direct --------------------------------------------------------------
    def train_corpus(self, override: ParallelCorpus | None = None, tag="train"):
        def build():
            c = override if override is not None else self.data.get("train")
            if self.reverse and override is None:
                c = c.swapped()
            s_lex, t_lex = self.lexicons()
            return c, _segment_corpus(c, s_lex, t_lex)

        return self.ws.get(self._tag(tag), build)

    def direct_model(self, override: ParallelCorpus | None = None, tag="train"):
        def build():
            raw, seg = self.train_corpus(override, tag)
            fwd, rev, al = align_corpus(seg, self.cfg.ibm_iterations)
            table = train_phrase_table(seg, al, fwd, rev, self.cfg.max_phrase_len)
            if (p := self._out(f"{tag}.align")) is not None:
                write_alignments(p, al)
                table.write(self._out(f"{tag}.phrase-table"))
            return raw, seg, al, table

        return self.ws.get(self._tag(f"direct:{tag}"), build)

    # pivot ---------------------------------------------------------------
    def pivot_tables(self, to_translate: Sequence[Sentence]):
        def side_tables():
            sp = self.data.get("pivot_tgt" if self.reverse else "pivot_src")
            pt = self.data.get("pivot_src" if self.reverse else "pivot_tgt")
            if self.reverse:
                sp, pt = pt.swapped(), sp.swapped()
            s_lex, t_lex = self.lexicons()
            out = []
            for corpus, lexs in ((sp, (s_lex, None)), (pt, (None, t_lex))):
                seg = _segment_corpus(corpus, *lexs)
                fwd, rev, al = align_corpus(seg, self.cfg.ibm_iterations)
                out.append(train_phrase_table(seg, al, fwd, rev, self.cfg.max_phrase_len))
            return out

        sp_table, pt_table = self.ws.get(self._tag("pivot:sides"), side_tables)
        s_lex, _ = self.lexicons()
        seg_inputs = [segment_d3(s_lex, s) if s_lex is not None else s for s in to_translate]
        wanted = frozenset(_ngrams(seg_inputs, self.cfg.max_phrase_len)) if self.cfg.pivot_filter else None
        key = self._tag(f"pivot:{self.cfg.pivot_combine}:{hash(wanted)}")

        def build():
            table = triangulate(sp_table, pt_table, self.cfg.pivot_combine,
                                None if wanted is None else wanted.__contains__)
            if (p := self._out("pivot-table")) is not None:
                table.write(p)
            return table

        return self.ws.get(key, build)

    # language model ------------------------------------------------------
    def lm(self, sources: tuple[str, ...], extra: Sequence[Sentence] = ()):
        def build():
            _, t_lex = self.lexicons()
            text: list[Sentence] = []
            for item in sources:
                if item == "train":
                    text += self.train_corpus()[1].targets
                elif item == "pivot":
                    corpus = self.data.get("pivot_src" if self.reverse else "pivot_tgt")
                    side = corpus.sources if self.reverse else corpus.targets
                    text += [segment_d3(t_lex, s) if t_lex else s for s in side]
                elif item == "mono":
                    mono = self.data.get("mono_src" if self.reverse else "mono_tgt")
                    text += [segment_d3(t_lex, s) if t_lex else s for s in mono]
            if not self.reverse and self.data.has("lm_extra"):
                text += [segment_d3(t_lex, s) if t_lex else s for s in self.data.get("lm_extra")]
            text += list(extra)
            model = train_lm(text, self.cfg.lm_order)
            if (p := self._out("lm.arpa")) is not None:
                model.write_arpa(p)
            return model

        return self.ws.get(self._tag(f"lm:{'+'.join(sources)}:{len(extra)}"), build)

    def system(self, kind, tables, lm) -> TrainedSystem:
        s_lex, _ = self.lexicons()
        return TrainedSystem(
            kind, tables, lm, LogLinearWeights.defaults(model_features(tables)), s_lex,
            self.cfg.distortion_limit, self.cfg.stack_size, self.cfg.ttable_limit, self.cfg.table_combination,
        )

    def tuned(self, key: str, system: TrainedSystem, start: dict | None = None) -> TrainedSystem:
        def build():
            if self.cfg.skip_tuning or not self.data.has("tune"):
                w = LogLinearWeights.defaults(system.feature_names())
                if start:
                    w.update({k: v for k, v in start.items() if k in w})
                return w
            return tune_weights(
                system, self.eval_set("tune"), self.cfg.tune_restarts, self.cfg.tune_iterations,
                self.cfg.seed, start, nbest=self.cfg.tune_nbest, search=self.cfg.tune_search,
            )

        system.weights = self.ws.get(self._tag(f"weights:{key}"), build)
        if (p := self._out(f"{key}.weights")) is not None:
            system.weights.write(p)
        return system

    def eval_sources(self, extra: Sequence[Sentence] = ()) -> list[Sentence]:
        out = list(extra)
        for name in ("tune", "dev", "test"):
            if self.data.has(name):
                out += self.eval_set(name).sources
        return out


def _build_direct(st: _Stages, override=None, tag="train") -> TrainedSystem:
    raw, seg, al, table = st.direct_model(override, tag)
    sys_ = st.system("direct", [table], st.lm(("train",) if override is None else ("train", "mono")))
    sys_.artifacts.update(alignments=al, train_segmented=seg)
    return st.tuned(f"direct:{tag}", sys_)


def _build_dir_pp(st: _Stages, to_translate=()) -> TrainedSystem:
    raw, seg, al, direct = st.direct_model()
    pivot = st.pivot_tables(st.eval_sources(to_translate))
    sys_ = st.system("dir_pp", [direct, pivot], st.lm(("train", "pivot")))
    sys_.artifacts.update(alignments=al, train_segmented=seg)
    return st.tuned(f"dir_pp:{len(to_translate)}", sys_)


def _synthesize_with(st: _Stages, builder: Callable) -> ParallelCorpus:
    def build():
        fwd = builder(st)
        inv_stages = _Stages(st.cfg, st.data, st.ws, reverse=True)
        mono_src = st.data.get("mono_src")
        mono_tgt = st.data.get("mono_tgt")
        inv = builder(inv_stages)
        return synthesize_parallel(fwd, inv, mono_src, mono_tgt, st.data.get("train"))

    return st.ws.get(("synthetic-corpus", builder.__name__), build)


def build_synthetic_corpus(config: SystemConfig, catalog: DataCatalog | None = None, translator: str = "direct",
                           workspace: Workspace | None = None) -> ParallelCorpus:
    """The fabricated training corpus a synthetic system would train on."""
    kind = {"direct": "synthetic", "dir_pp": "synthetic_dir_pp"}.get(translator)
    if kind is None:
        raise DataError(f"translator must be direct or dir_pp, not {translator!r}")
    catalog = catalog if catalog is not None else DataCatalog.from_config(config)
    view = catalog.view(kind)
    view.require()
    st = _Stages(config.with_kind(kind), view, workspace or Workspace())
    return _synthesize_with(st, _direct_translator if translator == "direct" else _dir_pp_translator)


def _direct_translator(stages: _Stages) -> TrainedSystem:
    return _build_direct(stages)


def _dir_pp_translator(stages: _Stages) -> TrainedSystem:
    mono = stages.data.get("mono_tgt" if stages.reverse else "mono_src")
    return _build_dir_pp(stages, mono)


def run_system(config: SystemConfig, catalog: DataCatalog | None = None, workspace: Workspace | None = None) -> TrainedSystem:
    """Train (and tune) the system named by ``config.kind``."""
    kind = config.kind
    catalog = catalog if catalog is not None else DataCatalog.from_config(config)
    view = catalog.view(kind)
    view.require()
    if kind == "no_translation":
        return identity_system()
    st = _Stages(config, view, workspace or Workspace())

    if kind == "direct":
        return _build_direct(st)
    if kind == "phrase_pivot":
        pivot = st.pivot_tables(st.eval_sources())
        return st.tuned("phrase_pivot", st.system("phrase_pivot", [pivot], st.lm(("pivot",))))
    if kind == "dir_pp":
        return _build_dir_pp(st)
    if kind == "dir_pp_morph":
        s_lex, t_lex = st.lexicons()
        if s_lex is None or t_lex is None:
            raise DataError("Dir+PP+Morph requires source and target analyzer lexicons")
        base = _build_dir_pp(st)
        raw, seg, al, direct = st.direct_model()
        dist = estimate_property_distributions(raw, al, (s_lex, t_lex), config.epsilon)
        piv_s = view.get("pivot_src")
        piv_t = view.get("pivot_tgt")
        inventory = (
            build_property_inventory([raw.sources, piv_s.sources, st.eval_sources()], s_lex),
            build_property_inventory([raw.targets, piv_t.targets], t_lex),
        )
        annotated = annotate_phrase_table(base.tables[1], inventory, dist)
        if (p := st._out("pivot-table.morph")) is not None:
            annotated.write(p)
        sys_ = st.system("dir_pp_morph", [direct, annotated], base.lm)
        start = dict(base.weights)
        start.update({name: 0.0 for name in MORPH_FEATURES})
        sys_.artifacts.update(alignments=al, distribution=dist)
        return st.tuned("dir_pp_morph", sys_, start)
    if kind in ("synthetic", "synthetic_dir_pp"):
        builder = _direct_translator if kind == "synthetic" else _dir_pp_translator
        corpus = _synthesize_with(st, builder)
        sys_ = _build_direct(st, corpus, tag=f"synthetic:{kind}")
        sys_.kind = kind
        return sys_
    raise DataError(f"unknown system kind {kind!r}")


def synthesize_parallel(fwd_system: TrainedSystem, inv_system: TrainedSystem, mono_src: Sequence[Sentence],
                        mono_tgt: Sequence[Sentence], base: ParallelCorpus) -> ParallelCorpus:
    """``base`` plus forward-translated source text plus back-translated target text."""
    pairs = list(base.pairs)
    mono_src = list(mono_src)
    mono_tgt = list(mono_tgt)
    if mono_src:
        pairs += list(zip(mono_src, fwd_system.translate(mono_src)))
    if mono_tgt:
        pairs += list(zip(inv_system.translate(mono_tgt), mono_tgt))
    return ParallelCorpus(tuple(pairs), base.side_labels, base.dropped)


# --- evaluation and reports ----------------------------------------------------

REPORT_COLUMNS = ("Model", "Dev", "Dev OOV", "Test", "Test OOV")


@dataclass
class SystemResult:
    name: str
    kind: str
    dev_bleu: float
    dev_oov: float | None
    test_bleu: float
    test_oov: float | None


@dataclass
class ExperimentReport:
    rows: list[SystemResult]
    config_hash: str
    seed: int

    def to_tsv(self) -> str:
        if not self.rows:
            raise DataError("a report needs at least one evaluated system")

        def oov(v):
            return "N/A" if v is None else f"{v:.2f}"

        lines = [f"# config_hash={self.config_hash}", f"# seed={self.seed}", "\t".join(REPORT_COLUMNS)]
        for r in self.rows:
            lines.append(f"{r.name}\t{r.dev_bleu:.2f}\t{oov(r.dev_oov)}\t{r.test_bleu:.2f}\t{oov(r.test_oov)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        data = json.loads(text)
        return cls([SystemResult(**r) for r in data["rows"]], data["config_hash"], data["seed"])


def evaluate_system(system: TrainedSystem, catalog: DataCatalog, name: str | None = None) -> tuple[SystemResult, dict]:
    """BLEU/OOV on dev and test; also returns the detokenized hypotheses."""
    out = {}
    hyps = {}
    for split in ("dev", "test"):
        corpus = catalog.get(split)
        h = system.translate(corpus.sources)
        if any(w.startswith("+") or w.endswith("+") for s in h for w in s.words):
            raise DataError(f"{split}: clitic-marked token reached the scorer")
        hyps[split] = h
        out[split] = (bleu(h, corpus.targets).score, system.oov_rate(corpus.sources))
    result = SystemResult(name or DISPLAY_NAMES[system.kind], system.kind, out["dev"][0], out["dev"][1], out["test"][0], out["test"][1])
    return result, hyps


def run_experiment(config: SystemConfig, catalog: DataCatalog | None = None,
                   systems: Sequence[str] | None = None) -> tuple[ExperimentReport, dict[str, TrainedSystem]]:
    kinds = list(systems or config.systems or [config.kind])
    catalog = catalog if catalog is not None else DataCatalog.from_config(config)
    ws = Workspace()
    rows, trained = [], {}
    for kind in kinds:
        cfg = config.with_kind(kind)
        log.info("building %s", DISPLAY_NAMES[kind])
        system = run_system(cfg, catalog, ws)
        result, hyps = evaluate_system(system, catalog)
        if config.workdir:
            d = Path(config.workdir) / kind
            d.mkdir(parents=True, exist_ok=True)
            for split, h in hyps.items():
                (d / f"{split}.hyp").write_text("".join(f"{s}\n" for s in h), encoding="utf-8")
        rows.append(result)
        trained[kind] = system
    return ExperimentReport(rows, config.hash(), config.seed), trained


def emit_report(report: ExperimentReport, path: str | Path | None = None) -> str:
    text = report.to_tsv()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
