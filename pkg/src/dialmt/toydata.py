"""Synthetic dialect pair with a shared latent language and a pivot language.

Sentences are sampled as latent structures (lemmas plus morpho-syntactic
features) and realized three ways:

* dialect ``src`` and dialect ``tgt``: rich morphology.  Definiteness,
  conjunctions, some prepositions, the future particle and object pronouns
  are clitics; number and gender are inflectional suffixes on the stem.
  About a third of the stems are shared, the rest differ.
* ``piv``: an analytic, English-like language with no gender, no dual, a
  separate article and adjectives before nouns.

Divergences between the dialects are planted: nouns whose gender differs,
occasional definiteness mismatches, plural agreement with duals on the
target side and a few lemmas whose POS label differs.  The realized
consistency of each feature over the gold token alignment of the training
corpus is recorded in the manifest, along with the lemmas withheld from the
training data (present in dev/test and in the pivot corpora).
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .align import AlignmentSet
from .corpus import ParallelCorpus, Sentence, write_parallel, write_sentences
from .morphology import (
    AnalyzerLexicon,
    MorphAnalysis,
    PropertySet,
    Token,
    clitic_properties,
    write_lexicon,
)

CONSONANTS = "btjHxdrzsSDTZEgfqklmnhwy$"
VOWELS = "aiuAwy"
PIVOT_LETTERS = "bcdfghklmnprstvw"
PIVOT_VOWELS = "aeiou"

# inflectional suffixes: (number, gender) -> suffix
NOUN_SUFFIX = {
    "src": {("sg", "m"): "", ("sg", "f"): "p", ("du", "m"): "yn", ("du", "f"): "tyn",
            ("pl", "m"): "wn", ("pl", "f"): "At"},
    "tgt": {("sg", "m"): "", ("sg", "f"): "e", ("du", "m"): "ayn", ("du", "f"): "tayn",
            ("pl", "m"): "in", ("pl", "f"): "at"},
}
VERB_PREFIX = {"src": {"m": "y", "f": "t"}, "tgt": {"m": "bi", "f": "bt"}}
VERB_SUFFIX = {"src": {"sg": "", "du": "A", "pl": "wA"}, "tgt": {"sg": "", "du": "u", "pl": "u"}}
OBJECT_CLITIC = {
    "src": {("sg", "m"): "+h", ("sg", "f"): "+hA", ("pl", None): "+hm"},
    "tgt": {("sg", "m"): "+o", ("sg", "f"): "+ha", ("pl", None): "+hon"},
}
OBJECT_PIVOT = {("sg", "m"): "him", ("sg", "f"): "her", ("pl", None): "them"}
DEF_CLITIC = {"src": "Al+", "tgt": "il+"}
CONJ = {"src": "w+", "tgt": "w+", "piv": "and"}
FUTURE = {"src": "H+", "tgt": "rH", "piv": "will"}

PREPOSITIONS = [
    # (src word, tgt form, tgt form is a proclitic, pivot)
    ("fy", "b+", True, "in"),
    ("En", "En", False, "about"),
    ("mE", "mE", False, "with"),
    ("ll", "l+", True, "to"),
    ("mn", "mn", False, "from"),
    ("Ely", "Ela", False, "on"),
    ("qdAm", "qddAm", False, "before"),
    ("bEd", "baEd", False, "after"),
]


@dataclass
class ToyConfig:
    seed: int = 42
    vocab_size: int = 500
    n_train: int = 1000
    n_tune: int = 100
    n_dev: int = 200
    n_test: int = 200
    n_pivot_src: int = 2000
    n_pivot_tgt: int = 1000
    shared_stem_rate: float = 0.35
    gender_flip_rate: float = 0.15
    definiteness_flip_rate: float = 0.08
    pos_flip_rate: float = 0.08
    planted_oov_rate: float = 0.08
    planted_min_pivot_occurrences: int = 4
    zipf_exponent: float = 1.8
    pos_shares: tuple[float, float, float] = (0.55, 0.25, 0.2)  # noun, verb, adj
    adjective_rate: float = 0.4
    pp_rate: float = 0.45


@dataclass
class Lemma:
    pos: str  # noun / adj / verb
    stems: dict[str, str]
    pivot: str
    gender: dict[str, str] = field(default_factory=dict)  # nouns only
    label: dict[str, str] = field(default_factory=dict)  # POS label per dialect


@dataclass
class _Seg:
    text: str  # clitic-marked segment
    props: PropertySet
    unit: int | None  # latent unit id used for the gold alignment


@dataclass
class ToyData:
    config: ToyConfig
    train: ParallelCorpus
    tune: ParallelCorpus
    dev: ParallelCorpus
    test: ParallelCorpus
    pivot_src: ParallelCorpus  # src dialect -> pivot
    pivot_tgt: ParallelCorpus  # pivot -> tgt dialect
    mono_src: list[Sentence]
    mono_tgt: list[Sentence]
    src_lexicon: AnalyzerLexicon
    tgt_lexicon: AnalyzerLexicon
    train_gold: list[AlignmentSet]
    planted_oov_lemmas: list[str]
    planted_oov_types: list[str]
    planted_consistency: dict[str, float]

    def manifest(self) -> dict:
        c = self.config
        return {
            "config": c.__dict__,
            "sizes": {
                "train": len(self.train), "tune": len(self.tune), "dev": len(self.dev),
                "test": len(self.test), "pivot_src": len(self.pivot_src),
                "pivot_tgt": len(self.pivot_tgt), "mono_src": len(self.mono_src),
                "mono_tgt": len(self.mono_tgt),
            },
            "planted_oov_lemmas": self.planted_oov_lemmas,
            "planted_oov_types": self.planted_oov_types,
            "planted_consistency": self.planted_consistency,
        }

    def write(self, outdir: str | Path) -> dict[str, Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name in ("train", "tune", "dev", "test"):
            corpus = getattr(self, name)
            paths[f"{name}_src"] = out / f"{name}.src"
            paths[f"{name}_tgt"] = out / f"{name}.tgt"
            write_parallel(paths[f"{name}_src"], paths[f"{name}_tgt"], corpus)
        paths["pivot_src_src"] = out / "pivot_src.src"
        paths["pivot_src_piv"] = out / "pivot_src.piv"
        write_parallel(paths["pivot_src_src"], paths["pivot_src_piv"], self.pivot_src)
        paths["pivot_tgt_piv"] = out / "pivot_tgt.piv"
        paths["pivot_tgt_tgt"] = out / "pivot_tgt.tgt"
        write_parallel(paths["pivot_tgt_piv"], paths["pivot_tgt_tgt"], self.pivot_tgt)
        paths["mono_src"] = out / "mono.src"
        paths["mono_tgt"] = out / "mono.tgt"
        write_sentences(paths["mono_src"], self.mono_src)
        write_sentences(paths["mono_tgt"], self.mono_tgt)
        paths["src_lexicon"] = out / "lexicon.src.tsv"
        paths["tgt_lexicon"] = out / "lexicon.tgt.tsv"
        write_lexicon(paths["src_lexicon"], self.src_lexicon)
        write_lexicon(paths["tgt_lexicon"], self.tgt_lexicon)
        paths["train_gold"] = out / "train.gold.align"
        with open(paths["train_gold"], "w", encoding="utf-8") as fh:
            for a in self.train_gold:
                fh.write(a.to_pharaoh() + "\n")
        paths["manifest"] = out / "manifest.json"
        paths["manifest"].write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return paths


class _Generator:
    def __init__(self, cfg: ToyConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.used_stems = {"src": set(), "tgt": set()}
        self.used_pivots = set()
        self.lemmas: list[Lemma] = []
        self._build_lemmas()

    # --- vocabulary ---------------------------------------------------------

    def _stem(self) -> str:
        r = self.rng
        while True:
            n = r.choice((3, 3, 4, 4, 5))
            s = "".join(r.choice(CONSONANTS) if k % 2 == 0 or r.random() < 0.5 else r.choice(VOWELS) for k in range(n))
            # stems end in a consonant so suffixes stay recognizable
            if s[-1] in VOWELS:
                s = s[:-1] + r.choice(CONSONANTS)
            if s not in self.used_stems["src"] and s not in self.used_stems["tgt"]:
                return s

    def _pivot_word(self) -> str:
        r = self.rng
        while True:
            n = r.choice((2, 2, 3))
            w = "".join(r.choice(PIVOT_LETTERS) + r.choice(PIVOT_VOWELS) for _ in range(n)) + r.choice(PIVOT_LETTERS)
            if w not in self.used_pivots and not w.endswith("s"):
                self.used_pivots.add(w)
                return w

    def _build_lemmas(self):
        r = self.rng
        cfg = self.cfg
        for k in range(cfg.vocab_size):
            u = r.random()
            n_share, v_share, _ = cfg.pos_shares
            pos = "noun" if u < n_share else ("verb" if u < n_share + v_share else "adj")
            s_stem = self._stem()
            self.used_stems["src"].add(s_stem)
            if r.random() < cfg.shared_stem_rate:
                t_stem = s_stem
            else:
                t_stem = self._stem()
            self.used_stems["tgt"].add(t_stem)
            lem = Lemma(pos, {"src": s_stem, "tgt": t_stem}, self._pivot_word())
            if pos == "noun":
                g = r.choice("mf")
                flip = r.random() < cfg.gender_flip_rate
                lem.gender = {"src": g, "tgt": ("f" if g == "m" else "m") if flip else g}
            lem.label = {"src": pos, "tgt": pos}
            if r.random() < cfg.pos_flip_rate:
                lem.label["tgt"] = {"noun": "adj", "adj": "noun", "verb": "noun"}[pos]
            self.lemmas.append(lem)
        self.by_pos = {p: [i for i, l in enumerate(self.lemmas) if l.pos == p] for p in ("noun", "verb", "adj")}
        # Zipf-like weights by position within each class
        self.weights = {p: [1.0 / (rank + 2) ** cfg.zipf_exponent for rank in range(len(ids))] for p, ids in self.by_pos.items()}
        content = list(range(len(self.lemmas)))
        n_planted = max(1, int(round(cfg.planted_oov_rate * len(content))))
        # withhold mid-frequency lemmas: frequent enough to matter in dev/test
        candidates = [i for p, ids in self.by_pos.items() for rank, i in enumerate(ids) if 3 <= rank < max(8, len(ids) // 2)]
        self.planted = sorted(r.sample(candidates, min(n_planted, len(candidates))))
        self.planted_set = set(self.planted)

    def _pick(self, pos: str, exclude: set[int], force: int | None = None) -> int:
        if force is not None and self.lemmas[force].pos == pos:
            return force
        ids = self.by_pos[pos]
        ws = self.weights[pos]
        while True:
            i = self.rng.choices(ids, ws)[0]
            if i not in exclude:
                return i

    # --- latent sentences ---------------------------------------------------

    def latent(self, exclude: set[int], force: int | None = None) -> dict:
        r = self.rng
        place = None
        if force is not None:
            pos = self.lemmas[force].pos
            place = {"noun": r.choice(("subj", "obj", "pp")), "adj": r.choice(("subj", "obj")), "verb": "verb"}[pos]

        def np(slot):
            num = r.choices(("sg", "du", "pl"), (0.6, 0.15, 0.25))[0]
            noun = self._pick("noun", exclude, force if place == slot and self.lemmas[force].pos == "noun" else None)
            adj = None
            want_adj = r.random() < self.cfg.adjective_rate or (place == slot and self.lemmas[force].pos == "adj")
            if want_adj:
                adj = self._pick("adj", exclude, force if place == slot and self.lemmas[force].pos == "adj" else None)
            return {"noun": noun, "adj": adj, "def": r.random() < 0.5, "num": num,
                    "def_flip": r.random() < self.cfg.definiteness_flip_rate}

        sent = {"conj": r.random() < 0.2, "subj": np("subj")}
        sent["verb"] = self._pick("verb", exclude, force if place == "verb" else None)
        sent["future"] = r.random() < 0.25
        sent["aspect"] = r.choice(("perf", "impf"))
        sent["aspect_tgt"] = sent["aspect"] if r.random() < 0.35 else ("impf" if sent["aspect"] == "perf" else "perf")
        sent["person"] = r.choice("123")
        sent["person_tgt"] = sent["person"] if r.random() < 0.3 else r.choice([p for p in "123" if p != sent["person"]])
        u = r.random()
        if u < 0.45 or place == "obj":
            sent["obj"] = np("obj")
        elif u < 0.7:
            sent["obj_pron"] = r.choice(list(OBJECT_PIVOT))
        if r.random() < self.cfg.pp_rate or place == "pp":
            sent["prep"] = r.randrange(len(PREPOSITIONS))
            sent["pp"] = np("pp")
        return sent

    # --- realization --------------------------------------------------------

    def _np_words(self, np: dict, side: str, units: Counter, base: int, first_conj: bool):
        """Words of a noun phrase; each word is a list of segments."""
        noun = self.lemmas[np["noun"]]
        gender = noun.gender[side]
        definite = np["def"] != (side == "tgt" and np["def_flip"])
        d = "def" if definite else "indef"
        num = np["num"]
        words = []
        noun_word = []
        if definite:
            noun_word.append(_Seg(DEF_CLITIC[side], clitic_properties(Token(DEF_CLITIC[side])), base + 1))
        noun_word.append(_Seg(
            noun.stems[side] + NOUN_SUFFIX[side][(num, gender)],
            PropertySet(d, num, gender, noun.label[side]),
            base + 2,
        ))
        words.append(noun_word)
        if np["adj"] is not None:
            adj = self.lemmas[np["adj"]]
            anum = "pl" if side == "tgt" and num == "du" else num
            w = []
            if definite:
                w.append(_Seg(DEF_CLITIC[side], clitic_properties(Token(DEF_CLITIC[side])), base + 3))
            w.append(_Seg(
                adj.stems[side] + NOUN_SUFFIX[side][(anum, gender)],
                PropertySet(d, anum, gender, adj.label[side]),
                base + 4,
            ))
            words.append(w)
        return words

    def realize(self, sent: dict, side: str) -> list[list[_Seg]]:
        words: list[list[_Seg]] = []
        subj_gender = self.lemmas[sent["subj"]["noun"]].gender[side]
        subj_num = sent["subj"]["num"]
        words += self._np_words(sent["subj"], side, None, 100, False)
        verb = self.lemmas[sent["verb"]]
        vnum = subj_num
        if side == "tgt" and vnum == "du":
            vnum = "pl"
        ext = (("aspect", sent["aspect"] if side == "src" else sent["aspect_tgt"]),
               ("person", sent["person"] if side == "src" else sent["person_tgt"]))
        vprops = PropertySet("na", vnum, subj_gender, verb.label[side], ext)
        vword = []
        if sent["future"]:
            if side == "src":
                vword.append(_Seg(FUTURE["src"], clitic_properties(Token(FUTURE["src"])), 10))
            else:
                words.append([_Seg(FUTURE["tgt"], PropertySet(pos="part"), 10)])
        vword.append(_Seg(VERB_PREFIX[side][subj_gender] + verb.stems[side] + VERB_SUFFIX[side][subj_num], vprops, 11))
        if "obj_pron" in sent:
            clitic = OBJECT_CLITIC[side][sent["obj_pron"]]
            vword.append(_Seg(clitic, clitic_properties(Token(clitic)), 12))
        words.append(vword)
        if "obj" in sent:
            words += self._np_words(sent["obj"], side, None, 200, False)
        if "prep" in sent:
            s_word, t_form, t_clitic, _ = PREPOSITIONS[sent["prep"]]
            pp_words = self._np_words(sent["pp"], side, None, 300, False)
            if side == "src":
                words.append([_Seg(s_word, PropertySet(pos="prep"), 20)])
                words += pp_words
            elif t_clitic:
                pp_words[0].insert(0, _Seg(t_form, clitic_properties(Token(t_form)), 20))
                words += pp_words
            else:
                words.append([_Seg(t_form, PropertySet(pos="prep"), 20)])
                words += pp_words
        if sent["conj"]:
            words[0].insert(0, _Seg(CONJ[side], clitic_properties(Token(CONJ[side])), 1))
        return words

    def realize_pivot(self, sent: dict) -> list[str]:
        def np_words(np):
            noun = self.lemmas[np["noun"]]
            out = []
            if np["def"]:
                out.append("the")
            if np["num"] == "du":
                out.append("two")
            if np["adj"] is not None:
                out.append(self.lemmas[np["adj"]].pivot)
            out.append(noun.pivot + ("s" if np["num"] != "sg" else ""))
            return out

        words = []
        if sent["conj"]:
            words.append(CONJ["piv"])
        words += np_words(sent["subj"])
        if sent["future"]:
            words.append(FUTURE["piv"])
        words.append(self.lemmas[sent["verb"]].pivot)
        if "obj_pron" in sent:
            words.append(OBJECT_PIVOT[sent["obj_pron"]])
        if "obj" in sent:
            words += np_words(sent["obj"])
        if "prep" in sent:
            words.append(PREPOSITIONS[sent["prep"]][3])
            words += np_words(sent["pp"])
        return words


def _surface(words: list[list[_Seg]]) -> list[str]:
    return ["".join(s.text.strip("+") for s in w) for w in words]


def _segments(words: list[list[_Seg]]) -> list[_Seg]:
    return [s for w in words for s in w]


def _gold(src_words, tgt_words) -> AlignmentSet:
    s = _segments(src_words)
    t = _segments(tgt_words)
    links = frozenset(
        (i, j) for i, a in enumerate(s) for j, b in enumerate(t)
        if a.unit is not None and a.unit == b.unit
    )
    return AlignmentSet(links, len(s), len(t))


def _consistency(gold_pairs, features) -> dict[str, float]:
    rates = {}
    for f in features:
        kept = total = 0
        for s_segs, t_segs, a in gold_pairs:
            for i, j in a.links:
                total += 1
                kept += s_segs[i].props.value(f) == t_segs[j].props.value(f)
        rates[f] = 100.0 * kept / total if total else 0.0
    return rates


def generate_toy_data(config: ToyConfig | None = None, **overrides) -> ToyData:
    cfg = config or ToyConfig()
    if overrides:
        cfg = ToyConfig(**{**cfg.__dict__, **overrides})
    for name in ("vocab_size", "n_train", "n_tune", "n_dev", "n_test", "n_pivot_src", "n_pivot_tgt"):
        if getattr(cfg, name) < 1:
            raise ValueError(f"{name} must be >= 1")
    g = _Generator(cfg)
    lex_counts = {"src": Counter(), "tgt": Counter()}

    def record(words, side):
        for w in words:
            surface = "".join(s.text.strip("+") for s in w)
            seg = " ".join(s.text for s in w)
            base = [s for s in w if not (s.text.startswith("+") or s.text.endswith("+"))]
            props = base[0].props if base else PropertySet()
            key = (seg, props)
            lex_counts[side][(surface, key)] += 1

    def make_parallel(n, exclude, sides, force_list=()):
        pairs, structs = [], []
        forced = list(force_list)
        for k in range(n):
            force = forced[k] if k < len(forced) else None
            sent = g.latent(exclude, force)
            realized = {}
            for side in sides:
                if side == "piv":
                    realized[side] = g.realize_pivot(sent)
                else:
                    realized[side] = g.realize(sent, side)
                    record(realized[side], side)
            pairs.append(realized)
            structs.append(sent)
        return pairs

    planted = g.planted_set
    train_raw = make_parallel(cfg.n_train, planted, ("src", "tgt"))
    tune_raw = make_parallel(cfg.n_tune, set(), ("src", "tgt"))
    dev_raw = make_parallel(cfg.n_dev, set(), ("src", "tgt"))
    test_raw = make_parallel(cfg.n_test, set(), ("src", "tgt"))
    k = cfg.planted_min_pivot_occurrences
    force_sp = [lem for lem in g.planted for _ in range(k)]
    force_pt = [lem for lem in g.planted for _ in range(k)]
    g.rng.shuffle(force_sp)
    g.rng.shuffle(force_pt)
    piv_src_raw = make_parallel(cfg.n_pivot_src, set(), ("src", "piv"), force_sp)
    piv_tgt_raw = make_parallel(cfg.n_pivot_tgt, set(), ("piv", "tgt"), force_pt)

    def corpus(raw, a, b, labels):
        pairs = []
        for r in raw:
            sa = r[a] if a == "piv" else _surface(r[a])
            sb = r[b] if b == "piv" else _surface(r[b])
            pairs.append((Sentence.from_words(sa), Sentence.from_words(sb)))
        return ParallelCorpus(tuple(pairs), labels)

    train = corpus(train_raw, "src", "tgt", ("src", "tgt"))
    tune = corpus(tune_raw, "src", "tgt", ("src", "tgt"))
    dev = corpus(dev_raw, "src", "tgt", ("src", "tgt"))
    test = corpus(test_raw, "src", "tgt", ("src", "tgt"))
    pivot_src = corpus(piv_src_raw, "src", "piv", ("src", "piv"))
    pivot_tgt = corpus(piv_tgt_raw, "piv", "tgt", ("piv", "tgt"))

    # lexicons: each surface form lists every analysis seen, ranked by frequency
    lexicons = {}
    for side in ("src", "tgt"):
        entries: dict[str, list[MorphAnalysis]] = {}
        for (surface, (seg, props)), c in sorted(lex_counts[side].items(), key=lambda kv: (kv[0][0], kv[0][1][0], kv[0][1][1].key(), kv[0][1][1].extended)):
            entries.setdefault(surface, []).append(
                MorphAnalysis(tuple(Token(t) for t in seg.split()), props, c)
            )
        # analyses differing only in extended features are merged
        merged = {}
        for surface, analyses in entries.items():
            by_key: dict = {}
            for a in analyses:
                kk = (a.segmentation, a.properties)
                if kk in by_key:
                    prev = by_key[kk]
                    by_key[kk] = MorphAnalysis(prev.segments, prev.properties if prev.frequency >= a.frequency else a.properties, prev.frequency + a.frequency)
                else:
                    by_key[kk] = a
            merged[surface] = list(by_key.values())
        lexicons[side] = AnalyzerLexicon(merged)

    train_gold = [_gold(r["src"], r["tgt"]) for r in train_raw]

    # planted rates are measured with the lexicon's one-best analyses, exactly
    # as an analyzer-based measurement would see them
    def one_best(words, side):
        out = []
        lex = lexicons[side]
        for w in words:
            surface = "".join(s.text.strip("+") for s in w)
            out.extend(_Seg(t.surface, p, None) for t, p in zip(lex.entries[surface][0].segments, lex.entries[surface][0].segment_properties()))
        return out

    analyzed = [(one_best(r["src"], "src"), one_best(r["tgt"], "tgt"), a) for r, a in zip(train_raw, train_gold)]
    planted_consistency = _consistency(analyzed, ("definiteness", "number", "gender", "pos", "aspect", "person"))

    train_src_types = {w for s, _ in train for w in s.words}
    planted_types = sorted({
        w for s, _ in list(dev) + list(test) for w in s.words
        if w not in train_src_types and w in {x for ps, _ in pivot_src for x in ps.words}
    })
    mono_src = [s for s, _ in pivot_src]
    mono_tgt = [t for _, t in pivot_tgt]
    return ToyData(
        cfg, train, tune, dev, test, pivot_src, pivot_tgt, mono_src, mono_tgt,
        lexicons["src"], lexicons["tgt"], train_gold,
        [g.lemmas[i].pivot for i in g.planted], planted_types, planted_consistency,
    )


def check_toy_data(data: ToyData) -> list[str]:
    """Generator post-conditions; returns a list of violations."""
    problems = []
    train_src = {w for s, _ in data.train for w in s.words}
    piv_src = {w for s, _ in data.pivot_src for w in s.words}
    for t in data.planted_oov_types:
        if t in train_src:
            problems.append(f"planted type {t} occurs in train")
        if t not in piv_src:
            problems.append(f"planted type {t} missing from pivot data")
    for side, corpus_side, lex in (("src", 0, data.src_lexicon), ("tgt", 1, data.tgt_lexicon)):
        for corpus in (data.train, data.tune, data.dev, data.test):
            for pair in corpus:
                for w in pair[corpus_side].words:
                    if w not in lex:
                        problems.append(f"{side} word {w} missing from lexicon")
    return problems
