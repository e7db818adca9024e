"""Command-line entry point.

Each stage reads and writes plain files so it can be rerun on its own;
``run`` drives the whole stage graph from a JSON config.  Exit codes: 0 on
success, 1 for usage errors, 2 for bad input data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import types
import typing
from dataclasses import fields
from pathlib import Path

from . import DataError, __version__
from .align import (
    TranslationTable,
    align_corpus,
    read_alignments,
    train_ibm1,
    write_alignments,
)
from .constraints import (
    EPSILON,
    annotate_phrase_table,
    build_property_inventory,
    consistency_report,
    estimate_property_distributions,
)
from .corpus import (
    ParallelCorpus,
    load_normalization_table,
    load_parallel,
    load_sentences,
    normalize_text,
    write_parallel,
)
from .decoder import LogLinearWeights, combine_tables, format_nbest, model_features
from .evaluation import bleu, oov_rate
from .lm import NGramLM, train_lm
from .morphology import detokenize, load_lexicon, segment_d3
from .phrases import PhraseTable, train_phrase_table
from .pipeline import (
    KINDS,
    ExperimentReport,
    SystemConfig,
    TrainedSystem,
    build_synthetic_corpus,
    emit_report,
    run_experiment,
    tune_weights,
)
from .pivot import triangulate
from .toydata import ToyConfig, generate_toy_data

log = logging.getLogger("dialmt")

CHOICES = {
    "kind": KINDS,
    "systems": KINDS,
    "pivot_combine": ("sum", "max"),
    "table_combination": ("backoff", "union"),
    "tune_search": ("nbest", "redecode"),
}
LADDER = ["no_translation", "direct", "phrase_pivot", "dir_pp", "dir_pp_morph"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- small helpers -------------------------------------------------------------


def _lines_out(path, lines) -> None:
    text = "".join(f"{line}\n" for line in lines)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _text_out(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _parallel(src, tgt, normalize=False) -> ParallelCorpus:
    return load_parallel(src, tgt, normalize=normalize)


def _tables(paths) -> list[PhraseTable]:
    return [PhraseTable.read(p) for p in paths]


def _lexicon(path):
    return load_lexicon(path) if path else None


def _system(args, weights=None) -> TrainedSystem:
    tables = _tables(args.table)
    if weights is None:
        weights = LogLinearWeights.defaults(model_features(tables))
    return TrainedSystem(
        "direct", tables, NGramLM.read_arpa(args.lm), weights, _lexicon(args.src_lexicon),
        args.distortion_limit, args.stack_size, args.ttable_limit, args.combination,
    )


def _segmented_alignments(path, train: ParallelCorpus, s_lex, t_lex):
    """Alignments of ``train`` after segmentation, checked against those lengths."""
    seg = ParallelCorpus(tuple((segment_d3(s_lex, s), segment_d3(t_lex, t)) for s, t in train))
    return read_alignments(path, seg)


def _optional_int(text: str):
    return None if text.lower() in ("none", "null", "unlimited") else int(text)


# --- config flags ----------------------------------------------------------------


def _field_type(tp):
    """(converter, nargs) for a SystemConfig field annotation."""
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        inner = [a for a in args if a is not type(None)]
        conv, nargs = _field_type(inner[0])
        if conv is int:
            conv = _optional_int
        return conv, nargs
    if origin is list:
        return (args[0] if args else str), "+"
    return tp, None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with SystemConfig fields")
    group = p.add_argument_group("config overrides")
    hints = typing.get_type_hints(SystemConfig)
    for f in fields(SystemConfig):
        if f.name == "seed":
            continue  # global flag
        flag = "--" + f.name.replace("_", "-")
        conv, nargs = _field_type(hints[f.name])
        if conv is bool:
            group.add_argument(flag, dest=f"cfg_{f.name}", action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=f"cfg_{f.name}", type=conv, nargs=nargs, default=None,
                               choices=CHOICES.get(f.name), metavar=None if f.name in CHOICES else f.name.upper())


def _config(args) -> SystemConfig:
    # paths inside the config file are relative to it; flag paths are taken as given
    data = SystemConfig.load(args.config).to_dict() if args.config else {}
    for f in fields(SystemConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            data[f.name] = v
    if args.seed is not None:
        data["seed"] = args.seed
    return SystemConfig.from_dict(data)


# --- subcommands -------------------------------------------------------------


def cmd_normalize(args):
    table = load_normalization_table(args.table) if args.table else None
    raw = Path(args.input).read_text(encoding="utf-8").splitlines()
    _lines_out(args.output, (normalize_text(line, table) for line in raw))


def cmd_segment(args):
    lex = load_lexicon(args.lexicon)
    sents = load_sentences(args.input, normalize=args.normalize)
    _lines_out(args.output, (segment_d3(lex, s) for s in sents))


def cmd_detok(args):
    sents = load_sentences(args.input)
    _lines_out(args.output, (detokenize(s, strict=not args.lenient) for s in sents))


def cmd_align(args):
    corpus = _parallel(args.src, args.tgt)
    fwd, rev, al = align_corpus(corpus, args.iterations)
    write_alignments(args.output, al)
    if args.ttable_prefix:
        fwd.write(f"{args.ttable_prefix}.fwd")
        rev.write(f"{args.ttable_prefix}.rev")


def cmd_extract(args):
    corpus = _parallel(args.src, args.tgt)
    al = read_alignments(args.align, corpus)
    if args.ttable_prefix:
        fwd = TranslationTable.read(f"{args.ttable_prefix}.fwd")
        rev = TranslationTable.read(f"{args.ttable_prefix}.rev")
    else:
        fwd = train_ibm1(corpus, args.iterations)
        rev = train_ibm1(corpus.swapped(), args.iterations)
    train_phrase_table(corpus, al, fwd, rev, args.max_len).write(args.output)


def cmd_lm_train(args):
    text = [s for p in args.input for s in load_sentences(p)]
    train_lm(text, args.order).write_arpa(args.output)


def cmd_pivot(args):
    wanted = None
    if args.filter:
        grams = set()
        for s in load_sentences(args.filter):
            w = s.words
            grams.update(w[i:j] for i in range(len(w)) for j in range(i + 1, min(len(w), i + args.max_len) + 1))
        wanted = grams.__contains__
    table = triangulate(PhraseTable.read(args.sp), PhraseTable.read(args.pt), args.combine, wanted)
    table.write(args.output)


def cmd_morph_annotate(args):
    s_lex, t_lex = load_lexicon(args.src_lexicon), load_lexicon(args.tgt_lexicon)
    train = _parallel(args.src, args.tgt)
    al = _segmented_alignments(args.align, train, s_lex, t_lex)
    dist = estimate_property_distributions(train, al, (s_lex, t_lex), args.epsilon)
    src_corpora = [train.sources] + [load_sentences(p) for p in args.extra_src]
    tgt_corpora = [train.targets] + [load_sentences(p) for p in args.extra_tgt]
    inventory = (build_property_inventory(src_corpora, s_lex), build_property_inventory(tgt_corpora, t_lex))
    annotate_phrase_table(PhraseTable.read(args.table), inventory, dist).write(args.output)
    if args.distribution:
        Path(args.distribution).write_text(dist.to_tsv(), encoding="utf-8")


def cmd_consistency(args):
    lex = (load_lexicon(args.src_lexicon), load_lexicon(args.tgt_lexicon))
    train = _parallel(args.src, args.tgt)
    al = _segmented_alignments(args.align, train, *lex)
    _text_out(args.output, consistency_report(train, al, lex, args.features))


def cmd_combine(args):
    combine_tables(_tables(args.tables), args.combination).write(args.output)


def cmd_tune(args):
    system = _system(args)
    tune = load_parallel(args.src, args.ref)
    start = LogLinearWeights.read(args.weights) if args.weights else None
    w = tune_weights(system, tune, args.restarts, args.iterations, args.seed or 0, start,
                     nbest=args.nbest, search=args.search)
    w.write(args.output)


def cmd_decode(args):
    weights = LogLinearWeights.read(args.weights) if args.weights else None
    system = _system(args, weights)
    sents = load_sentences(args.input)
    dec = system.decoder()
    out, nbest_lines = [], []
    for k, s in enumerate(sents):
        seg = system.segment(s)
        if args.nbest_out:
            best, nb = dec.decode_with_nbest(seg, args.nbest)
            nbest_lines.append(format_nbest(k, nb))
        else:
            best = dec.decode_best(seg)
        hyp = best.sentence()
        out.append(hyp if args.no_detok else detokenize(hyp, strict=False))
    _lines_out(args.output, out)
    if args.nbest_out:
        _lines_out(args.nbest_out, [b for b in nbest_lines if b])


def cmd_bleu(args):
    report = bleu(load_sentences(args.hyp), load_sentences(args.ref))
    p = " ".join(f"{100 * x:.2f}" for x in report.ngram_precisions)
    print(f"BLEU = {report.score:.2f} ({p}; BP={report.brevity_penalty:.4f})")


def cmd_oov(args):
    lex = _lexicon(args.src_lexicon)
    sents = load_sentences(args.input)
    if lex is not None:
        sents = [segment_d3(lex, s) for s in sents]
    vocab: set[str] = set()
    for t in _tables(args.table):
        vocab |= t.source_vocabulary()
    print(f"{oov_rate(sents, vocab):.2f}")


def cmd_synthesize(args):
    cfg = _config(args)
    corpus = build_synthetic_corpus(cfg, translator=args.translator)
    write_parallel(args.out_src, args.out_tgt, corpus)


def cmd_toygen(args):
    overrides = {k: getattr(args, k) for k in ("vocab_size", "n_train", "n_tune", "n_dev", "n_test", "n_pivot_src", "n_pivot_tgt")
                 if getattr(args, k) is not None}
    if args.seed is not None:
        overrides["seed"] = args.seed
    data = generate_toy_data(ToyConfig(), **overrides)
    out = Path(args.output)
    data.write(out)
    config = {
        "systems": LADDER,
        "train": ["train.src", "train.tgt"],
        "tune": ["tune.src", "tune.tgt"],
        "dev": ["dev.src", "dev.tgt"],
        "test": ["test.src", "test.tgt"],
        "mono_src": "mono.src",
        "mono_tgt": "mono.tgt",
        "pivot_src": ["pivot_src.src", "pivot_src.piv"],
        "pivot_tgt": ["pivot_tgt.piv", "pivot_tgt.tgt"],
        "src_lexicon": "lexicon.src.tsv",
        "tgt_lexicon": "lexicon.tgt.tsv",
        "seed": data.config.seed,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(out / "config.json")


def cmd_run(args):
    cfg = _config(args)
    report, _ = run_experiment(cfg)
    text = emit_report(report, args.report)
    if args.results:
        Path(args.results).write_text(report.to_json(), encoding="utf-8")
    if args.report is None:
        sys.stdout.write(text)


def cmd_report(args):
    try:
        report = ExperimentReport.from_json(Path(args.results).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{args.results}: not a results file ({exc})") from None
    _text_out(args.output, emit_report(report))


# --- parser --------------------------------------------------------------------


def _decoder_flags(p):
    p.add_argument("--table", action="append", required=True, help="phrase table (repeat for back-off order)")
    p.add_argument("--lm", required=True, help="ARPA language model")
    p.add_argument("--src-lexicon", help="segment input with this analyzer lexicon first")
    p.add_argument("--distortion-limit", type=_optional_int, default=6)
    p.add_argument("--stack-size", type=_optional_int, default=100)
    p.add_argument("--ttable-limit", type=_optional_int, default=20)
    p.add_argument("--combination", choices=("backoff", "union"), default="backoff")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dialmt", description="Phrase-based translation between closely related dialects.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="seed for every randomized stage")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("normalize", help="Alif/Ya normalization and whitespace cleanup")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--table", help="override table, one 'char<TAB>replacement' per line")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("segment", help="D3 clitic segmentation")
    p.add_argument("input")
    p.add_argument("--lexicon", required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--normalize", action="store_true")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("detok", help="rejoin clitic-marked tokens")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--lenient", action="store_true", help="strip dangling markers instead of failing")
    p.set_defaults(func=cmd_detok)

    p = sub.add_parser("align", help="IBM Model 1 both ways plus grow-diag-final")
    p.add_argument("src")
    p.add_argument("tgt")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--ttable-prefix", help="also write PREFIX.fwd and PREFIX.rev lexical tables")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("extract", help="phrase extraction and scoring")
    p.add_argument("src")
    p.add_argument("tgt")
    p.add_argument("align")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--ttable-prefix", help="lexical tables written by 'align'; retrained when absent")
    p.add_argument("--iterations", type=int, default=5)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("lm-train", help="interpolated Kneser-Ney LM in ARPA format")
    p.add_argument("input", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--order", type=int, default=5)
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("pivot", help="triangulate source-pivot and pivot-target tables")
    p.add_argument("sp")
    p.add_argument("pt")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--combine", choices=("sum", "max"), default="sum")
    p.add_argument("--filter", help="keep only source phrases occurring in this text")
    p.add_argument("--max-len", type=int, default=8)
    p.set_defaults(func=cmd_pivot)

    p = sub.add_parser("morph-annotate", help="add morphological constraint features to a table")
    p.add_argument("table")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--align", required=True, help="alignments over the segmented training text")
    p.add_argument("--src-lexicon", required=True)
    p.add_argument("--tgt-lexicon", required=True)
    p.add_argument("--extra-src", nargs="*", default=[], help="more source text for the type inventory")
    p.add_argument("--extra-tgt", nargs="*", default=[], help="more target text for the type inventory")
    p.add_argument("--epsilon", type=float, default=EPSILON)
    p.add_argument("--distribution", help="also write the estimated distributions as TSV")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_morph_annotate)

    p = sub.add_parser("consistency", help="feature agreement rates over aligned tokens")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--align", required=True)
    p.add_argument("--src-lexicon", required=True)
    p.add_argument("--tgt-lexicon", required=True)
    p.add_argument("--features", nargs="+", default=["definiteness", "number", "gender", "pos"])
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("combine", help="merge phrase tables into one")
    p.add_argument("tables", nargs="+")
    p.add_argument("--combination", choices=("backoff", "union"), default="backoff")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("tune", help="coordinate-ascent weight tuning")
    _decoder_flags(p)
    p.add_argument("--src", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--weights", help="start weights")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--nbest", type=int, default=100)
    p.add_argument("--search", choices=("nbest", "redecode"), default="nbest")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("decode", help="translate a file")
    _decoder_flags(p)
    p.add_argument("input")
    p.add_argument("--weights")
    p.add_argument("-o", "--output")
    p.add_argument("--no-detok", action="store_true", help="keep clitic-marked output tokens")
    p.add_argument("--nbest", type=int, default=100)
    p.add_argument("--nbest-out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bleu", help="corpus BLEU")
    p.add_argument("hyp")
    p.add_argument("ref")
    p.set_defaults(func=cmd_bleu)

    p = sub.add_parser("oov", help="OOV rate of a text against phrase tables")
    p.add_argument("input")
    p.add_argument("--table", action="append", required=True)
    p.add_argument("--src-lexicon")
    p.set_defaults(func=cmd_oov)

    p = sub.add_parser("synthesize", help="fabricate parallel data from monolingual text")
    _add_config_flags(p)
    p.add_argument("--translator", choices=("direct", "dir_pp"), default="direct")
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("toygen", help="write a synthetic dialect-pair dataset and config.json")
    p.add_argument("-o", "--output", required=True)
    for name in ("vocab_size", "n_train", "n_tune", "n_dev", "n_test", "n_pivot_src", "n_pivot_tgt"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int)
    p.set_defaults(func=cmd_toygen)

    p = sub.add_parser("run", help="train, tune and evaluate configured systems")
    _add_config_flags(p)
    p.add_argument("--report", help="write the TSV report here (default: stdout)")
    p.add_argument("--results", help="also save results as JSON for 'report'")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit a TSV report from saved results")
    p.add_argument("results")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except DataError as exc:
        print(f"dialmt: data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"dialmt: cannot read input: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dialmt: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
