"""Command-line front end.

Every command reads the same configuration (bundled defaults, then
``--config FILE``, then ``--set key=value`` and command flags) and writes its
artifacts atomically.  ``pipeline`` runs train, mine and extract (and
optionally evaluate) with the very same step functions the individual
commands use, so its outputs are byte-identical to chaining them.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .classifier import GruModel, aggregate, train_gru, train_naive_bayes
from .config import PipelineConfig, load_config
from .embeddings import load_embeddings
from .errors import ConfigError, CpgRulesError
from .evaluation import load_rule_file, load_synonyms, report
from .files import atomic_write, dumps_jsonl, read_corpus, read_documents
from .qualifiers import (attach_directions, expand_qualifiers, filter_qualifiers, format_qualifier_lexicon,
                         format_term_report, load_qualifier_lexicon, score_terms)
from .rulegen import CategoryConfig, OperatorCues, Resources, SemanticLexicon, extract_rules, load_units
from .textprep import load_stopwords, load_tag_lexicon, preprocess

log = logging.getLogger("cpgrules")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} {path} does not exist")
    return path


# ---------------------------------------------------------------- steps

def run_train(cfg: PipelineConfig, out_dir: Path, runs: int = 1) -> dict:
    """Train the GRU (``runs`` seeds) and the naive Bayes baseline; write model.json and metrics.json."""
    if runs < 1:
        raise ConfigError("--runs must be >= 1")
    corpus = read_corpus(cfg.path("corpus"), load_tag_lexicon(cfg.path("tag_lexicon")))
    table = load_embeddings(cfg.path("embeddings"))
    model, run_metrics = None, []
    for r in range(runs):
        m, metrics = train_gru(corpus, cfg.train_config(cfg.seed + r), table)
        model = model or m
        run_metrics.append(metrics)
        log.info("run %d (seed %d): test accuracy %.4f", r + 1, cfg.seed + r, metrics.accuracy)
    _, nb_metrics = train_naive_bayes(corpus, cfg.train_config())
    log.info("naive Bayes baseline: test accuracy %.4f", nb_metrics.accuracy)
    result = {
        "train": cfg.train_config().to_dict(),
        "gru": run_metrics[0].to_dict(),
        "summary": aggregate(run_metrics),
        "runs": [m.to_dict() for m in run_metrics],
        "naive_bayes": nb_metrics.to_dict(),
    }
    model.save(out_dir / "model.json")
    atomic_write(out_dir / "metrics.json", _dump_json(result))
    return result


def _documents_to_sentences(cfg: PipelineConfig, input_path) -> list:
    tags = load_tag_lexicon(cfg.path("tag_lexicon"))
    stops = load_stopwords(cfg.path("stoplist"))
    return [s for doc in read_documents(_require(input_path, "input"))
            for s in preprocess(doc, stoplist=stops, tag_lexicon=tags)]


def run_classify(cfg: PipelineConfig, model_path, input_path) -> str:
    model = GruModel.load(_require(model_path, "model"))
    table = load_embeddings(cfg.path("embeddings"))
    rows = []
    for s in _documents_to_sentences(cfg, input_path):
        row = {"doc": s.doc_id, "sent": s.sent_index, "text": s.raw}
        if s.tokens:
            label, scores = model.predict(s, table)
            row.update(label=label, scores={c: float(p) for c, p in zip(model.classes, scores)})
        else:
            row.update(label=None, scores=None)
        rows.append(row)
    return dumps_jsonl(rows)


def _expand_and_write(cfg: PipelineConfig, lexicon, out_dir: Path):
    table = load_embeddings(cfg.path("embeddings"))
    entries, matrix, skipped = expand_qualifiers(lexicon, table, cfg.mining.alpha,
                                                 load_stopwords(cfg.path("stoplist")), cfg.mining.top_k)
    lines = ["qualifier\tcandidate\tcosine"]
    for (i, j), s in sorted(matrix.entries.items()):
        lines.append(f"{matrix.rows[i]}\t{matrix.columns[j]}\t{s:.6f}")
    for phrase in skipped:
        lines.append(f"{phrase}\t\tno-vector")
    atomic_write(out_dir / "expansion.tsv", "\n".join(lines) + "\n")
    log.info("expansion admitted %d terms at alpha %.2f", len(entries) - len(lexicon), cfg.mining.alpha)
    return entries


def run_mine(cfg: PipelineConfig, out_dir: Path) -> list:
    """Score bigrams, filter, attach seed directions, optionally expand; write the qualifier lexicon."""
    corpus = read_corpus(cfg.path("corpus"), load_tag_lexicon(cfg.path("tag_lexicon")))
    terms = score_terms(corpus, cfg.mining.min_df)
    kept = filter_qualifiers(terms, cfg.mining.threshold)
    seeds = load_qualifier_lexicon(cfg.path("qualifier_lexicon"))
    lexicon, unassigned = attach_directions(kept, seeds)
    log.info("%d candidate bigrams, %d above %g, %d without known directions",
             len(terms), len(kept), cfg.mining.threshold, len(unassigned))
    atomic_write(out_dir / "mined_terms.tsv", format_term_report(terms, {s.phrase for s in seeds}))
    if cfg.mining.expand:
        lexicon = _expand_and_write(cfg, lexicon, out_dir)
    atomic_write(out_dir / "qualifiers.tsv", format_qualifier_lexicon(lexicon))
    return lexicon


def run_expand(cfg: PipelineConfig, lexicon_path, out_dir: Path) -> list:
    lexicon = load_qualifier_lexicon(_require(lexicon_path, "qualifier lexicon"))
    entries = _expand_and_write(cfg, lexicon, out_dir)
    atomic_write(out_dir / "qualifiers.tsv", format_qualifier_lexicon(entries))
    return entries


def load_resources(cfg: PipelineConfig, qualifiers_path=None) -> Resources:
    qualifiers = load_qualifier_lexicon(_require(qualifiers_path or cfg.path("qualifier_lexicon"),
                                                 "qualifier lexicon"))
    return Resources(tuple(qualifiers), SemanticLexicon.load(cfg.path("semantic_lexicon")),
                     CategoryConfig.load(cfg.path("categories")), OperatorCues.load(cfg.path("operator_cues")),
                     tuple(load_units(cfg.path("units"))), load_stopwords(cfg.path("stoplist")), cfg.mining.window)


def run_extract(cfg: PipelineConfig, input_path, out_dir: Path, qualifiers_path=None, model_path=None):
    """Classify and extract; write rules.jsonl, rules.txt and skips.jsonl."""
    res = load_resources(cfg, qualifiers_path)
    model = GruModel.load(_require(model_path, "model")) if model_path else None
    table = load_embeddings(cfg.path("embeddings")) if model else None
    rules, skips = extract_rules(_documents_to_sentences(cfg, input_path), model, res, table)
    atomic_write(out_dir / "rules.jsonl", dumps_jsonl(r.to_dict() for r in rules))
    atomic_write(out_dir / "rules.txt", "".join(r.render() + "\n" for r in rules))
    atomic_write(out_dir / "skips.jsonl", dumps_jsonl(s.to_dict() for s in skips))
    log.info("%d rules, %d skipped sentences", len(rules), len(skips))
    return rules, skips


def _parse_expert(spec: str) -> tuple[str, Path]:
    name, sep, path = spec.partition("=")
    if not sep:
        path, name = spec, Path(spec).stem
    return name, _require(path, "expert rule file")


def run_evaluate(cfg: PipelineConfig, system_path, experts: Sequence[str], out_dir: Optional[Path] = None,
                 system_name: str = "system"):
    if not experts:
        raise ConfigError("evaluate needs at least one --expert file")
    system = load_rule_file(_require(system_path, "system rule file"))
    expert_sets = [(name, load_rule_file(path)) for name, path in map(_parse_expert, experts)]
    rep = report(system, expert_sets, load_synonyms(cfg.path("synonyms")), system_name)
    if out_dir is not None:
        atomic_write(out_dir / "report.json", rep.to_json())
        atomic_write(out_dir / "report.txt", rep.to_text())
    for name, flag in rep.both_empty.items():
        if flag:
            log.warning("system and %s rule sets are both empty; Jaccard reported as 1.0", name)
    return rep


# ---------------------------------------------------------------- argument parsing

def _global_options(defaults: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = {} if defaults else {"default": argparse.SUPPRESS}
    p.add_argument("--config", metavar="FILE", help="JSON configuration file", **d)
    p.add_argument("--seed", type=int, help="seed for every random choice (overrides the config)", **d)
    p.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                   help="override a config value, e.g. mining.alpha=0.6 (repeatable)", **d)
    p.add_argument("--quiet", action="store_true", help="only log warnings and errors", **d)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpgrules", description="Turn guideline prose into IF-THEN rules.",
                                     parents=[_global_options(True)])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = [_global_options(False)]

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, description=help_text, parents=common)

    p = add("train", "train the GRU classifier and the naive Bayes baseline")
    p.add_argument("--corpus", help="annotated sentence JSONL")
    p.add_argument("--embeddings", help="word2vec text file")
    p.add_argument("--runs", type=int, default=1, help="number of seeds to report mean/std over")
    p.add_argument("--out", required=True, help="output directory")

    p = add("classify", "label each sentence of the input documents")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="text file or JSONL of {id, text}")
    p.add_argument("--embeddings")
    p.add_argument("--out", help="output JSONL file (default: stdout)")

    p = add("mine", "score bigram qualifiers and write a qualifier lexicon")
    p.add_argument("--corpus")
    p.add_argument("--seeds", help="seed qualifier lexicon TSV")
    p.add_argument("--embeddings")
    p.add_argument("--threshold", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--no-expand", action="store_true", help="skip embedding expansion")
    p.add_argument("--out", required=True, help="output directory")

    p = add("expand", "add embedding neighbours to a qualifier lexicon")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True, help="output directory")

    p = add("extract", "extract rules from documents")
    p.add_argument("--input", required=True, help="text file or JSONL of {id, text}")
    p.add_argument("--qualifiers", help="qualifier lexicon TSV (default: bundled seeds)")
    p.add_argument("--model", help="trained model; without one every sentence is treated as C-A")
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True, help="output directory")

    p = add("evaluate", "compare a system rule set with expert rule sets")
    p.add_argument("--system", required=True, help="rules file (.jsonl or plain text)")
    p.add_argument("--system-name", default="system")
    p.add_argument("--expert", action="append", default=[], metavar="[NAME=]FILE")
    p.add_argument("--out", help="output directory for report.json and report.txt")

    p = add("pipeline", "train, mine and extract in one go")
    p.add_argument("--input", required=True, help="text file or JSONL of {id, text}")
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--expert", action="append", default=[], metavar="[NAME=]FILE")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _overrides(args) -> list[str]:
    out = list(getattr(args, "overrides", None) or [])
    flag_map = {"corpus": "paths.corpus", "embeddings": "paths.embeddings", "seeds": "paths.qualifier_lexicon",
                "threshold": "mining.threshold", "alpha": "mining.alpha"}
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            out.append(f"{key}={json.dumps(value) if not isinstance(value, str) else value}")
    if getattr(args, "no_expand", False):
        out.append("mining.expand=false")
    return out


def dispatch(args) -> int:
    cfg = load_config(getattr(args, "config", None), _overrides(args), getattr(args, "seed", None))
    cmd = args.command
    if cmd == "train":
        run_train(cfg, Path(args.out), args.runs)
    elif cmd == "classify":
        text = run_classify(cfg, args.model, args.input)
        if args.out:
            atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
    elif cmd == "mine":
        run_mine(cfg, Path(args.out))
    elif cmd == "expand":
        run_expand(cfg, args.lexicon, Path(args.out))
    elif cmd == "extract":
        run_extract(cfg, args.input, Path(args.out), args.qualifiers, args.model)
    elif cmd == "evaluate":
        rep = run_evaluate(cfg, args.system, args.expert, Path(args.out) if args.out else None, args.system_name)
        sys.stdout.write(rep.to_text())
    elif cmd == "pipeline":
        out = Path(args.out)
        run_train(cfg, out / "train")
        run_mine(cfg, out / "mine")
        run_extract(cfg, args.input, out / "extract", out / "mine" / "qualifiers.tsv", out / "train" / "model.json")
        if args.expert:
            rep = run_evaluate(cfg, out / "extract" / "rules.jsonl", args.expert, out / "evaluate")
            sys.stdout.write(rep.to_text())
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return dispatch(args)
    except ConfigError as exc:
        print(f"cpgrules: error: {exc}", file=sys.stderr)
        return 2
    except CpgRulesError as exc:
        print(f"cpgrules: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"cpgrules: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
