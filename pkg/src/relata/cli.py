"""Command-line interface: ``relata <command> [options]``.

Every option can also come from ``--config FILE`` (``key = value`` lines);
command-line flags take precedence. Exit codes: 0 success, 2 input or usage
error, 3 internal numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from relata import __version__
from relata.errors import NumericError, RelataError

log = logging.getLogger("relata")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# keys that control execution or name the output artifact; left out of provenance
NOT_ECHOED = {"config", "out", "workers", "chunk_lines", "verbose", "quiet", "command"}


class UsageError(RelataError):
    pass


def _coerce(value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        for key, value in read_config(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for '{args.command}'")
            cfg[key] = _coerce(value, defaults[key]) if defaults[key] is not None else value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    missing = [k for k in REQUIRED.get(args.command, ()) if not cfg.get(k)]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return cfg


def provenance(cfg: dict) -> dict:
    return {"tool": f"relata {__version__}",
            "config": {k: v for k, v in sorted(cfg.items()) if k not in NOT_ECHOED}}


# ---------------------------------------------------------------- commands

def cmd_extract(cfg):
    from relata.corpus import LemmaDict, TargetPairSet, build_triple_store

    lemmas = LemmaDict.load(cfg["lemmas"]) if cfg["lemmas"] else None
    pairs = TargetPairSet.load(cfg["pairs"], lemmas)
    store = build_triple_store(cfg["corpus"], pairs, lemmas, min_len=cfg["min_len"],
                               max_len=cfg["max_len"], workers=cfg["workers"],
                               chunk_lines=cfg["chunk_lines"])
    store.save_tsv(cfg["out"], provenance(cfg))
    print(f"sentences: {store.n_sentences}")
    print(f"triples: {store.total()}")
    print(f"distinct_triples: {len(store)}")
    print(f"distinct_patterns: {len(store.pattern_counts())}")
    return EXIT_OK


def cmd_train_lra(cfg):
    from relata.corpus import LemmaDict, TargetPairSet, TripleStore
    from relata.lra import train_lra

    lemmas = LemmaDict.load(cfg["lemmas"]) if cfg["lemmas"] else None
    pairs = TargetPairSet.load(cfg["pairs"], lemmas)
    store = TripleStore.load_tsv(cfg["triples"])
    model, features = train_lra(store, pairs, k=cfg["dim"], cap_mult=cfg["cap_mult"],
                                scoring=cfg["scoring"])
    model.meta = provenance(cfg)
    model.save(cfg["out"])
    print(f"pairs: {len(pairs)}")
    print(f"features: {len(features)}")
    print(f"dim: {model.dim}")
    print(f"no_pattern_pairs: {len(model.no_pattern)}")
    for p in features.patterns[:10]:
        print(f"feature: {' '.join(p)}")
    return EXIT_OK


def cmd_train_nlra(cfg):
    from relata.corpus import TripleStore
    from relata.embeddings import load_any
    from relata.nlra import TrainingConfig, train

    table = load_any(cfg["embeddings"])
    store = TripleStore.load_tsv(cfg["triples"])
    config = TrainingConfig(epochs=cfg["epochs"], lr=cfg["lr"], negatives=cfg["negatives"],
                            batch_size=cfg["batch"], seed=cfg["seed"], hidden=cfg["hidden"],
                            max_replicas=cfg["max_replicas"], neg_power=cfg["neg_power"],
                            update_embeddings=cfg["update_embeddings"])

    model = train(store, table, config)
    model.meta.update(provenance(cfg))
    model.save(cfg["out"])
    print(f"final_loss: {model.meta['loss_history'][-1]!r}")
    return EXIT_OK


def _parse_model_spec(spec: str):
    kind, _, path = spec.partition("=")
    kind = kind.strip()
    if kind not in ("vecoff", "lra", "nlra", "oracle"):
        raise UsageError(f"unknown model kind {kind!r} (expected vecoff, lra, nlra or oracle)")
    if kind != "oracle" and not path:
        raise UsageError(f"model {kind!r} needs a path: {kind}=PATH")
    return kind, path


def _load_scorer(kind, path):
    from relata import evaluation as ev

    if kind == "vecoff":
        from relata.embeddings import load_any
        return ev.VecOffScorer(load_any(path))
    if kind == "lra":
        from relata.lra import LraModel
        return ev.LraScorer(LraModel.load(path))
    if kind == "nlra":
        from relata.nlra import NlraModel
        return ev.NlraScorer(NlraModel.load(path))
    return ev.OracleScorer()


def cmd_eval(cfg):
    from relata import evaluation as ev
    from relata.corpus import LemmaDict

    lemmas = LemmaDict.load(cfg["lemmas"]) if cfg["lemmas"] else None
    dataset = ev.load_dataset(cfg["dataset"], lemmas)
    scorers = {}
    for spec in cfg["model"] or []:
        kind, path = _parse_model_spec(spec)
        if kind in scorers:
            raise UsageError(f"model kind {kind!r} given twice")
        scorers[kind] = _load_scorer(kind, path)
    for spec in cfg["combine"] or []:
        names = spec.split("+")
        if len(names) != 2 or any(n not in scorers for n in names):
            raise UsageError(f"--combine {spec!r} must name two loaded models as a+b")
        scorers[spec] = ev.CombinedScorer(scorers[names[0]], scorers[names[1]], name=spec)
    if not scorers:
        raise UsageError("no --model given")
    meta = provenance(cfg)
    texts = []
    for name, scorer in scorers.items():
        report = ev.evaluate(scorer, dataset, meta)
        texts.append(report.to_text())
        print(f"{name}\taccuracy {report.accuracy:.4f}\tcorrelation {report.correlation:.4f}"
              f"\t{report.missing_label}_pairs {report.n_missing}")
        if cfg["out"]:
            Path(f"{cfg['out']}.{name}.tsv").write_text(report.to_tsv(), encoding="utf-8")
    if cfg["out"]:
        Path(f"{cfg['out']}.txt").write_text("\n\n".join(texts) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_pairs(cfg):
    from relata.corpus import LemmaDict, TargetPairSet
    from relata.evaluation import load_dataset

    lemmas = LemmaDict.load(cfg["lemmas"]) if cfg["lemmas"] else None
    dataset = load_dataset(cfg["dataset"], lemmas)
    pairs = TargetPairSet(p for rel in dataset for p in rel.pairs() if p[0] != p[1])
    pairs.save(cfg["out"])
    print(f"pairs: {len(pairs)}")
    return EXIT_OK


def cmd_convert_semeval(cfg):
    from relata.corpus import LemmaDict
    from relata.semeval import convert_semeval

    lemmas = LemmaDict.load(cfg["lemmas"]) if cfg["lemmas"] else None
    rels = convert_semeval(cfg["src"], cfg["out"], lemmas, test_only=not cfg["all_relations"])
    print(f"relations: {len(rels)}")
    return EXIT_OK


def cmd_synth(cfg):
    from relata.embeddings import save_table
    from relata.evaluation import save_dataset
    from relata.synthetic import make_synthetic

    data = make_synthetic(seed=cfg["seed"], dim=cfg["dim"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "corpus.txt").write_text("\n".join(data.sentences) + "\n", encoding="utf-8")
    data.pairs.save(out / "pairs.txt")
    (out / "held_out.txt").write_text("".join(f"{a}:{b}\n" for a, b in sorted(data.held_out)),
                                      encoding="utf-8")
    save_table(data.table, out / "embeddings.bin")
    with open(out / "embeddings.txt", "w", encoding="utf-8") as fh:
        for word, row in zip(data.table.vocab, data.table.matrix):
            fh.write(word + " " + " ".join(repr(float(x)) for x in row) + "\n")
    save_dataset(data.dataset, out / "dataset")
    print(f"wrote {len(data.sentences)} sentences, {len(data.pairs)} pairs to {out}")
    return EXIT_OK


COMMANDS = {
    "extract": (cmd_extract, dict(corpus=None, pairs=None, lemmas=None, out=None,
                                  min_len=1, max_len=3, workers=1, chunk_lines=20000)),
    "train-lra": (cmd_train_lra, dict(triples=None, pairs=None, lemmas=None, out=None,
                                      dim=300, cap_mult=20, scoring="pairs")),
    "train-nlra": (cmd_train_nlra, dict(triples=None, embeddings=None, out=None, epochs=50,
                                        lr=0.01, negatives=10, batch=128, seed=0, hidden=300,
                                        max_replicas=100, neg_power=1.0, update_embeddings=True)),
    "eval": (cmd_eval, dict(dataset=None, lemmas=None, model=None, combine=None, out=None)),
    "pairs": (cmd_pairs, dict(dataset=None, lemmas=None, out=None)),
    "convert-semeval": (cmd_convert_semeval, dict(src=None, out=None, lemmas=None, all_relations=False)),
    "synth": (cmd_synth, dict(out=None, seed=0, dim=20)),
}

REQUIRED = {
    "extract": ("corpus", "pairs", "out"),
    "train-lra": ("triples", "pairs", "out"),
    "train-nlra": ("triples", "embeddings", "out"),
    "eval": ("dataset",),
    "pairs": ("dataset", "out"),
    "convert-semeval": ("src", "out"),
    "synth": ("out",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relata", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"relata {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("-v", "--verbose", action="store_true", default=None)
        p.add_argument("-q", "--quiet", action="store_true", default=None)
        return p

    p = command("extract", "mine (pair, pattern) triples from a corpus")
    p.add_argument("corpus", nargs="*", default=None, help="corpus files, one sentence per line")
    p.add_argument("--pairs", help="target pairs, one a:b per line")
    p.add_argument("--lemmas", help="surface<TAB>lemma dictionary")
    p.add_argument("--out", help="triple store TSV to write")
    p.add_argument("--min-len", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--workers", type=int, help="worker processes for corpus shards")
    p.add_argument("--chunk-lines", type=int, help="sentences per shard")

    p = command("train-lra", "build the LRA baseline from a triple store")
    p.add_argument("--triples")
    p.add_argument("--pairs")
    p.add_argument("--lemmas")
    p.add_argument("--dim", type=int)
    p.add_argument("--cap-mult", type=int)
    p.add_argument("--scoring", choices=["pairs", "frequency"])
    p.add_argument("--out")

    p = command("train-nlra", "train NLRA on a triple store")
    p.add_argument("--triples")
    p.add_argument("--embeddings", help="text vectors or binary table")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--negatives", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-replicas", type=int)
    p.add_argument("--neg-power", type=float)
    p.add_argument("--freeze-embeddings", dest="update_embeddings", action="store_false", default=None)
    p.add_argument("--out")

    p = command("eval", "score a relational-similarity dataset")
    p.add_argument("--dataset")
    p.add_argument("--lemmas")
    p.add_argument("--model", action="append", help="kind=path with kind in vecoff, lra, nlra; or plain oracle")
    p.add_argument("--combine", action="append", help="a+b: average two models' scores")
    p.add_argument("--out", help="output prefix for PREFIX.txt and PREFIX.<model>.tsv")

    p = command("pairs", "write the word pairs of a dataset as a target pair file")
    p.add_argument("--dataset")
    p.add_argument("--lemmas")
    p.add_argument("--out")

    p = command("convert-semeval", "convert a SemEval-2012 Task 2 distribution")
    p.add_argument("src", nargs="?", default=None)
    p.add_argument("--out")
    p.add_argument("--lemmas")
    p.add_argument("--all-relations", action="store_true", default=None,
                   help="keep the 10 training relations too")

    p = command("synth", "write a synthetic corpus, embeddings and dataset")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "corpus", None) == []:
        args.corpus = None
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        force=True)
    logging.captureWarnings(True)
    func, defaults = COMMANDS[args.command]
    try:
        cfg = resolve(args, defaults)
        if args.command == "extract" and isinstance(cfg["corpus"], str):
            cfg["corpus"] = cfg["corpus"].split()
        log.debug("resolved config: %s", json.dumps(cfg, sort_keys=True, default=str))
        return func(cfg)
    except (NumericError, FloatingPointError) as exc:
        print(f"relata: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RelataError, OSError, ValueError) as exc:
        print(f"relata: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except np.linalg.LinAlgError as exc:
        print(f"relata: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
