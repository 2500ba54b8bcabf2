"""Command-line entry point: ``snnvpr {synth,train,query,eval,sad}``.

Exit status is 0 on success, 1 for invalid input or configuration and 2
for I/O failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import evaluation, pipeline
from .assignment import SCHEMES
from .checkpoint import Checkpoint
from .config import RunConfig, load_config, write_config
from .data import SynthSpec, generate_synthetic, load_manifest, merge_manifests
from .errors import ConfigError, ValidationError

log = logging.getLogger("snnvpr")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes count as invalid input
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(None), help="master seed")
    parser.add_argument("--threads", type=int, default=default(1), help="worker threads for frozen presentations")
    parser.add_argument("-v", "--verbose", action="count", default=default(0))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snnvpr", description="Spiking network place recognition.", allow_abbrev=False)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        p = sub.add_parser(name, help=help, allow_abbrev=False)
        _global_flags(p, suppress=True)
        return p

    p = add("synth", "generate a synthetic benchmark")
    p.add_argument("--spec", type=Path, help="JSON file with SynthSpec fields")
    p.add_argument("--out", type=Path, required=True)

    p = add("train", "train on reference traverses and write a checkpoint")
    p.add_argument("--config", type=Path)
    p.add_argument("--ref", type=Path, nargs="+", required=True, help="reference manifests")
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.epilog = "Any parameter can be overridden with --<section>.<key> VALUE, e.g. --run.epochs 5."

    p = add("query", "present query images to a trained network")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--out", type=Path, required=True)

    p = add("eval", "PR metrics for a predictions file")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True, help="query manifest with true labels")
    p.add_argument("--distance", type=Path, help="distance CSV (default: next to --pred)")
    p.add_argument("--sequence", type=int, default=1, help="sequence length for distance aggregation")
    p.add_argument("--out", type=Path, required=True)

    p = add("sad", "sum-of-absolute-differences baseline")
    p.add_argument("--ref", type=Path, nargs="+", required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--config", type=Path, help="for image and patch sizes")
    p.add_argument("--out", type=Path, required=True)
    return parser


def parse_overrides(extra: list[str]) -> dict[str, str]:
    """``--a.b 1 --c.d=2`` to ``{"a.b": "1", "c.d": "2"}``."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(tok, "unrecognized argument")
        name = tok[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(name, "missing value")
            value = extra[i + 1]
            i += 2
        out[name] = value
    return out


def _references(paths):
    return merge_manifests([load_manifest(p, "reference") for p in paths])


def cmd_synth(args, extra):
    spec = SynthSpec.from_json(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    written = generate_synthetic(spec).write(args.out)
    for name, path in written.items():
        print(f"{name}: {path}")


def cmd_train(args, extra):
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(parse_overrides(extra))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    ref = _references(args.ref)
    ckpt = pipeline.train(ref, cfg, threads=args.threads)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save(args.out)
    write_config(cfg, args.out.with_suffix(".ini"))
    n_assigned = int((ckpt.assignment.labels >= 0).sum())
    print(f"wrote {args.out} ({n_assigned}/{cfg.run.n_neurons} neurons assigned, "
          f"{ckpt.presentations} presentations)")


def cmd_query(args, extra):
    ckpt = Checkpoint.load(args.ckpt)
    if args.seed is not None:
        ckpt.config = replace(ckpt.config, encoding=replace(ckpt.config.encoding, seed=args.seed))
    q = load_manifest(args.queries, "query")
    res = pipeline.query(ckpt, q.images, args.scheme, threads=args.threads)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_predictions(out / "predictions.csv", res.predicted, res.confidence,
                               [e.path for e in q.entries])
    evaluation.write_matrix_csv(res.scores, out / "scores.csv")
    evaluation.write_matrix_csv(res.counts, out / "counts.csv")
    pipeline.write_distance(out, res.distance)
    silent = int((res.counts.sum(axis=1) == 0).sum())
    if silent:
        log.warning("%d queries produced no spikes; their predictions default to label 0", silent)
    print(f"scored {len(q)} queries with {res.scheme}; results in {out}")


def cmd_eval(args, extra):
    predicted, confidence = pipeline.read_predictions(args.pred)
    truth = load_manifest(args.truth, "query", load_images=False).labels
    dist_path = args.distance or args.pred.parent / "distance.csv"
    D = evaluation.read_matrix_csv(dist_path) if dist_path.exists() else None
    if args.sequence != 1:
        if D is None:
            raise ValidationError(f"--sequence needs a distance matrix, none at {dist_path}")
        D = evaluation.sequence_aggregate(D, args.sequence)
        predicted, confidence = evaluation.predictions_from_distance(D)
    curve = pipeline.evaluate(predicted, confidence, truth, args.out, distance=D)
    print(json.dumps(curve.summary(), sort_keys=True))


def cmd_sad(args, extra):
    cfg = load_config(args.config) if args.config else RunConfig()
    ref = _references(args.ref)
    q = load_manifest(args.queries, "query")
    D = pipeline.sad_baseline(ref, q, cfg)
    predicted, confidence = evaluation.predictions_from_distance(D)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_predictions(out / "predictions.csv", predicted, confidence, [e.path for e in q.entries])
    curve = pipeline.evaluate(predicted, confidence, q.labels, out, distance=D)
    print(json.dumps(curve.summary(), sort_keys=True))


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "query": cmd_query, "eval": cmd_eval, "sad": cmd_sad}


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra and args.command != "train":
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        COMMANDS[args.command](args, extra)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FloatingPointError as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
