"""Command-line front end.

Every subcommand also accepts ``--config FILE`` holding ``key = value``
lines named after its flags; flags given on the command line win.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import features as feat
from .evaluation import ConfusionMatrix, confusion, macro_accuracy, report
from .featurefile import read_features, write_dense, write_sparse
from .grouping import ClassGrouping, apply_grouping, apply_to_labels, build_grouping
from .mlp import (MLPModel, TrainConfig, best_hidden, init_model, predict, sweep_hidden,
                  train)
from .raster import EmptyImage, load_dataset, make_fold_pairs
from .svm import SVMMulti, ovo_predict, ovo_train
from .synthgen import PerturbParams, TEMPLATES, gen_dataset, write_dataset

log = logging.getLogger("quadocr")

DEFAULT_HIDDEN = list(range(40, 141, 10))


class UsageError(Exception):
    pass


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return value


def _threshold(text: str) -> str:
    if text != "otsu" and not (text.isdigit() and 0 <= int(text) <= 255):
        raise argparse.ArgumentTypeError("expected 'otsu' or an integer 0..255")
    return text


def _binarize_args(threshold: str) -> tuple[str, int]:
    return ("otsu", 128) if threshold == "otsu" else ("fixed", int(threshold))


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    if args.classes < 2 or args.classes > len(TEMPLATES):
        raise UsageError(f"--classes must lie in 2..{len(TEMPLATES)}")
    if args.per_class < 1:
        raise UsageError("--per-class must be >= 1")
    params = PerturbParams(rotation=(-args.rotation, args.rotation),
                           thickness=(args.min_thickness, args.max_thickness),
                           jitter=args.jitter, noise=args.noise)
    d = gen_dataset(args.classes, args.per_class, params, args.seed, args.canvas)
    manifest = write_dataset(d, args.out)
    log.info("wrote %d images and %s", len(d), manifest)
    return 0


def _extract_dataset(manifest: str, cfg: feat.FeatureConfig, threshold: str):
    method, t = _binarize_args(threshold)
    d = load_dataset(manifest, method, t)
    rows, failed = [], []
    for s in d.samples:
        try:
            rows.append(feat.extract_feature_vector(s.image, cfg))
        except EmptyImage:
            failed.append(s.source_id)
    if failed:
        raise RuntimeError("empty images: " + ", ".join(failed))
    X = np.vstack(rows) if rows else np.zeros((0, cfg.n_features))
    return d, X


def cmd_extract(args) -> int:
    cfg = feat.FeatureConfig(args.shadow_depth, args.run_depth)
    d, X = _extract_dataset(args.manifest, cfg, args.threshold)
    if args.format == "sparse":
        write_sparse(args.out, X, d.labels)
    else:
        meta = {"shadow_depth": cfg.shadow_depth, "run_depth": cfg.run_depth,
                "n_features": cfg.n_features, "threshold": args.threshold}
        write_dense(args.out, X, d.labels, meta)
    log.info("extracted %d x %d features to %s", X.shape[0], X.shape[1], args.out)
    return 0


def _load_labeled(path: str, grouping: str | None):
    X, y = read_features(path)
    if grouping:
        y = apply_to_labels(ClassGrouping.load(grouping), y)
    return X, y


def _mlp_config(args) -> TrainConfig:
    if args.lr == 0:
        log.warning("learning rate 0: weights will not change")
    log.info("learning_rate=%s momentum=%s iterations=%d seed=%d",
             args.lr, args.momentum, args.iters, args.seed)
    return TrainConfig(args.lr, args.momentum, args.iters, args.seed, args.init_range)


def cmd_train_mlp(args) -> int:
    X, y = _load_labeled(args.features, args.grouping)
    n_classes = args.classes or int(y.max()) + 1
    cfg = _mlp_config(args)
    model = init_model(X.shape[1], args.hidden, n_classes, args.seed, args.init_range)
    model, hist = train(model, X, y, cfg)
    model.save(args.model)
    acc = macro_accuracy(confusion(predict(model, X), y, n_classes))
    print(f"training macro accuracy: {acc:.4f}")
    log.info("final epoch SSE %.6g; model written to %s", hist.sse[-1], args.model)
    return 0


def cmd_train_svm(args) -> int:
    X, y = _load_labeled(args.features, args.grouping)
    gamma = args.gamma if args.gamma is not None else 1.0 / X.shape[1]
    log.info("c=%s gamma=%s", args.c, gamma)
    model = ovo_train(X, y, args.c, gamma, args.tol)
    model.save(args.model)
    n_classes = int(max(model.classes.max(), y.max())) + 1
    acc = macro_accuracy(confusion(ovo_predict(model, X), y, n_classes))
    print(f"training macro accuracy: {acc:.4f}")
    return 0


def load_model(path: str):
    with open(path) as fh:
        head = fh.read(1)
    return MLPModel.load(path) if head == "{" else SVMMulti.load(path)


def model_predict(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, MLPModel):
        return np.asarray(predict(model, X))
    return np.asarray(ovo_predict(model, X))


def _model_classes(model) -> int:
    return model.m if isinstance(model, MLPModel) else int(model.classes.max()) + 1


def cmd_eval(args) -> int:
    model = load_model(args.model)
    X, y = _load_labeled(args.features, args.grouping)
    n = max(_model_classes(model), int(y.max()) + 1 if y.size else 0)
    cm = confusion(model_predict(model, X), y, n)
    rep = report(cm)
    print(f"macro accuracy: {rep.macro_accuracy:.4f}")
    print(f"overall accuracy: {rep.overall_accuracy:.4f}")
    if args.report:
        rep.save(args.report)
    if args.confusion:
        cm.to_csv(args.confusion)
    return 0


def cmd_group(args) -> int:
    if not 0 < args.tau <= 1:
        raise UsageError("--tau must lie in (0, 1]")
    cm = ConfusionMatrix.from_csv(args.confusion)
    g = build_grouping(cm, args.tau)
    g.save(args.out)
    print(f"{g.original_count} classes merged into {g.merged_count}")
    for members in g.groups():
        if len(members) > 1:
            print("group: " + " ".join(map(str, members)))
    return 0


def cmd_crossval(args) -> int:
    cfg = feat.FeatureConfig(args.shadow_depth, args.run_depth)
    d, X = _extract_dataset(args.manifest, cfg, args.threshold)
    if args.grouping:
        d = apply_grouping(ClassGrouping.load(args.grouping), d)
    row_of = {id(s): i for i, s in enumerate(d.samples)}
    seeds = [args.seed + k for k in range(args.pairs)]
    splits = make_fold_pairs(d, args.pairs, args.train_fraction, seeds)
    n = d.class_count
    mlp_cfg = _mlp_config(args) if args.classifier == "mlp" else None
    results = []
    for k, (tr, te) in enumerate(splits, start=1):
        itr = [row_of[id(s)] for s in tr.samples]
        ite = [row_of[id(s)] for s in te.samples]
        if args.classifier == "mlp":
            table = sweep_hidden(X[itr], tr.labels, X[ite], te.labels, n,
                                 mlp_cfg, args.hidden)
            best, acc = best_hidden(table)
            results.append({"pair": k, "seed": seeds[k - 1], "table": table,
                            "best_hidden": best, "accuracy": acc})
        else:
            gamma = args.gamma if args.gamma is not None else 1.0 / X.shape[1]
            model = ovo_train(X[itr], tr.labels, args.c, gamma, args.tol)
            acc = macro_accuracy(confusion(ovo_predict(model, X[ite]), te.labels, n))
            results.append({"pair": k, "seed": seeds[k - 1], "accuracy": acc})
        log.info("pair %d done", k)

    if args.classifier == "mlp":
        print("hidden " + " ".join(f"set#{r['pair']:<6d}" for r in results))
        for h in args.hidden:
            print(f"{h:<6d} " + " ".join(f"{r['table'][h]:<10.4f}" for r in results))
    for r in results:
        extra = f" (hidden {r['best_hidden']})" if "best_hidden" in r else ""
        print(f"set#{r['pair']}: {r['accuracy']:.4f}{extra}")
    mean = float(np.mean([r["accuracy"] for r in results]))
    print(f"mean: {mean:.4f}")
    if args.report:
        doc = {"classifier": args.classifier, "pairs": results, "mean": mean}
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_feature_flags(p):
    p.add_argument("--shadow-depth", type=int, default=1,
                   help="quad-tree depth for shadow features (default: 1)")
    p.add_argument("--run-depth", type=int, default=2,
                   help="quad-tree depth for longest-run features (default: 2)")
    p.add_argument("--threshold", type=_threshold, default="otsu",
                   help="'otsu' or a fixed gray level; darker pixels are ink (default: otsu)")


def _add_mlp_flags(p):
    p.add_argument("--lr", type=float, default=0.8, help="learning rate (default: 0.8)")
    p.add_argument("--momentum", type=float, default=0.7, help="momentum term (default: 0.7)")
    p.add_argument("--iters", type=int, default=10000,
                   help="training epochs (default: 10000)")
    p.add_argument("--init-range", type=float, default=0.5,
                   help="initial weights drawn from U(-r, r) (default: 0.5)")


def _add_svm_flags(p):
    p.add_argument("--c", type=float, default=8.0, help="penalty C (default: 8)")
    p.add_argument("--gamma", type=float, default=None,
                   help="RBF gamma (default: 1/number of features, 1/204 for default features)")
    p.add_argument("--tol", type=float, default=1e-3, help="KKT tolerance (default: 1e-3)")


REQUIRED = {
    "gen": ["out"],
    "extract": ["manifest", "out"],
    "train-mlp": ["features", "model"],
    "train-svm": ["features", "model"],
    "eval": ["model", "features"],
    "group": ["confusion", "tau"],
    "crossval": ["manifest"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadocr", description="Quad-tree shadow/longest-run character recognition")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", help="file of 'key = value' defaults for these flags")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a synthetic glyph dataset")
    p.add_argument("--classes", type=int, default=10, help="number of classes, 2..16 (default: 10)")
    p.add_argument("--per-class", type=int, default=200, help="samples per class (default: 200)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--canvas", type=int, default=32, help="image side in pixels (default: 32)")
    p.add_argument("--rotation", type=float, default=10.0, help="max rotation in degrees (default: 10)")
    p.add_argument("--min-thickness", type=int, default=1, help="min stroke width (default: 1)")
    p.add_argument("--max-thickness", type=int, default=3, help="max stroke width (default: 3)")
    p.add_argument("--jitter", type=float, default=0.04,
                   help="max endpoint displacement, unit-square fraction (default: 0.04)")
    p.add_argument("--noise", type=float, default=0.001,
                   help="salt-and-pepper flip probability (default: 0.001)")

    p = add("extract", cmd_extract, "extract feature vectors for a manifest")
    p.add_argument("--manifest", help="CSV with header path,label")
    p.add_argument("--out", help="output feature file")
    p.add_argument("--format", choices=["dense", "sparse"], default="dense",
                   help="dense CSV or sparse index:value text (default: dense)")
    _add_feature_flags(p)

    p = add("train-mlp", cmd_train_mlp, "train the MLP classifier")
    p.add_argument("--features", help="feature file")
    p.add_argument("--hidden", type=int, default=90, help="hidden neurons (default: 90)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--classes", type=int, default=None,
                   help="output neurons (default: largest label + 1)")
    p.add_argument("--model", help="output model JSON")
    p.add_argument("--grouping", help="grouping JSON applied to labels first")
    _add_mlp_flags(p)

    p = add("train-svm", cmd_train_svm, "train the one-vs-one RBF SVM")
    p.add_argument("--features", help="feature file")
    p.add_argument("--model", help="output model file")
    p.add_argument("--grouping", help="grouping JSON applied to labels first")
    _add_svm_flags(p)

    p = add("eval", cmd_eval, "evaluate a model on a feature file")
    p.add_argument("--model", help="MLP JSON or SVM model file")
    p.add_argument("--features", help="feature file")
    p.add_argument("--report", help="write the evaluation report as JSON")
    p.add_argument("--confusion", help="write the confusion matrix as CSV")
    p.add_argument("--grouping", help="grouping JSON applied to labels first")

    p = add("group", cmd_group, "merge mutually confused classes")
    p.add_argument("--confusion", help="confusion matrix CSV")
    p.add_argument("--tau", type=float, help="mutual-confusion threshold in (0, 1]")
    p.add_argument("--out", default="grouping.json", help="output grouping JSON")

    p = add("crossval", cmd_crossval, "repeated 2/3-1/3 hold-out evaluation")
    p.add_argument("--manifest", help="CSV with header path,label")
    p.add_argument("--pairs", type=int, default=3, help="train/test pairs (default: 3)")
    p.add_argument("--classifier", choices=["mlp", "svm"], default="mlp")
    p.add_argument("--train-fraction", type=_fraction, default=Fraction(2, 3),
                   help="training share per class (default: 2/3)")
    p.add_argument("--seed", type=int, default=0, help="seed of the first pair (default: 0)")
    p.add_argument("--hidden", type=int, nargs="+", default=DEFAULT_HIDDEN,
                   help="hidden sizes to sweep (default: 40 50 ... 140)")
    p.add_argument("--report", help="write per-pair results as JSON")
    p.add_argument("--grouping", help="grouping JSON applied to labels first")
    _add_feature_flags(p)
    _add_mlp_flags(p)
    _add_svm_flags(p)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        if isinstance(action, argparse._SubParsersAction):  # noqa: SLF001
            return action.choices[name]
    raise KeyError(name)


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, cfg: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", "func")}
    defaults = {}
    for key, raw in cfg.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        conv = act.type or str
        try:
            if isinstance(act, argparse._StoreTrueAction):  # noqa: SLF001
                value = raw.lower() in ("1", "true", "yes", "on")
            elif act.nargs in ("+", "*"):
                value = [conv(v) for v in raw.replace(",", " ").split()]
            else:
                value = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {key}: {raw!r} ({exc})") from None
        if act.choices is not None and value not in act.choices:
            raise UsageError(f"bad value for {key}: {raw!r}")
        defaults[key] = value
    sub.set_defaults(**defaults)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s",
                        level=logging.DEBUG if args.verbose else logging.INFO, force=True)
    sub = _subparser(parser, args.command)
    try:
        if args.config:
            _apply_config(sub, read_config(args.config))
            args = parser.parse_args(argv)
        missing = [f"--{k.replace('_', '-')}" for k in REQUIRED[args.command]
                   if getattr(args, k) is None]
        if missing:
            raise UsageError("missing required: " + ", ".join(missing))
    except UsageError as exc:
        sub.print_usage(sys.stderr)
        print(f"quadocr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"quadocr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        sub.print_usage(sys.stderr)
        print(f"quadocr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
