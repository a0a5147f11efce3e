"""Command line pipeline: schema, train, generate, evaluate.

Each subcommand wraps the library modules with file plumbing and a
stable exit-code contract: 0 success, 2 input error, 3 training
failure. A workspace directory (datasets/, models/<id>/,
reports/<id>.json) is shared with the HTTP service; model and report
ids are content-addressed so reruns with identical inputs and seed
land on the same artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from .data import (RaggedRowError, Schema, SchemaError, TargetSpec,
                   apply_overrides, infer_schema, load_csv, stratified_split,
                   validate_against_schema, write_csv)
from .evaluate import build_report
from .gan import (TrainConfig, build_bundle, condition_for, load_bundle,
                  save_bundle, synthesize, train)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRAINING = 3


def _workspace(args):
    ws = args.workspace
    for sub in ("datasets", "models", "reports"):
        os.makedirs(os.path.join(ws, sub), exist_ok=True)
    return ws


def _content_id(*parts):
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, bytes):
            h.update(p)
        else:
            h.update(json.dumps(p, sort_keys=True).encode())
        h.update(b"\x00")
    return h.hexdigest()[:12]


def write_schema_file(path, schema, target):
    doc = schema.to_dict()
    doc["target"] = (None if target is None else
                     {"column": target.column, "problem": target.problem})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def read_schema_file(path):
    with open(path) as fh:
        doc = json.load(fh)
    schema = Schema.from_dict(doc)
    target = None
    if doc.get("target"):
        target = TargetSpec(doc["target"]["column"],
                            doc["target"].get("problem", "multiclass"))
    return schema, target


def _print_schema(schema, target, out=None):
    out = out or sys.stdout
    width = max(len(c.name) for c in schema.columns)
    for c in schema.columns:
        kind = type(c.kind).__name__.lower()
        extra = ""
        if kind == "mixed":
            extra = " values=%s" % (list(c.kind.categorical_values),)
        if getattr(c.kind, "log_transform", False):
            extra += " log"
        flags = "" if c.include else " (excluded)"
        if target is not None and c.name == target.column:
            flags += " (target: %s)" % target.problem
        print("%-*s  %s%s%s" % (width, c.name, kind, extra, flags), file=out)


def cmd_schema(args):
    table = load_csv(args.csv)
    schema = infer_schema(table)
    target = None
    if args.overrides:
        with open(args.overrides) as fh:
            schema, target = apply_overrides(schema, fh.read())
    out = args.out or os.path.splitext(args.csv)[0] + ".schema.json"
    write_schema_file(out, schema, target)
    _print_schema(schema, target)
    print("schema written to %s" % out)
    return EXIT_OK


def _train_config(args):
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed,
                       classifier_on=not args.no_classifier,
                       info_loss_on=not args.no_info_loss,
                       vgm_on=not args.no_vgm)


def cmd_train(args):
    ws = _workspace(args)
    with open(args.csv, "rb") as fh:
        raw = fh.read()
    table = load_csv(args.csv)
    schema, target = read_schema_file(args.schema)
    validate_against_schema(table, schema)
    config = _train_config(args)
    model_id = _content_id(raw, schema.to_dict(),
                           None if target is None else target.column,
                           config.to_dict())
    bundle_dir = os.path.join(ws, "models", model_id)
    os.makedirs(bundle_dir, exist_ok=True)
    lock = os.path.join(bundle_dir, ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.close(fd)
    except FileExistsError:
        print("model %s is already being trained" % model_id,
              file=sys.stderr)
        return EXIT_TRAINING
    try:
        bundle, X = build_bundle(table, schema, target, config)
        every = max(1, config.epochs // 10)
        bundle = train(bundle, X, config)
        for e in range(0, config.epochs, every):
            d = bundle.history["d_loss"][e]
            g = bundle.history["g_adv"][e]
            print("epoch %d/%d  d_loss %.4f  g_adv %.4f"
                  % (e + 1, config.epochs, d, g))
        save_bundle(bundle, bundle_dir)
    except (RuntimeError, FloatingPointError) as exc:
        print("training failed: %s" % exc, file=sys.stderr)
        return EXIT_TRAINING
    finally:
        if os.path.exists(lock):
            os.remove(lock)
    print("model %s written to %s" % (model_id, bundle_dir))
    return EXIT_OK


def _resolve_bundle(args, ws):
    if os.path.isdir(args.model):
        return args.model
    path = os.path.join(ws, "models", args.model)
    if os.path.isdir(path):
        return path
    raise FileNotFoundError("no model bundle at %r or id %r"
                            % (args.model, args.model))


def cmd_generate(args):
    ws = _workspace(args)
    if args.rows <= 0:
        raise ValueError("--rows must be positive")
    bundle = load_bundle(_resolve_bundle(args, ws))
    condition = None
    if args.condition:
        if "=" not in args.condition:
            raise ValueError("--condition expects column=class")
        col, cls = args.condition.split("=", 1)
        condition = condition_for(bundle, col, category=cls)
    table = synthesize(bundle, args.rows, condition=condition,
                       seed=args.seed)
    write_csv(table, args.out)
    print("%d rows written to %s" % (table.n_rows, args.out))
    return EXIT_OK


def _print_report(doc, out=None):
    out = out or sys.stdout
    sim = doc["similarity"]
    rows = [("avg JSD", sim["avg_jsd"]),
            ("avg WD (scaled)", sim["avg_wasserstein_scaled"]),
            ("diff corr", sim["diff_corr"])]
    for name, section in (("DCR", doc["privacy"]["dcr"]),
                          ("NNDR", doc["privacy"]["nndr"])):
        for key in ("real_synthetic", "within_real", "within_synthetic"):
            rows.append(("%s %s" % (name, key.replace("_", " ")),
                         section[key]))
    if doc["utility"]:
        for model, entry in doc["utility"]["models"].items():
            if "difference" in entry:
                for metric, v in entry["difference"].items():
                    rows.append(("%s %s diff" % (model, metric), v))
            else:
                rows.append(("%s" % model, None))
    width = max(len(r[0]) for r in rows)
    for name, value in rows:
        shown = "n/a" if value is None else "%.6f" % value
        print("%-*s  %s" % (width, name, shown), file=out)


def cmd_evaluate(args):
    ws = _workspace(args)
    real = load_csv(args.real)
    synth = load_csv(args.synth)
    schema, target = read_schema_file(args.schema)
    if args.target:
        problem = "multiclass"
        target = TargetSpec(args.target, problem)
    test = None
    if target is not None and target.problem != "none":
        for t in (real, synth):
            if target.column not in t.names:
                raise SchemaError("target column %r missing from input"
                                  % (target.column,))
        real, test = stratified_split(real, target, args.test_fraction,
                                      seed=args.seed)
    doc = build_report(real, synth, schema, target=target, test=test)
    report_id = _content_id(doc)
    out = args.out or os.path.join(ws, "reports", report_id + ".json")
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1)
    _print_report(doc)
    print("report written to %s" % out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="tabsynth",
        description="Tabular data synthesizer: encode, train, sample,"
                    " evaluate.")
    p.add_argument("--workspace", default="workspace",
                   help="artifact directory shared with the service")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("schema", help="infer column kinds from a CSV")
    ps.add_argument("csv")
    ps.add_argument("--overrides", help="JSON override document")
    ps.add_argument("--out", help="schema output path")
    ps.set_defaults(func=cmd_schema)

    pt = sub.add_parser("train", help="fit a generator on a CSV")
    pt.add_argument("csv")
    pt.add_argument("--schema", required=True)
    pt.add_argument("--epochs", type=int, default=150)
    pt.add_argument("--batch-size", type=int, default=500)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--no-classifier", action="store_true",
                    help="drop the auxiliary classifier loss")
    pt.add_argument("--no-info-loss", action="store_true",
                    help="drop the feature-statistics loss")
    pt.add_argument("--no-vgm", action="store_true",
                    help="min-max scaling instead of mode encoding")
    pt.set_defaults(func=cmd_train)

    pg = sub.add_parser("generate", help="sample rows from a model")
    pg.add_argument("model", help="model id or bundle directory")
    pg.add_argument("--rows", type=int, required=True)
    pg.add_argument("--condition", help="column=class to hold fixed")
    pg.add_argument("--seed", type=int, default=None)
    pg.add_argument("--out", default="synthetic.csv")
    pg.set_defaults(func=cmd_generate)

    pe = sub.add_parser("evaluate", help="real vs synthetic report")
    pe.add_argument("real")
    pe.add_argument("synth")
    pe.add_argument("--schema", required=True)
    pe.add_argument("--target", help="utility target column")
    pe.add_argument("--test-fraction", type=float, default=0.2)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", help="report output path")
    pe.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RaggedRowError, SchemaError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
