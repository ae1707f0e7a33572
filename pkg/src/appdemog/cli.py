"""Command-line interface.

Each command ingests (or generates) a dataset, runs one experiment
protocol, and writes `report.json`, flat CSVs, and a `manifest.json`
capturing the resolved configuration and seed, so any run can be replayed
to byte-identical outputs. Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, IngestManifest, export_dataset, ingest
from .dimred import category_aggregate, frequency_filter, project, truncated_svd
from .errors import AppdemogError, DataFormatError, NumericalError
from .evaluate import (
    DEFAULT_BIN_EDGES,
    accuracy_drop_test,
    app_count_bins,
    benchmark_174,
    confidence_coverage,
    kfold_cv,
    learning_curve,
    roc_auc,
)
from .logreg import TrainConfig, model_to_json, top_coefficients, train
from .sampling import ATTRIBUTES, RULES, balance, binarize, substream
from .synth import SynthConfig, generate

PRESETS = {
    "paper-scale": SynthConfig(),
    "small": SynthConfig(n_users=800, n_apps=1200, missing_rate=0.02),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sanitize(obj):
    """Replace non-finite floats with None so reports are strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _sanitize(float(obj))
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def _write_json(path: Path, doc) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(_sanitize(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def _write_csv(path: Path, header, rows) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in (_sanitize(list(row)))])
    os.replace(tmp, path)


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _add_common(p: argparse.ArgumentParser, attribute: bool = True) -> None:
    p.add_argument("--data", metavar="DIR", help="directory with users.csv/usage.csv/apps.csv")
    p.add_argument("--synth-config", metavar="FILE", help="JSON synthetic-data config")
    p.add_argument(
        "--synth-preset", choices=sorted(PRESETS), help="built-in synthetic-data config"
    )
    p.add_argument("--min-users-per-app", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", metavar="DIR", required=True, help="output directory")
    p.add_argument("--lam", type=float, default=1.0, help="L2 strength (default 1.0)")
    p.add_argument("--max-iters", type=int, default=500)
    if attribute:
        p.add_argument(
            "--attribute", choices=ATTRIBUTES, help="demographic attribute to predict"
        )


def build_parser() -> _Parser:
    parser = _Parser(prog="appdemog", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic dataset and export its CSVs")
    p.add_argument("--preset", choices=sorted(PRESETS), default="paper-scale")
    p.add_argument("--synth-config", metavar="FILE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR", required=True)

    p = sub.add_parser("cv", help="k-fold cross-validated accuracy and AUC")
    _add_common(p)
    p.add_argument("--k", type=int, default=10, help="number of folds (default 10)")
    p.add_argument("--all-attributes", action="store_true", help="loop over all six attributes")

    p = sub.add_parser("top-apps", help="strongest positive/negative predictor tables")
    _add_common(p)
    p.add_argument("--k", type=int, default=10, help="rows per table (default 10)")

    p = sub.add_parser("roc", help="pooled out-of-fold ROC curve and coverage accuracy")
    _add_common(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--coverage", type=float, default=0.5)

    p = sub.add_parser("learning-curve", help="accuracy vs training-set size")
    _add_common(p)
    p.add_argument("--sizes", default="100,400,1600", help="comma-separated train sizes")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--protocol", default="holdout", help="'holdout' or 'cv<k>'")

    p = sub.add_parser("benchmark174", help="repeated 2-fold CV on 174-user subsamples")
    _add_common(p)
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("--size", type=int, default=174)

    p = sub.add_parser("bins", help="accuracy by app-count bin, pooled over attributes")
    _add_common(p, attribute=False)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--edges", default=",".join(map(str, DEFAULT_BIN_EDGES)))

    p = sub.add_parser("dimred", help="cross-validated accuracy on reduced features")
    _add_common(p)
    p.add_argument("--method", choices=("freq", "categories", "svd"), required=True)
    p.add_argument("--k", type=int, default=48, help="SVD components (default 48)")
    p.add_argument("--min-share", type=float, default=0.10)
    p.add_argument("--cv-k", type=int, default=10)

    return parser


def _resolve_attribute(args) -> str:
    if getattr(args, "attribute", None):
        return args.attribute
    raise _UsageError("--attribute is required for this command")


def _load_synth_config(args) -> SynthConfig:
    if getattr(args, "synth_config", None):
        with open(args.synth_config, encoding="utf-8") as fh:
            return SynthConfig.from_dict(json.load(fh))
    preset = getattr(args, "synth_preset", None) or getattr(args, "preset", None)
    if preset:
        return PRESETS[preset]
    raise _UsageError("provide --data DIR, --synth-config FILE, or --synth-preset NAME")


def _load(args):
    """Returns (dataset, truth-or-None). Synthetic data derives from the seed."""
    if getattr(args, "data", None):
        if getattr(args, "synth_config", None) or getattr(args, "synth_preset", None):
            raise _UsageError("--data conflicts with synthetic-data options")
        manifest = IngestManifest.for_directory(args.data, args.min_users_per_app)
        return ingest(manifest, verbose=False), None
    cfg = _load_synth_config(args)
    ds = generate(cfg, substream(args.seed, 101))
    dataset = Dataset(
        matrix=ds.matrix,
        records=ds.records,
        app_names=ds.app_names,
        categories=ds.categories,
        user_ids=ds.user_ids,
        app_ids=list(ds.app_names),
    )
    return dataset, ds.truth


def _balanced_pool(dataset, attribute: str, seed):
    subset = binarize(dataset.records, RULES[attribute])
    return balance(subset, substream(seed, 103, ATTRIBUTES.index(attribute)))


def _train_config(args) -> TrainConfig:
    return TrainConfig(lam=args.lam, max_iterations=args.max_iters)


def _manifest(args, extra=None) -> dict:
    doc = {
        "command": args.command,
        "version": __version__,
        "options": {
            k: v for k, v in sorted(vars(args).items()) if k != "command" and v is not None
        },
    }
    if extra:
        doc.update(extra)
    return doc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_synth(args) -> int:
    cfg = _load_synth_config(args)
    ds = generate(cfg, substream(args.seed, 101))
    out = _out_dir(args)
    export_dataset(ds, out)
    _write_json(out / "ground_truth.json", ds.truth.to_dict())
    counts = ds.matrix.row_counts()
    report = {
        "users": ds.matrix.n_rows,
        "apps": ds.matrix.n_cols,
        "mean_apps_per_user": float(counts.mean()),
        "config": cfg.to_dict(),
    }
    _write_json(out / "report.json", report)
    _write_json(out / "manifest.json", _manifest(args, {"synth_config": cfg.to_dict()}))
    print(f"synthetic dataset: {report['users']} users, {report['apps']} apps")
    return 0


def _run_cv_for(dataset, attribute, args):
    pool = _balanced_pool(dataset, attribute, args.seed)
    report = kfold_cv(
        dataset.matrix,
        pool,
        args.k,
        _train_config(args),
        substream(args.seed, 104, ATTRIBUTES.index(attribute)),
    )
    return pool, report


def _cmd_cv(args) -> int:
    dataset, _ = _load(args)
    attrs = list(ATTRIBUTES) if args.all_attributes else [_resolve_attribute(args)]
    out = _out_dir(args)
    table_rows = []
    report_doc: dict = {"k": args.k, "per_attribute": {}}
    for attribute in attrs:
        pool, rep = _run_cv_for(dataset, attribute, args)
        report_doc["per_attribute"][attribute] = {
            "users": len(pool),
            "fold_accuracies": rep.fold_accuracies,
            "mean_accuracy": rep.mean_accuracy,
            "auc": rep.auc,
        }
        table_rows.append([attribute, len(pool), rep.mean_accuracy, rep.auc])
        _write_csv(
            out / f"scores_{attribute}.csv",
            ["user_id", "row", "label", "score", "fold"],
            [
                [dataset.user_ids[r], r, int(l), s, int(f)]
                for r, l, s, f in zip(rep.rows, rep.labels, rep.scores, rep.fold_of)
            ],
        )
        print(f"cv {attribute}: accuracy={rep.mean_accuracy:.4f} auc={rep.auc:.4f}")
    _write_csv(out / "accuracy_table.csv", ["attribute", "users", "accuracy", "auc"], table_rows)
    _write_csv(
        out / "folds.csv",
        ["attribute", "fold", "accuracy"],
        [
            [a, i, acc]
            for a in report_doc["per_attribute"]
            for i, acc in enumerate(report_doc["per_attribute"][a]["fold_accuracies"])
        ],
    )
    _write_json(out / "report.json", report_doc)
    _write_json(out / "manifest.json", _manifest(args))
    return 0


def _cmd_top_apps(args) -> int:
    dataset, _ = _load(args)
    attribute = _resolve_attribute(args)
    pool = _balanced_pool(dataset, attribute, args.seed)
    X = dataset.matrix.select("rows", pool.row_indices)
    y = pool.labels.astype(np.float64)
    model = train(X, y, _train_config(args))
    positive, negative = top_coefficients(model, X, y, dataset.app_names, args.k)
    out = _out_dir(args)
    rule = RULES[attribute]
    report = {
        "attribute": attribute,
        "positive_class": rule.positive_class,
        "negative_class": rule.negative_class,
        "converged": model.converged,
        "positive": positive.to_dicts(),
        "negative": negative.to_dicts(),
    }
    _write_json(out / "report.json", report)
    rows = []
    for side, table in (("positive", positive), ("negative", negative)):
        for rank, r in enumerate(table.rows, 1):
            rows.append([side, rank, r.app_name, r.coefficient, r.share, r.n])
    _write_csv(
        out / "predictors.csv", ["side", "rank", "app_name", "coefficient", "share", "n"], rows
    )
    _write_text(out / "model.json", model_to_json(model, dataset.app_names))
    _write_json(out / "manifest.json", _manifest(args))
    print(
        f"top-apps {attribute}: strongest positive "
        f"{positive.rows[0].app_name if positive.rows else '-'}"
    )
    return 0


def _cmd_roc(args) -> int:
    dataset, _ = _load(args)
    attribute = _resolve_attribute(args)
    _, rep = _run_cv_for(dataset, attribute, args)
    roc = roc_auc(rep.scores, rep.labels)
    cov_acc = confidence_coverage(rep.scores, rep.labels, args.coverage)
    out = _out_dir(args)
    report = {
        "attribute": attribute,
        "auc": roc.auc,
        "coverage": args.coverage,
        "coverage_accuracy": cov_acc,
        "overall_accuracy": confidence_coverage(rep.scores, rep.labels, 1.0),
    }
    _write_json(out / "report.json", report)
    _write_csv(
        out / "roc_points.csv",
        ["threshold", "fpr", "tpr"],
        [[t, f, tp] for t, f, tp in zip(roc.thresholds, roc.fpr, roc.tpr)],
    )
    _write_json(out / "manifest.json", _manifest(args))
    print(
        f"roc {attribute}: auc={roc.auc:.4f} "
        f"accuracy@{args.coverage:g}={cov_acc:.4f}"
    )
    return 0


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise _UsageError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def _cmd_learning_curve(args) -> int:
    dataset, _ = _load(args)
    attribute = _resolve_attribute(args)
    pool = _balanced_pool(dataset, attribute, args.seed)
    sizes = _parse_int_list(args.sizes, "--sizes")
    curve = learning_curve(
        dataset.matrix,
        pool,
        sizes,
        args.reps,
        args.protocol,
        _train_config(args),
        substream(args.seed, 106, ATTRIBUTES.index(attribute)),
    )
    out = _out_dir(args)
    _write_json(out / "report.json", {"attribute": attribute, **curve.to_dict()})
    _write_csv(
        out / "curve.csv",
        ["train_size", "mean_accuracy", "std_accuracy", "reps"],
        [[int(x), m, s, c] for x, m, s, c in zip(curve.xs, curve.means, curve.dispersions, curve.counts)],
    )
    _write_json(out / "manifest.json", _manifest(args))
    for x, m, s in zip(curve.xs, curve.means, curve.dispersions):
        print(f"learning-curve {attribute}: size={int(x)} accuracy={m:.4f} +/- {s:.4f}")
    return 0


def _cmd_benchmark174(args) -> int:
    dataset, _ = _load(args)
    attribute = _resolve_attribute(args)
    pool = _balanced_pool(dataset, attribute, args.seed)
    curve = benchmark_174(
        dataset.matrix,
        pool,
        reps=args.reps,
        seed=substream(args.seed, 107, ATTRIBUTES.index(attribute)),
        cfg=_train_config(args),
        n_users=args.size,
    )
    out = _out_dir(args)
    report = {
        "attribute": attribute,
        "subsample_size": args.size,
        "reps": args.reps,
        "mean_accuracy": curve.means[0],
        "std_accuracy": curve.dispersions[0],
    }
    _write_json(out / "report.json", report)
    _write_csv(
        out / "benchmark.csv",
        ["subsample_size", "mean_accuracy", "std_accuracy", "reps"],
        [[args.size, curve.means[0], curve.dispersions[0], args.reps]],
    )
    _write_json(out / "manifest.json", _manifest(args))
    print(
        f"benchmark174 {attribute}: ({100 * curve.means[0]:.0f} +/- "
        f"{100 * curve.dispersions[0]:.0f})%"
    )
    return 0


def _cmd_bins(args) -> int:
    dataset, _ = _load(args)
    edges = _parse_int_list(args.edges, "--edges")
    app_counts = dataset.matrix.row_counts()
    per_user: list[tuple[int, int]] = []
    for attribute in ATTRIBUTES:
        _, rep = _run_cv_for(dataset, attribute, args)
        correct = rep.correctness()
        for row, c in zip(rep.rows, correct):
            per_user.append((int(app_counts[row]), int(c)))
    curve = app_count_bins(per_user, edges)
    try:
        ttest_doc = accuracy_drop_test(per_user).to_dict()
    except DataFormatError as exc:
        ttest_doc = {"unavailable": str(exc)}
    out = _out_dir(args)
    report = {
        "edges": edges,
        "bins": curve.to_dict(),
        "t_test_mid_vs_high": ttest_doc,
        "pooled_predictions": len(per_user),
    }
    _write_json(out / "report.json", report)
    _write_csv(
        out / "bins.csv",
        ["bin_low", "bin_high", "center", "n", "accuracy", "standard_error"],
        [
            [lo, hi, x, n, m, s]
            for lo, hi, x, n, m, s in zip(
                edges[:-1], edges[1:], curve.xs, curve.counts, curve.means, curve.dispersions
            )
        ],
    )
    _write_json(out / "manifest.json", _manifest(args))
    if "t_statistic" in ttest_doc:
        print(
            f"bins: {len(per_user)} pooled predictions, "
            f"t={ttest_doc['t_statistic']:.3f} one-sided p={ttest_doc['p_value_one_sided']:.4f}"
        )
    else:
        print(f"bins: {len(per_user)} pooled predictions, t-test unavailable")
    return 0


def _cmd_dimred(args) -> int:
    dataset, _ = _load(args)
    attribute = _resolve_attribute(args)
    pool = _balanced_pool(dataset, attribute, args.seed)
    out = _out_dir(args)
    extra: dict = {}
    if args.method == "freq":
        keep = frequency_filter(dataset.matrix, args.min_share)
        if len(keep) == 0:
            raise NumericalError("frequency filter removed every app")
        features = dataset.matrix.select("cols", keep)
        extra = {"min_share": args.min_share, "kept_apps": int(len(keep))}
    elif args.method == "categories":
        features = category_aggregate(dataset.matrix, dataset.categories)
        extra = {"n_categories": dataset.categories.n_categories}
    else:
        factors = truncated_svd(dataset.matrix, args.k, substream(args.seed, 105))
        features = project(factors, dataset.matrix)
        extra = {"components": args.k}
        _write_json(out / "factors.json", factors.to_dict())
    rep = kfold_cv(
        features,
        pool,
        args.cv_k,
        _train_config(args),
        substream(args.seed, 104, ATTRIBUTES.index(attribute)),
    )
    report = {
        "attribute": attribute,
        "method": args.method,
        "mean_accuracy": rep.mean_accuracy,
        "auc": rep.auc,
        "fold_accuracies": rep.fold_accuracies,
        **extra,
    }
    _write_json(out / "report.json", report)
    _write_csv(
        out / "folds.csv",
        ["fold", "accuracy"],
        list(enumerate(rep.fold_accuracies)),
    )
    _write_json(out / "manifest.json", _manifest(args))
    print(f"dimred {attribute} [{args.method}]: accuracy={rep.mean_accuracy:.4f}")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "cv": _cmd_cv,
    "top-apps": _cmd_top_apps,
    "roc": _cmd_roc,
    "learning-curve": _cmd_learning_curve,
    "benchmark174": _cmd_benchmark174,
    "bins": _cmd_bins,
    "dimred": _cmd_dimred,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise _UsageError("no command given (see --help)")
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 3
    except AppdemogError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
