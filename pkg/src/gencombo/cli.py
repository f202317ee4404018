"""Command-line front end: zoo -> metrics / gaps -> search -> report.

Data goes to the files named on the command line (and tables to stdout for
``report``); diagnostics always go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import functools
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from gencombo.combination import (
    NUM_COMBINATIONS,
    SearchResult,
    contribution_report,
    enumerate_inclusions,
    search_best,
)
from gencombo.metrics import METRIC_NAMES, MetricError, compute_all
from gencombo.zoo import (
    ConfigError,
    SnapshotError,
    atomic_write,
    compute_gaps,
    generate_zoo,
    load_config,
    load_datasets,
    load_snapshot,
    read_manifest,
)

METRICS_HEADER = ["model_id", *METRIC_NAMES]
GAPS_HEADER = ["model_id", "train_accuracy", "validation_accuracy", "gap"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _err(msg: str):
    print(msg, file=sys.stderr)


def _exits(fn):
    """Turn a raised CliError into a diagnostic on stderr and its exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CliError as exc:
            _err(f"error: {exc}")
            return exc.code

    return wrapper


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    try:
        atomic_write(Path(path), buf.getvalue().encode())
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_FAILURE) from exc


def _read_csv(path, header) -> dict[str, list[float]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != header:
        raise CliError(f"{path}: expected header {','.join(header)}")
    table = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CliError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        if row[0] in table:
            raise CliError(f"{path}:{lineno}: duplicate model_id {row[0]!r}")
        try:
            table[row[0]] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {exc}") from exc
    return table


def _load_zoo_parts(zoo_dir):
    try:
        manifest = read_manifest(zoo_dir)
        train_set, val_set = load_datasets(zoo_dir, manifest)
    except (SnapshotError, KeyError, OSError, ValueError) as exc:
        raise CliError(f"invalid zoo directory {zoo_dir}: {exc}") from exc
    snaps = []
    for entry in manifest.get("models", []):
        if entry.get("status") != "ok":
            _err(f"{entry.get('model_id', '?')}: skipped, training failed ({entry.get('error', 'unknown')})")
            continue
        try:
            snaps.append(load_snapshot(zoo_dir, entry))
        except SnapshotError as exc:
            _err(f"corrupt snapshot, skipped: {exc}")
    return manifest, train_set, val_set, snaps


# -- zoo --------------------------------------------------------------------------


@_exits
def cmd_zoo(config_path, out_dir, jobs: int = 1, seed: int | None = None) -> int:
    try:
        config = load_config(config_path)
    except OSError as exc:
        raise CliError(f"cannot read config {config_path}: {exc}") from exc
    except ConfigError as exc:
        raise CliError(f"malformed config {config_path}: {exc}") from exc
    if seed is not None:
        config = dataclasses.replace(config, base_seed=seed)

    def summary(entry):
        spec, recipe = entry["spec"], entry["recipe"]
        head = (
            f"{entry['model_id']} widths={spec['hidden_layer_widths']} lr={recipe['learning_rate']} "
            f"epochs={recipe['epochs']} batch={recipe['batch_size']}"
        )
        if entry["status"] == "ok":
            gap = abs(entry["train_accuracy"] - entry["validation_accuracy"])
            print(f"{head} train={entry['train_accuracy']:.4f} val={entry['validation_accuracy']:.4f} gap={gap:.4f}")
        else:
            print(f"{head} FAILED {entry['error']}")

    try:
        snaps = generate_zoo(config, out_dir, jobs=jobs, on_model=summary)
    except OSError as exc:
        raise CliError(f"cannot write zoo to {out_dir}: {exc}", EXIT_FAILURE) from exc
    if len(snaps) < 2:
        _err(f"only {len(snaps)} model(s) trained successfully; the search needs at least 2")
        return EXIT_FAILURE
    return EXIT_OK


# -- metrics / gaps -------------------------------------------------------------


def _metrics_task(args):
    snap, train_set = args
    try:
        return snap.model_id, compute_all(snap, train_set), None
    except MetricError as exc:
        return snap.model_id, None, str(exc)


@_exits
def cmd_metrics(zoo_dir, out_csv, jobs: int = 1) -> int:
    _, train_set, _, snaps = _load_zoo_parts(zoo_dir)
    tasks = [(s, train_set) for s in snaps]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_metrics_task, tasks))
    else:
        results = [_metrics_task(t) for t in tasks]
    rows = []
    for model_id, scores, error in results:
        if error is not None:
            _err(f"{model_id}: metrics failed, skipped ({error})")
            continue
        rows.append([model_id, *(_fmt(v) for v in scores)])
    rows.sort(key=lambda r: r[0])
    _write_csv(out_csv, METRICS_HEADER, rows)
    if len(rows) < 2:
        _err(f"only {len(rows)} model(s) produced metrics; at least 2 are required")
        return EXIT_FAILURE
    return EXIT_OK


@_exits
def cmd_gaps(zoo_dir, out_csv) -> int:
    _, _, _, snaps = _load_zoo_parts(zoo_dir)
    rows = [
        [r.model_id, _fmt(r.train_accuracy), _fmt(r.validation_accuracy), _fmt(r.gap)]
        for r in compute_gaps(snaps)
    ]
    _write_csv(out_csv, GAPS_HEADER, rows)
    if len(rows) < 2:
        _err(f"only {len(rows)} model(s) have gaps; at least 2 are required")
        return EXIT_FAILURE
    return EXIT_OK


# -- search / report -----------------------------------------------------------------


def result_to_json(result: SearchResult, model_ids) -> dict:
    return {
        "metrics": list(METRIC_NAMES),
        "models": list(model_ids),
        "best": list(result.best),
        "best_tau": result.best_tau,
        "all": [{"f": list(f), "tau": tau} for f, tau in result.scored],
        "contributions": contribution_report(result).to_json(),
    }


def result_from_json(doc) -> SearchResult:
    """Rebuild a SearchResult from a result document; raises CliError when malformed."""
    try:
        scored = [(tuple(int(v) for v in e["f"]), float(e["tau"])) for e in doc["all"]]
        best = tuple(int(v) for v in doc["best"])
        best_tau = float(doc["best_tau"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed result: {exc!r}") from exc
    if [f for f, _ in scored] != enumerate_inclusions():
        raise CliError(f"malformed result: 'all' must list the {NUM_COMBINATIONS} inclusion vectors in order")
    if any(not -1.0 <= tau <= 1.0 for _, tau in scored):
        raise CliError("malformed result: tau outside [-1, 1]")
    return SearchResult(scored, best, best_tau)


@_exits
def cmd_search(metrics_csv, gaps_csv, out_json) -> int:
    metrics = _read_csv(metrics_csv, METRICS_HEADER)
    gaps = _read_csv(gaps_csv, GAPS_HEADER)
    if set(metrics) != set(gaps):
        diff = sorted(set(metrics) ^ set(gaps))
        raise CliError(f"model ids differ between {metrics_csv} and {gaps_csv}: {', '.join(diff)}")
    ids = sorted(metrics)
    if len(ids) < 2:
        raise CliError("the search needs at least two models")
    try:
        result = search_best(np.array([metrics[i] for i in ids]), [gaps[i][2] for i in ids])
    except ValueError as exc:
        raise CliError(f"invalid search input: {exc}") from exc
    text = json.dumps(result_to_json(result, ids)) + "\n"
    try:
        atomic_write(Path(out_json), text.encode())
    except OSError as exc:
        raise CliError(f"cannot write {out_json}: {exc}", EXIT_FAILURE) from exc
    return EXIT_OK


def format_report(result: SearchResult, top: int = 10) -> str:
    lines = []
    order = sorted(range(len(result.scored)), key=lambda k: -result.scored[k][1])
    lines.append(f"Top {min(top, len(order))} combinations by Kendall tau")
    lines.append(f"{'rank':>4}  {'tau':>9}  " + " ".join(f"{n[:6]:>6}" for n in METRIC_NAMES))
    for rank, k in enumerate(order[:top], start=1):
        f, tau = result.scored[k]
        lines.append(f"{rank:>4}  {tau:>9.6f}  " + " ".join(f"{v:>6d}" for v in f))
    lines.append("")
    lines.append(f"best = {list(result.best)}  best_tau = {result.best_tau:.6f}")
    lines.append("")
    report = contribution_report(result)
    lines.append("Mean tau per metric and inclusion value")
    lines.append(f"{'metric':<28}{'-1':>11}{'0':>11}{'+1':>11}  best")
    for m, row, b in zip(report.metrics, report.mean_tau, report.best_values):
        lines.append(f"{m:<28}" + "".join(f"{v:>11.6f}" for v in row) + f"  {b:+d}")
    return "\n".join(lines)


@_exits
def cmd_report(result_json) -> int:
    try:
        doc = json.loads(Path(result_json).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read result {result_json}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError("malformed result: expected a JSON object")
    print(format_report(result_from_json(doc)))
    return EXIT_OK


@_exits
def cmd_pipeline(config_path, out_dir, jobs: int = 1, seed: int | None = None) -> int:
    out = Path(out_dir)
    zoo_dir = out / "zoo"
    steps = [
        lambda: cmd_zoo(config_path, zoo_dir, jobs=jobs, seed=seed),
        lambda: cmd_metrics(zoo_dir, out / "metrics.csv", jobs=jobs),
        lambda: cmd_gaps(zoo_dir, out / "gaps.csv"),
        lambda: cmd_search(out / "metrics.csv", out / "gaps.csv", out / "result.json"),
        lambda: cmd_report(out / "result.json"),
    ]
    for step in steps:
        code = step()
        if code != EXIT_OK:
            return code
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (default: CPU count)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config's base_seed")

    parser = argparse.ArgumentParser(prog="gencombo", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zoo", parents=[common], help="generate the dataset and train the model zoo")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("metrics", parents=[common], help="compute the seven metrics for every zoo model")
    p.add_argument("--zoo", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("gaps", parents=[common], help="write train/validation accuracies and gaps")
    p.add_argument("--zoo", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("search", parents=[common], help="score all 2187 metric combinations")
    p.add_argument("--metrics", required=True)
    p.add_argument("--gaps", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("report", parents=[common], help="print the top combinations and per-metric means")
    p.add_argument("--result", required=True)
    p = sub.add_parser("pipeline", parents=[common], help="zoo, metrics, gaps, search and report in one go")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = getattr(args, "jobs", None)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        _err("--jobs must be >= 1")
        return EXIT_USAGE
    seed = getattr(args, "seed", None)
    if args.command == "zoo":
        return cmd_zoo(args.config, args.out, jobs=jobs, seed=seed)
    if args.command == "metrics":
        return cmd_metrics(args.zoo, args.out, jobs=jobs)
    if args.command == "gaps":
        return cmd_gaps(args.zoo, args.out)
    if args.command == "search":
        return cmd_search(args.metrics, args.gaps, args.out)
    if args.command == "report":
        return cmd_report(args.result)
    return cmd_pipeline(args.config, args.out, jobs=jobs, seed=seed)


if __name__ == "__main__":
    sys.exit(main())
