"""Command-line pipeline: scan -> baseline -> score -> trends.

Stages communicate through on-disk artifacts (counts/*.json, baseline.json,
scores.jsonl, trends.json) so the two-pass normalization is explicit and
cacheable. All emitted JSON uses sorted keys, LF newlines and fixed decimal
rounding; rerunning a stage on unchanged inputs yields byte-identical files.

Exit codes: 0 success, 2 input problems, 3 configuration problems,
4 stale baseline, 5 underdetermined trends.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import catalog as catalog_mod
from . import ingest, trends
from .errors import CatalogError, IacqError, IngestError, ScoringError, TrendError
from .extract import AttributeCounts, extract
from .scoring import (
    NormalizationBaseline,
    RepoScore,
    WeightConfig,
    baseline_from_dict,
    baseline_to_dict,
    build_baseline,
    compute_rates,
    lint_weights,
    score_repo,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_STALE = 4
EXIT_UNDERDETERMINED = 5

DEFAULT_ROUNDING = 6


@dataclass(frozen=True)
class RunConfig:
    """Shared run options; defaults are the bundled catalog, equal weights
    (1.0 via WeightConfig) and 6-decimal artifact rounding."""

    catalog_path: Path | None = None
    weights_path: Path | None = None
    ignore_globs: tuple[str, ...] = ingest.DEFAULT_IGNORE_GLOBS
    time_field: str = "latest_release"
    output_dir: Path = Path(".")
    rounding: int = DEFAULT_ROUNDING

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        ignore = getattr(args, "ignore", None)
        return cls(
            catalog_path=getattr(args, "catalog", None),
            weights_path=getattr(args, "weights", None),
            ignore_globs=tuple(ignore) if ignore else ingest.DEFAULT_IGNORE_GLOBS,
            time_field=getattr(args, "time_field", "latest_release"),
            output_dir=Path(getattr(args, "out", ".")),
            rounding=getattr(args, "rounding", DEFAULT_ROUNDING),
        )


class _CliFailure(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


def _fail(code: int, message: str) -> _CliFailure:
    return _CliFailure(code, message)


# --------------------------------------------------------------------------
# Deterministic serialization
# --------------------------------------------------------------------------


def _round_floats(value, places: int):
    if isinstance(value, float):
        rounded = round(value, places)
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, dict):
        return {k: _round_floats(v, places) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v, places) for v in value]
    return value


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _fail(EXIT_CONFIG, f"cannot write {path}: {exc}") from exc


def _dump_json(doc: dict, rounding: int) -> str:
    return json.dumps(_round_floats(doc, rounding), sort_keys=True, indent=2) + "\n"


def _dump_jsonl_line(doc: dict, rounding: int) -> str:
    return json.dumps(_round_floats(doc, rounding), sort_keys=True, separators=(",", ":"))


def counts_to_dict(counts: AttributeCounts) -> dict:
    return {
        "schema_version": "1",
        "repo_id": counts.repo_id,
        "loc": counts.loc,
        "values": {k: counts.values[k] for k in sorted(counts.values)},
        "warnings": list(counts.warnings),
    }


def counts_from_dict(doc: dict) -> AttributeCounts:
    return AttributeCounts(
        repo_id=doc["repo_id"],
        loc=int(doc["loc"]),
        values={str(k): v for k, v in doc["values"].items()},
        warnings=tuple(doc.get("warnings", ())),
    )


def score_to_dict(score: RepoScore) -> dict:
    return {
        "schema_version": "1",
        "repo_id": score.repo_id,
        "normalized": {k: score.normalized[k] for k in sorted(score.normalized)},
        "category_scores": {
            k: score.category_scores[k] for k in sorted(score.category_scores)
        },
        "total_score": score.total_score,
        "baseline_ref": score.baseline_ref,
        "weights_ref": score.weights_ref,
    }


# --------------------------------------------------------------------------
# Shared loading helpers
# --------------------------------------------------------------------------


def _load_catalog(catalog_path: Path | None):
    path = catalog_path or (
        Path(os.environ["IACQ_CATALOG"]) if os.environ.get("IACQ_CATALOG") else None
    )
    try:
        if path is None:
            defs = catalog_mod.load_default_catalog()
            label = "bundled default"
        else:
            defs = catalog_mod.load_catalog(Path(path).read_bytes())
            label = str(path)
    except OSError as exc:
        raise _fail(EXIT_CONFIG, f"cannot read catalog: {exc}") from exc
    except CatalogError as exc:
        raise _fail(EXIT_CONFIG, f"invalid catalog: {exc}") from exc
    report = catalog_mod.validate_catalog(defs)
    if not report.ok:
        details = "; ".join(report.errors)
        raise _fail(EXIT_CONFIG, f"catalog {label} failed validation: {details}")
    return defs


def _load_counts_dir(counts_dir: Path) -> list[AttributeCounts]:
    if not counts_dir.is_dir():
        raise _fail(EXIT_INPUT, f"counts directory not found: {counts_dir}")
    out = []
    for path in sorted(counts_dir.glob("*.json")):
        try:
            doc = json.loads(path.read_text("utf-8"))
            out.append(counts_from_dict(doc))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, OSError) as exc:
            raise _fail(EXIT_INPUT, f"corrupted counts file {path}: {exc}") from exc
    if not out:
        raise _fail(EXIT_INPUT, f"no counts files in {counts_dir}")
    return out


def _load_baseline(path: Path) -> NormalizationBaseline:
    try:
        return baseline_from_dict(json.loads(path.read_text("utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise _fail(EXIT_INPUT, f"cannot read baseline {path}: {exc}") from exc
    except ScoringError as exc:
        raise _fail(EXIT_INPUT, f"cannot read baseline {path}: {exc}") from exc


def _load_weights(weights_path: Path | None) -> tuple[WeightConfig, str]:
    if weights_path is None:
        return WeightConfig(), "equal-weights"
    try:
        config = WeightConfig.from_yaml(Path(weights_path).read_text("utf-8"))
    except OSError as exc:
        raise _fail(EXIT_CONFIG, f"cannot read weights: {exc}") from exc
    except ScoringError as exc:
        raise _fail(EXIT_CONFIG, f"weight out of range: {exc.message}") from exc
    except (ValueError, TypeError) as exc:
        raise _fail(EXIT_CONFIG, f"malformed weights file: {exc}") from exc
    return config, Path(weights_path).name


# --------------------------------------------------------------------------
# scan
# --------------------------------------------------------------------------


def _scan_one(job: tuple[str, str, tuple[str, ...], list]) -> tuple[str, dict | None, str]:
    """Worker: scan+extract one repo. Returns (repo_id, counts_doc, error)."""
    repo_id, root, ignore_globs, defs = job
    try:
        snapshot = ingest.scan_repo(root, ignore_globs=ignore_globs, repo_id=repo_id)
        counts = extract(snapshot, defs)
        return repo_id, counts_to_dict(counts), ""
    except IngestError as exc:
        return repo_id, None, str(exc)


def cmd_scan(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    defs = _load_catalog(config.catalog_path)
    root = Path(args.root)
    if not root.is_dir():
        raise _fail(EXIT_INPUT, f"not a directory: {root}")

    if args.corpus:
        repo_roots = [p for p in sorted(root.iterdir()) if p.is_dir()]
        if not repo_roots:
            raise _fail(EXIT_INPUT, "no repositories found")
    else:
        repo_roots = [root]

    jobs = [(p.name, str(p), config.ignore_globs, defs) for p in repo_roots]

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_scan_one, jobs, chunksize=8))
    else:
        results = [_scan_one(job) for job in jobs]

    out_dir = config.output_dir / "counts"
    failed: list[str] = []
    warning_count = 0
    for repo_id, doc, error in sorted(results, key=lambda r: r[0]):
        if doc is None:
            failed.append(f"{repo_id}: {error}")
            continue
        warning_count += len(doc["warnings"])
        _write_text(out_dir / f"{repo_id}.json", _dump_json(doc, config.rounding))

    ok = len(results) - len(failed)
    print(f"scanned {ok} repositories into {out_dir} ({warning_count} warnings)")
    for line in failed:
        print(f"error: {line}", file=sys.stderr)
    return EXIT_INPUT if failed else EXIT_OK


# --------------------------------------------------------------------------
# baseline
# --------------------------------------------------------------------------


def cmd_baseline(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    defs = _load_catalog(config.catalog_path)
    corpus = _load_counts_dir(Path(args.counts_dir))
    try:
        rates = [compute_rates(c, defs) for c in corpus]
        baseline = build_baseline(rates)
    except ScoringError as exc:
        raise _fail(EXIT_INPUT, str(exc)) from exc
    # No rounding here: a rounded-down maximum would sit below the exact rate
    # of the very repo that set it and falsely read as a stale baseline.
    _write_text(
        Path(args.out), json.dumps(baseline_to_dict(baseline), sort_keys=True, indent=2) + "\n"
    )
    print(f"baseline over corpus_size={baseline.corpus_size} -> {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# score
# --------------------------------------------------------------------------


def _score_one(
    job: tuple[dict, list, NormalizationBaseline, WeightConfig, str, str]
) -> tuple[str, dict | None, str]:
    doc, defs, baseline, weights, baseline_ref, weights_ref = job
    counts = counts_from_dict(doc)
    try:
        score = score_repo(
            counts, defs, baseline, weights,
            baseline_ref=baseline_ref, weights_ref=weights_ref,
        )
        return counts.repo_id, score_to_dict(score), ""
    except ScoringError as exc:
        return counts.repo_id, None, f"{exc.kind}:{exc.message}"


def cmd_score(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    defs = _load_catalog(config.catalog_path)
    baseline = _load_baseline(Path(args.baseline))
    missing = [d.id for d in defs if d.id not in baseline.maxima]
    if missing:
        raise _fail(
            EXIT_CONFIG, f"baseline does not cover catalog attributes: {', '.join(missing)}"
        )
    weights, weights_ref = _load_weights(config.weights_path)
    for note in lint_weights(defs, weights):
        print(f"warning: {note}", file=sys.stderr)

    corpus = _load_counts_dir(Path(args.counts_dir))
    baseline_ref = Path(args.baseline).name
    jobs = [
        (counts_to_dict(c), defs, baseline, weights, baseline_ref, weights_ref)
        for c in corpus
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_score_one, jobs, chunksize=8))
    else:
        results = [_score_one(job) for job in jobs]

    stale = [rid for rid, doc, err in results if doc is None and err.startswith("baseline_stale")]
    other = [(rid, err) for rid, doc, err in results if doc is None and not err.startswith("baseline_stale")]
    if other:
        rid, err = other[0]
        raise _fail(EXIT_INPUT, f"{rid}: {err}")
    if stale:
        raise _fail(EXIT_STALE, "stale baseline for repositories: " + ", ".join(sorted(stale)))

    lines = [
        _dump_jsonl_line(doc, config.rounding)
        for _, doc, _ in sorted(results, key=lambda r: r[0])
        if doc is not None
    ]
    _write_text(Path(args.out), "\n".join(lines) + "\n")
    print(f"scored {len(lines)} repositories -> {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# trends
# --------------------------------------------------------------------------


def _load_scores(path: Path) -> list[RepoScore]:
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot read scores: {exc}") from exc
    scores = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            scores.append(
                RepoScore(
                    repo_id=doc["repo_id"],
                    normalized=doc.get("normalized", {}),
                    category_scores=doc["category_scores"],
                    total_score=float(doc["total_score"]),
                    baseline_ref=doc.get("baseline_ref", ""),
                    weights_ref=doc.get("weights_ref", ""),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise _fail(EXIT_INPUT, f"{path}:{line_no}: bad score line: {exc}") from exc
    if not scores:
        raise _fail(EXIT_INPUT, f"no score lines in {path}")
    return scores


def _resolve_timestamp(repo_id: str, args: argparse.Namespace, time_field: str):
    if args.meta_dir:
        sidecar = Path(args.meta_dir) / f"{repo_id}.json"
    else:
        sidecar = Path(args.corpus_root) / repo_id / ingest.SIDECAR_NAME
    if not sidecar.is_file():
        return None, f"{repo_id}: no metadata sidecar at {sidecar}"
    try:
        meta = ingest.parse_galaxy_metadata(json.loads(sidecar.read_text("utf-8")))
    except (json.JSONDecodeError, OSError, TypeError) as exc:
        return None, f"{repo_id}: unreadable sidecar: {exc}"
    ts = meta.reference_time(time_field)
    if ts is None:
        return None, f"{repo_id}: no {time_field} timestamp"
    return ts, ""


def cmd_trends(args: argparse.Namespace) -> int:
    config = RunConfig.from_args(args)
    if bool(args.meta_dir) == bool(args.corpus_root):
        raise _fail(EXIT_CONFIG, "exactly one of --meta-dir or --corpus-root is required")
    scores = _load_scores(Path(args.scores))

    scored = []
    for score in sorted(scores, key=lambda s: s.repo_id):
        ts, problem = _resolve_timestamp(score.repo_id, args, config.time_field)
        if ts is None:
            print(f"warning: {problem}", file=sys.stderr)
            continue
        scored.append((score, ts))
    if not scored:
        raise _fail(EXIT_INPUT, "no repositories with resolvable timestamps")

    points = trends.bucketize(scored)
    fits: dict[str, dict] = {}
    underdetermined = False
    for series in trends.ALL_SERIES:
        try:
            fit = trends.ols_fit(points, series)
        except TrendError:
            underdetermined = True
            continue
        fits[series] = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "n_points": fit.n_points,
        }

    doc = {
        "schema_version": "1",
        "buckets": [
            {
                "label": p.bucket_label,
                "index": p.bucket_index,
                "repo_count": p.repo_count,
                "means": {k: p.mean_scores[k] for k in sorted(p.mean_scores)},
            }
            for p in points
        ],
        "fits": {k: fits[k] for k in sorted(fits)},
    }
    _write_text(Path(args.out), _dump_json(doc, config.rounding))

    if args.csv:
        _write_trend_csv(Path(args.csv), points, config.rounding)

    print(f"{len(points)} buckets, {len(fits)} fitted series -> {args.out}")
    if underdetermined and not fits:
        print("error: trends underdetermined (need >= 2 populated buckets)", file=sys.stderr)
        return EXIT_UNDERDETERMINED
    return EXIT_OK


def _write_trend_csv(path: Path, points: list[trends.TrendPoint], rounding: int) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bucket_label", "bucket_index", "repo_count", *trends.ALL_SERIES])
            for p in points:
                row = [p.bucket_label, p.bucket_index, p.repo_count]
                for series in trends.ALL_SERIES:
                    value = p.mean_scores.get(series)
                    row.append("" if value is None else _round_floats(value, rounding))
                writer.writerow(row)
    except OSError as exc:
        raise _fail(EXIT_CONFIG, f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# catalog validate
# --------------------------------------------------------------------------


def cmd_catalog_validate(args: argparse.Namespace) -> int:
    path = args.catalog or (
        Path(os.environ["IACQ_CATALOG"]) if os.environ.get("IACQ_CATALOG") else None
    )
    try:
        if path is None:
            defs = catalog_mod.load_default_catalog()
        else:
            defs = catalog_mod.load_catalog(Path(path).read_bytes())
    except OSError as exc:
        raise _fail(EXIT_CONFIG, f"cannot read catalog: {exc}") from exc
    except CatalogError as exc:
        raise _fail(EXIT_CONFIG, f"invalid catalog: {exc}") from exc
    report = catalog_mod.validate_catalog(defs)
    for warning in report.warnings:
        print(f"warning: {warning}")
    for error in report.errors:
        print(f"error: {error}")
    print(f"{len(defs)} attributes, {'OK' if report.ok else 'INVALID'}")
    return EXIT_OK if report.ok else EXIT_CONFIG


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iacq",
        description="Score the code quality of Ansible repositories and track it over time.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--catalog", type=Path, default=None,
                       help="attribute catalog YAML (default: $IACQ_CATALOG or bundled)")
        p.add_argument("--rounding", type=int, default=DEFAULT_ROUNDING,
                       help="decimal places in emitted artifacts (default 6)")

    p_scan = sub.add_parser("scan", help="scan repositories into counts files")
    p_scan.add_argument("root", help="repository directory (or corpus directory with --corpus)")
    p_scan.add_argument("--corpus", action="store_true",
                        help="treat each immediate subdirectory of ROOT as one repository")
    p_scan.add_argument("--out", default="iacq-out", help="output directory (default iacq-out)")
    p_scan.add_argument("--ignore", action="append", default=None,
                        help="glob of paths to skip (repeatable; default .git .github molecule)")
    p_scan.add_argument("--jobs", type=int, default=1, help="parallel scan workers")
    add_common(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_base = sub.add_parser("baseline", help="build the normalization baseline from counts")
    p_base.add_argument("counts_dir", help="directory of counts/<repo_id>.json files")
    p_base.add_argument("--out", default="baseline.json")
    add_common(p_base)
    p_base.set_defaults(func=cmd_baseline)

    p_score = sub.add_parser("score", help="score counts against a baseline")
    p_score.add_argument("counts_dir")
    p_score.add_argument("--baseline", required=True, type=Path)
    p_score.add_argument("--weights", type=Path, default=None,
                         help="weights YAML {default_weight, weights:{id: w}}")
    p_score.add_argument("--out", default="scores.jsonl")
    p_score.add_argument("--jobs", type=int, default=1, help="parallel scoring workers")
    add_common(p_score)
    p_score.set_defaults(func=cmd_score)

    p_trends = sub.add_parser("trends", help="six-month buckets and per-series OLS fits")
    p_trends.add_argument("scores", help="scores.jsonl from the score stage")
    p_trends.add_argument("--corpus-root", default=None,
                          help="corpus directory holding <repo_id>/galaxy_meta.json sidecars")
    p_trends.add_argument("--meta-dir", default=None,
                          help="directory holding <repo_id>.json sidecar files")
    p_trends.add_argument("--time-field", choices=("latest_release", "observed_at"),
                          default="latest_release")
    p_trends.add_argument("--out", default="trends.json")
    p_trends.add_argument("--csv", default=None, help="also emit per-bucket CSV")
    add_common(p_trends)
    p_trends.set_defaults(func=cmd_trends)

    p_cat = sub.add_parser("catalog", help="catalog tools")
    cat_sub = p_cat.add_subparsers(dest="catalog_command", required=True)
    p_val = cat_sub.add_parser("validate", help="validate a catalog file")
    p_val.add_argument("--catalog", type=Path, default=None)
    p_val.set_defaults(func=cmd_catalog_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as failure:
        print(f"error: {failure.message}", file=sys.stderr)
        return failure.code
    except IacqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
