"""Six-month trend aggregation and per-series least-squares fits.

Repositories are bucketed by calendar half-year (H1 = Jan-Jun, H2 = Jul-Dec)
of their anchor timestamp. Bucket means are unweighted over repositories;
empty interior buckets are emitted (count 0) to keep the timeline contiguous
but are excluded from regression.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from .catalog import CATEGORIES
from .errors import TrendError
from .scoring import RepoScore

SERIES_TOTAL = "total"
ALL_SERIES: tuple[str, ...] = (SERIES_TOTAL, *CATEGORIES)


@dataclass(frozen=True)
class TrendPoint:
    bucket_index: int
    bucket_label: str
    repo_count: int
    mean_scores: dict[str, float]


@dataclass(frozen=True)
class TrendFit:
    series: str
    slope: float
    intercept: float
    n_points: int
    r_squared: float


def _half_key(ts: datetime) -> tuple[int, int]:
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc)
    return ts.year, 1 if ts.month <= 6 else 2


def _next_half(key: tuple[int, int]) -> tuple[int, int]:
    year, half = key
    return (year, 2) if half == 1 else (year + 1, 1)


def bucketize(scored: list[tuple[RepoScore, datetime]]) -> list[TrendPoint]:
    """Group scored repositories into contiguous half-year buckets."""
    if not scored:
        raise TrendError("empty", "no scored repositories with timestamps")

    groups: dict[tuple[int, int], list[RepoScore]] = {}
    for score, ts in scored:
        groups.setdefault(_half_key(ts), []).append(score)

    first = min(groups)
    last = max(groups)
    points: list[TrendPoint] = []
    key = first
    index = 0
    while True:
        members = groups.get(key, [])
        means: dict[str, float] = {}
        if members:
            means[SERIES_TOTAL] = sum(s.total_score for s in members) / len(members)
            for cat in CATEGORIES:
                means[cat] = sum(s.category_scores[cat] for s in members) / len(members)
        points.append(
            TrendPoint(
                bucket_index=index,
                bucket_label=f"{key[0]}-H{key[1]}",
                repo_count=len(members),
                mean_scores=means,
            )
        )
        if key == last:
            break
        key = _next_half(key)
        index += 1
    return points


def ols_fit(points: list[TrendPoint], series: str) -> TrendFit:
    """Least-squares line of a series' bucket means on the bucket index.

    Empty buckets are skipped; fewer than two usable points (or a single
    distinct index) is underdetermined.
    """
    usable = [
        (p.bucket_index, p.mean_scores[series])
        for p in points
        if p.repo_count > 0 and series in p.mean_scores
    ]
    if len(usable) < 2 or len({x for x, _ in usable}) < 2:
        raise TrendError("underdetermined", f"series {series}: need >= 2 populated buckets")

    n = len(usable)
    mean_x = sum(x for x, _ in usable) / n
    mean_y = sum(y for _, y in usable) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in usable)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in usable)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x

    ss_tot = sum((y - mean_y) ** 2 for _, y in usable)
    ss_res = sum((y - (intercept + slope * x)) ** 2 for x, y in usable)
    if ss_tot == 0.0:
        r_squared = 1.0  # flat data, flat fit: zero residuals
    else:
        r_squared = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return TrendFit(
        series=series, slope=slope, intercept=intercept, n_points=n, r_squared=r_squared
    )
