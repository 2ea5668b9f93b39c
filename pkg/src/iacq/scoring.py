"""Score computation: rates per 100 lines, corpus baseline, normalization,
weighted category scores and the 0-9 total.

Normalization is max-based min-max against a corpus-wide baseline. Positive
attributes score rate/max; negative attributes score 1 - rate/max, so zero
offenses normalize to 1.0 (best). A category score divides the weighted sum
by the member count N, not by the weight sum — with sub-unit weights the
attainable maximum is below 1; `lint_weights` surfaces that.
"""

from __future__ import annotations

import os
import warnings as _warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone

import yaml

from .catalog import CATEGORIES, AttributeDefinition, category_members
from .errors import ScoringError
from .extract import AttributeCounts


@dataclass(frozen=True)
class RateVector:
    repo_id: str
    rates: dict[str, float]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class NormalizationBaseline:
    """Corpus-wide per-attribute rate maxima (the normalization denominators)."""

    maxima: dict[str, float]
    corpus_size: int
    created_at: str


@dataclass(frozen=True)
class WeightConfig:
    """Per-attribute weights in [0, 1]; unlisted ids take default_weight."""

    weights: dict[str, float] = field(default_factory=dict)
    default_weight: float = 1.0

    def __post_init__(self) -> None:
        for attr_id, w in self.weights.items():
            if not isinstance(w, (int, float)) or not 0.0 <= float(w) <= 1.0:
                raise ScoringError(
                    "weight_out_of_range", f"weight for {attr_id} out of range: {w!r}"
                )
        if not 0.0 <= self.default_weight <= 1.0:
            raise ScoringError(
                "weight_out_of_range", f"default_weight out of range: {self.default_weight!r}"
            )

    def weight_for(self, attr_id: str) -> float:
        return float(self.weights.get(attr_id, self.default_weight))

    @classmethod
    def from_yaml(cls, text: str) -> "WeightConfig":
        doc = yaml.safe_load(text) or {}
        if not isinstance(doc, dict):
            raise ScoringError("weight_out_of_range", "weights file must be a mapping")
        raw = doc.get("weights") or {}
        if not isinstance(raw, dict):
            raise ScoringError("weight_out_of_range", "weights: must be a mapping")
        return cls(
            weights={str(k): float(v) for k, v in raw.items()},
            default_weight=float(doc.get("default_weight", 1.0)),
        )


@dataclass(frozen=True)
class RepoScore:
    repo_id: str
    normalized: dict[str, float]
    category_scores: dict[str, float]
    total_score: float
    baseline_ref: str = ""
    weights_ref: str = ""


def compute_rates(counts: AttributeCounts, catalog: list[AttributeDefinition]) -> RateVector:
    """Scale occurrence counts to per-100-LOC rates; raw attributes pass through."""
    rate_warnings = list(counts.warnings)
    if counts.loc == 0:
        offenders = [
            d.id
            for d in catalog
            if d.scaling == "per_100_loc" and counts.values.get(d.id, 0) > 0
        ]
        if offenders:
            raise ScoringError(
                "inconsistent_counts",
                f"{counts.repo_id}: loc is 0 but counted {', '.join(offenders)}",
            )
        rate_warnings.append(f"{counts.repo_id}: loc is 0; per-100-loc rates default to 0")
    rates: dict[str, float] = {}
    for d in catalog:
        value = float(counts.values[d.id])
        if d.scaling == "per_100_loc":
            rates[d.id] = value * 100.0 / counts.loc if counts.loc > 0 else 0.0
        else:
            rates[d.id] = value
    return RateVector(repo_id=counts.repo_id, rates=rates, warnings=tuple(rate_warnings))


def build_baseline(
    corpus_rates: list[RateVector], created_at: str | None = None
) -> NormalizationBaseline:
    """Corpus reduction: per-attribute maximum rate (max-merge, associative)."""
    if not corpus_rates:
        raise ScoringError("empty_corpus", "cannot build a baseline from an empty corpus")
    maxima: dict[str, float] = {}
    for rv in corpus_rates:
        for attr_id, rate in rv.rates.items():
            prior = maxima.get(attr_id)
            if prior is None or rate > prior:
                maxima[attr_id] = rate
    return NormalizationBaseline(
        maxima=maxima,
        corpus_size=len(corpus_rates),
        created_at=created_at if created_at is not None else default_created_at(),
    )


def normalize(rate: float, maximum: float, polarity: str) -> float:
    """Min-max normalize one rate against the corpus maximum.

    Positive: rate/max (0.0 when the whole corpus lacks the attribute).
    Negative: 1 - rate/max, so no offenses anywhere normalizes to 1.0.
    A rate above the maximum means the repo was measured after the baseline
    was built — baseline_stale, never silently clamped.
    """
    if rate > maximum:
        raise ScoringError(
            "baseline_stale", f"rate {rate!r} exceeds baseline maximum {maximum!r}"
        )
    if polarity == "negative":
        return 1.0 if maximum == 0 else 1.0 - rate / maximum
    return 0.0 if maximum == 0 else rate / maximum


def category_score(
    normalized: dict[str, float],
    catalog: list[AttributeDefinition],
    weights: WeightConfig,
    category: str,
) -> float:
    """Weighted sum of member normalized values divided by the member count."""
    members = [d for d in catalog if category in d.categories]
    if not members:
        _warnings.warn(f"category {category} has no attributes; scoring 0.0", stacklevel=2)
        return 0.0
    weighted = sum(normalized[d.id] * weights.weight_for(d.id) for d in members)
    return weighted / len(members)


def total_score(category_scores: dict[str, float]) -> float:
    missing = [c for c in CATEGORIES if c not in category_scores]
    if missing:
        raise ScoringError("incomplete_categories", f"missing categories: {', '.join(missing)}")
    return sum(category_scores[c] for c in CATEGORIES)


def score_repo(
    counts: AttributeCounts,
    catalog: list[AttributeDefinition],
    baseline: NormalizationBaseline,
    weights: WeightConfig | None = None,
    *,
    baseline_ref: str = "",
    weights_ref: str = "",
) -> RepoScore:
    """Compose rates -> normalization -> category scores -> total."""
    weights = weights if weights is not None else WeightConfig()
    rv = compute_rates(counts, catalog)
    normalized: dict[str, float] = {}
    for d in catalog:
        maximum = baseline.maxima.get(d.id)
        if maximum is None:
            raise ScoringError("baseline_stale", f"baseline does not cover attribute {d.id}")
        try:
            normalized[d.id] = normalize(rv.rates[d.id], maximum, d.polarity)
        except ScoringError as exc:
            raise ScoringError(exc.kind, f"{counts.repo_id}: {d.id}: {exc.message}") from None
    scores = {cat: category_score(normalized, catalog, weights, cat) for cat in CATEGORIES}
    return RepoScore(
        repo_id=counts.repo_id,
        normalized=normalized,
        category_scores=scores,
        total_score=total_score(scores),
        baseline_ref=baseline_ref,
        weights_ref=weights_ref,
    )


def lint_weights(catalog: list[AttributeDefinition], weights: WeightConfig) -> list[str]:
    """Warn where the weight sum is below the member count (max score < 1)."""
    notes = []
    for cat, members in category_members(catalog).items():
        if not members:
            continue
        weight_sum = sum(weights.weight_for(d.id) for d in members)
        n = len(members)
        if weight_sum < n - 1e-12:
            notes.append(
                f"category {cat}: weight sum {weight_sum:g} < {n} members; "
                f"attainable maximum score {weight_sum / n:.4f}"
            )
    return notes


def default_created_at() -> str:
    """Deterministic creation timestamp (honors SOURCE_DATE_EPOCH)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        ts = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
        return ts.isoformat().replace("+00:00", "Z")
    return "1970-01-01T00:00:00Z"


def baseline_to_dict(baseline: NormalizationBaseline) -> dict:
    return {
        "schema_version": "1",
        "corpus_size": baseline.corpus_size,
        "created_at": baseline.created_at,
        # Full precision: rounding maxima could push exact corpus rates
        # above the stored max and falsely trip baseline_stale.
        "maxima": {k: baseline.maxima[k] for k in sorted(baseline.maxima)},
    }


def baseline_from_dict(doc: dict) -> NormalizationBaseline:
    try:
        return NormalizationBaseline(
            maxima={str(k): float(v) for k, v in doc["maxima"].items()},
            corpus_size=int(doc["corpus_size"]),
            created_at=str(doc.get("created_at", "")),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ScoringError("empty_corpus", f"malformed baseline document: {exc}") from exc
