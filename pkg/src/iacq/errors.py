"""Exception hierarchy. Every error carries a short machine-readable kind."""

from __future__ import annotations


class IacqError(Exception):
    """Base class: `kind` is a stable identifier, `message` is for humans."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        self.message = message or kind
        super().__init__(self.message)

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}" if self.message != self.kind else self.kind


class CatalogError(IacqError):
    """Kinds: duplicate, bad_category, bad_rule."""


class IngestError(IacqError):
    """Kinds: io, registry."""


class ScoringError(IacqError):
    """Kinds: inconsistent_counts, empty_corpus, baseline_stale,
    incomplete_categories, weight_out_of_range."""


class TrendError(IacqError):
    """Kinds: empty, underdetermined."""
