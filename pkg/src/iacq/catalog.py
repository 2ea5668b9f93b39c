"""Attribute catalog: the data-driven description of everything we measure.

The catalog is a YAML file (see ``data/default_catalog.yaml``) so attribute
lists, keyword sets and regexes can evolve without code changes. Each entry
maps one measurement to a primary category plus optional extra category
memberships; every membership contributes the same normalized value to its
category score.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from importlib import resources

import yaml

from .errors import CatalogError

CATEGORIES: tuple[str, ...] = (
    "metadata",
    "code_structure",
    "code_sophistication",
    "code_maintainability",
    "functionality_purpose",
    "code_security",
    "error_handling",
    "automation",
    "code_integration",
)

POLARITIES = ("positive", "negative")
SCALINGS = ("per_100_loc", "raw")
RULE_KINDS = (
    "key_occurrence",
    "module_usage",
    "regex_match",
    "file_fact",
    "metadata_field",
    "derived",
)

# Negative polarity ships on exactly these four; anything else negative is
# a user extension and only draws a validation warning.
DEFAULT_NEGATIVE_IDS = frozenset(
    {"suspicious_comments", "passwd_usage", "deprecated_keywords", "deprecated_modules"}
)

# Built-in derived measures the extractor implements. validate_catalog
# rejects derived rules naming anything else; the extractor's registry is
# cross-checked against this set by the test suite.
KNOWN_DERIVED_MEASURES = frozenset(
    {
        "avg_update_time",
        "raw_line_count",
        "code_line_count",
        "blank_line_count",
        "comment_line_count",
        "source_line_count",
        "blank_space_between_words",
        "task_count",
        "play_count",
        "avg_play_size",
        "avg_task_size",
        "length_of_tasks",
        "unique_names",
        "names_with_variables",
        "entity_name_keys",
        "entropy",
        "total_keys",
        "variable_definitions",
        "decision_operators",
        "math_operations",
        "jinja_filters",
        "error_handling_blocks",
        "external_modules",
        "distinct_modules",
    }
)

FILE_FACT_NAMES = frozenset(
    {
        "readme_count",
        "readme_word_count",
        "license_present",
        "directory_count",
        "file_count",
        "template_file_count",
        "yaml_file_count",
    }
)


@dataclass(frozen=True)
class RegexSpec:
    pattern: str
    stream: str = "full_source"  # or "comments"
    ignore_case: bool = False

    def compile(self) -> re.Pattern[str]:
        return re.compile(self.pattern, re.IGNORECASE if self.ignore_case else 0)


@dataclass(frozen=True)
class ExtractionRule:
    """How one attribute is measured. `payload` shape depends on `kind`:

    key_occurrence/module_usage -> tuple of keywords / module names,
    regex_match -> RegexSpec, file_fact/metadata_field/derived -> name string.
    """

    kind: str
    payload: tuple[str, ...] | RegexSpec | str


@dataclass(frozen=True)
class AttributeDefinition:
    id: str
    display_name: str
    category: str
    rule: ExtractionRule
    polarity: str = "positive"
    scaling: str = "per_100_loc"
    memberships: tuple[str, ...] = ()

    @property
    def categories(self) -> tuple[str, ...]:
        """Primary category followed by extra memberships."""
        return (self.category, *self.memberships)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _parse_rule(attr_id: str, raw: object) -> ExtractionRule:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise CatalogError("bad_rule", f"{attr_id}: rule must be a map with a 'kind'")
    kind = raw["kind"]
    payload = raw.get("payload")
    if kind not in RULE_KINDS:
        raise CatalogError("bad_rule", f"{attr_id}: unknown rule kind {kind!r}")

    if kind in ("key_occurrence", "module_usage"):
        if not isinstance(payload, list) or not payload:
            raise CatalogError("bad_rule", f"{attr_id}: {kind} needs a non-empty list payload")
        if not all(isinstance(x, str) and x for x in payload):
            raise CatalogError("bad_rule", f"{attr_id}: {kind} payload entries must be strings")
        return ExtractionRule(kind, tuple(payload))

    if kind == "regex_match":
        if isinstance(payload, str):
            payload = {"pattern": payload}
        if not isinstance(payload, dict) or not payload.get("pattern"):
            raise CatalogError("bad_rule", f"{attr_id}: regex_match needs a pattern")
        stream = payload.get("stream", "full_source")
        if stream not in ("full_source", "comments"):
            raise CatalogError("bad_rule", f"{attr_id}: unknown regex stream {stream!r}")
        spec = RegexSpec(payload["pattern"], stream, bool(payload.get("ignore_case", False)))
        try:
            spec.compile()
        except re.error as exc:
            raise CatalogError("bad_rule", f"{attr_id}: invalid regex: {exc}") from exc
        return ExtractionRule(kind, spec)

    # file_fact / metadata_field / derived carry a bare name.
    if not isinstance(payload, str) or not payload:
        raise CatalogError("bad_rule", f"{attr_id}: {kind} needs a name payload")
    if kind == "file_fact" and payload not in FILE_FACT_NAMES:
        raise CatalogError("bad_rule", f"{attr_id}: unknown file fact {payload!r}")
    return ExtractionRule(kind, payload)


def load_catalog(source: bytes | str) -> list[AttributeDefinition]:
    """Parse catalog YAML into validated attribute definitions.

    Raises CatalogError(duplicate | bad_category | bad_rule) on structural
    problems; semantic lint (empty categories, unknown derived measures)
    is validate_catalog's job.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise CatalogError("bad_rule", f"catalog is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("attributes"), list) or not doc["attributes"]:
        raise CatalogError("bad_rule", "catalog defines no attributes")

    defs: list[AttributeDefinition] = []
    seen: set[str] = set()
    for entry in doc["attributes"]:
        if not isinstance(entry, dict) or not entry.get("id"):
            raise CatalogError("bad_rule", f"attribute entry without id: {entry!r}")
        attr_id = str(entry["id"])
        if attr_id in seen:
            raise CatalogError("duplicate", f"duplicate attribute id {attr_id!r}")
        seen.add(attr_id)

        category = entry.get("category")
        if category not in CATEGORIES:
            raise CatalogError("bad_category", f"{attr_id}: unknown category {category!r}")
        memberships = tuple(entry.get("memberships") or ())
        for m in memberships:
            if m not in CATEGORIES:
                raise CatalogError("bad_category", f"{attr_id}: unknown membership {m!r}")
        if category in memberships or len(set(memberships)) != len(memberships):
            raise CatalogError("bad_category", f"{attr_id}: redundant category membership")

        polarity = entry.get("polarity", "positive")
        if polarity not in POLARITIES:
            raise CatalogError("bad_rule", f"{attr_id}: polarity must be positive or negative")
        scaling = entry.get("scaling", "per_100_loc")
        if scaling not in SCALINGS:
            raise CatalogError("bad_rule", f"{attr_id}: scaling must be per_100_loc or raw")

        defs.append(
            AttributeDefinition(
                id=attr_id,
                display_name=str(entry.get("display_name", attr_id)),
                category=category,
                rule=_parse_rule(attr_id, entry.get("rule")),
                polarity=polarity,
                scaling=scaling,
                memberships=memberships,
            )
        )
    return defs


def serialize_catalog(defs: list[AttributeDefinition]) -> str:
    """Inverse of load_catalog: load(serialize(defs)) == defs."""
    entries = []
    for d in defs:
        rule: dict[str, object]
        if isinstance(d.rule.payload, RegexSpec):
            rule = {
                "kind": d.rule.kind,
                "payload": {
                    "pattern": d.rule.payload.pattern,
                    "stream": d.rule.payload.stream,
                    "ignore_case": d.rule.payload.ignore_case,
                },
            }
        elif isinstance(d.rule.payload, tuple):
            rule = {"kind": d.rule.kind, "payload": list(d.rule.payload)}
        else:
            rule = {"kind": d.rule.kind, "payload": d.rule.payload}
        entry: dict[str, object] = {
            "id": d.id,
            "display_name": d.display_name,
            "category": d.category,
            "polarity": d.polarity,
            "scaling": d.scaling,
            "rule": rule,
        }
        if d.memberships:
            entry["memberships"] = list(d.memberships)
        entries.append(entry)
    return yaml.safe_dump({"attributes": entries}, sort_keys=False, default_flow_style=False)


def validate_catalog(defs: list[AttributeDefinition]) -> ValidationReport:
    """Semantic lint: never raises, reports errors and warnings instead."""
    report = ValidationReport()
    covered: set[str] = set()
    for d in defs:
        covered.update(d.categories)
        if d.polarity == "negative" and d.id not in DEFAULT_NEGATIVE_IDS:
            report.warnings.append(f"negative polarity outside the default set: {d.id}")
        if d.rule.kind == "derived" and d.rule.payload not in KNOWN_DERIVED_MEASURES:
            report.errors.append(f"unknown derived measure: {d.rule.payload!r} (attribute {d.id})")
    for cat in CATEGORIES:
        if cat not in covered:
            report.warnings.append(f"category {cat} empty")
    return report


def category_members(defs: list[AttributeDefinition]) -> dict[str, list[AttributeDefinition]]:
    """Category -> definitions scored in it (primary or via membership)."""
    members: dict[str, list[AttributeDefinition]] = {cat: [] for cat in CATEGORIES}
    for d in defs:
        for cat in d.categories:
            members[cat].append(d)
    return members


def default_catalog_text() -> str:
    return (resources.files("iacq.data") / "default_catalog.yaml").read_text("utf-8")


def load_default_catalog() -> list[AttributeDefinition]:
    return load_catalog(default_catalog_text())


@functools.cache
def ansible_vocab() -> dict[str, frozenset[str]]:
    """Reserved task keywords and builtin module names (shipped as data)."""
    doc = yaml.safe_load((resources.files("iacq.data") / "ansible_vocab.yaml").read_text("utf-8"))
    return {
        "reserved_task_keywords": frozenset(doc["reserved_task_keywords"]),
        "builtin_modules": frozenset(doc["builtin_modules"]),
    }
