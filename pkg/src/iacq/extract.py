"""Attribute extraction: apply every catalog rule to a repository snapshot.

`extract` walks the parsed YAML once (via the kernel layer) to count all
keyword keys, entropy tokens and mapping keys in a single pass, then
dispatches the remaining rule kinds. Files that failed to parse contribute
to the lines-of-code denominator only — never to attribute values.
"""

from __future__ import annotations

import fnmatch
import math
import re
from dataclasses import dataclass

from . import kernels
from .catalog import AttributeDefinition, ansible_vocab
from .ingest import RepoSnapshot, YamlDoc

_JINJA_SPAN = re.compile(r"\{\{(.*?)\}\}", re.S)
_MATH_OP = re.compile(r"(?<=\s)(?:\*\*|//|[+\-*/%])(?=\s)")
_BOOL_OP = re.compile(r"\b(?:and|or|not)\b")
_TASK_SECTION_KEYS = ("tasks", "pre_tasks", "post_tasks", "handlers", "block", "rescue", "always")


@dataclass(frozen=True)
class AttributeCounts:
    """Raw measurement vector: one value per catalog id, plus the denominator."""

    repo_id: str
    loc: int
    values: dict[str, float]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PlayTaskShape:
    avg_play_size: float
    avg_task_size: float
    length_of_tasks: int
    task_count: int
    play_count: int
    unique_names: int
    names_with_variables: int
    name_key_count: int


def measure_entropy(docs: list[YamlDoc] | tuple[YamlDoc, ...]) -> float:
    """Shannon entropy (bits) of the token distribution over parsed docs.

    Tokens are mapping keys and scalar values, whitespace-split; an empty
    token population has entropy 0.0.
    """
    good = [d for d in docs if not d.parse_error]
    _, token_counts, _ = kernels.walk_tree([doc for d in good for doc in d.documents], {}, 0)
    return _entropy_bits(token_counts)


def _entropy_bits(counts: dict[str, int]) -> float:
    total = sum(counts.values())
    if total == 0:
        return 0.0
    # fsum keeps the value independent of dict iteration order; the clamp
    # strips float noise on degenerate single-token distributions.
    weighted = math.fsum(c * math.log2(c) for c in counts.values())
    return max(0.0, math.log2(total) - weighted / total)


def measure_play_task_shape(docs: list[YamlDoc] | tuple[YamlDoc, ...]) -> PlayTaskShape:
    """Aggregate play/task sizes and name statistics over parsed docs.

    Sizes are non-blank source lines spanned by each entry. Unique names
    dedupe plays and tasks separately (a play and a task may legitimately
    share a name without being duplicates of each other).
    """
    good = [d for d in docs if not d.parse_error]
    play_sizes = [s for d in good for s in d.play_sizes]
    task_sizes = [s for d in good for s in d.task_sizes]
    play_names = [n for d in good for n in d.play_names]
    task_names = [n for d in good for n in d.task_names]
    all_names = play_names + task_names
    return PlayTaskShape(
        avg_play_size=sum(play_sizes) / len(play_sizes) if play_sizes else 0.0,
        avg_task_size=sum(task_sizes) / len(task_sizes) if task_sizes else 0.0,
        length_of_tasks=sum(task_sizes),
        task_count=len(task_sizes),
        play_count=len(play_sizes),
        unique_names=len(set(play_names)) + len(set(task_names)),
        names_with_variables=sum(1 for n in all_names if "{{" in n and "}}" in n),
        name_key_count=sum(d.name_key_count for d in good),
    )


# --------------------------------------------------------------------------
# Task/module discovery on the parsed data tree
# --------------------------------------------------------------------------


def _iter_nested_tasks(mapping: dict):
    for key, value in mapping.items():
        if key in _TASK_SECTION_KEYS and isinstance(value, list):
            for entry in value:
                yield entry
                if isinstance(entry, dict):
                    yield from _iter_nested_tasks(entry)
        elif isinstance(value, dict):
            yield from _iter_nested_tasks(value)


def iter_tasks(documents):
    """Yield every task entry (playbook task lists, blocks, task files)."""
    for doc in documents:
        if isinstance(doc, list):
            dict_entries = [e for e in doc if isinstance(e, dict)]
            if any("hosts" in e for e in dict_entries):
                for entry in dict_entries:
                    if "hosts" in entry:
                        yield from _iter_nested_tasks(entry)
            else:
                for entry in doc:
                    yield entry
                    if isinstance(entry, dict):
                        yield from _iter_nested_tasks(entry)
        elif isinstance(doc, dict):
            yield from _iter_nested_tasks(doc)


def _last_segment(name: str) -> str:
    return name.rsplit(".", 1)[-1]


def task_module(task, reserved: frozenset[str]) -> tuple[str, str] | None:
    """Return (short_name, full_name) of the module a task invokes.

    The module is the first key outside the reserved directive set; legacy
    action/local_action forms are unwrapped. Returns None for entries with
    no recognizable module (bare strings, directive-only mappings).
    """
    if not isinstance(task, dict):
        return None
    for key in task:
        if isinstance(key, str) and key not in reserved and not key.startswith("with_"):
            return _last_segment(key), key
    for act_key in ("action", "local_action"):
        act = task.get(act_key)
        if isinstance(act, str) and act.split():
            full = act.split()[0]
            return _last_segment(full), full
        if isinstance(act, dict) and isinstance(act.get("module"), str):
            return _last_segment(act["module"]), act["module"]
    return None


def _iter_mappings(documents):
    stack = list(documents)
    while stack:
        node = stack.pop()
        if isinstance(node, dict):
            stack.extend(node.values())
            yield node
        elif isinstance(node, (list, tuple)):
            stack.extend(node)


# --------------------------------------------------------------------------
# Per-repository analysis shared by all derived measures
# --------------------------------------------------------------------------


class _RepoAnalysis:
    def __init__(self, snapshot: RepoSnapshot, key_attrs: list[AttributeDefinition]):
        good = [d for d in snapshot.yaml_docs if not d.parse_error]
        documents = [doc for d in good for doc in d.documents]

        keyword_slots: dict[str, tuple[int, ...]] = {}
        for i, definition in enumerate(key_attrs):
            for kw in definition.rule.payload:  # type: ignore[union-attr]
                keyword_slots[kw] = keyword_slots.get(kw, ()) + (i,)
        slot_counts, token_counts, total_keys = kernels.walk_tree(
            documents, keyword_slots, len(key_attrs)
        )
        self.key_counts = {d.id: slot_counts[i] for i, d in enumerate(key_attrs)}
        self.token_counts = token_counts
        self.total_keys = total_keys

        self.raw_lines = sum(d.raw_line_count for d in good)
        self.blank_lines = sum(d.blank_line_count for d in good)
        self.comment_lines = sum(d.comment_line_count for d in good)
        self.word_gaps = sum(d.word_gap_count for d in good)
        self.full_source = "\n".join(d.text for d in good)
        self.comments = [text for d in good for _, text in d.comments]
        self.shape = measure_play_task_shape(good)

        vocab = ansible_vocab()
        reserved = vocab["reserved_task_keywords"]
        builtins = vocab["builtin_modules"]
        self.modules: list[tuple[str, str]] = []
        for task in iter_tasks(documents):
            mod = task_module(task, reserved)
            if mod is not None:
                self.modules.append(mod)
        self.external_modules = sum(
            1
            for short, full in self.modules
            if not (
                full.startswith(("ansible.builtin.", "ansible.legacy.")) or short in builtins
            )
        )
        self.distinct_modules = len({short for short, _ in self.modules})

        self.mappings = list(_iter_mappings(documents))

    def variable_definitions(self) -> int:
        count = 0
        for mapping in self.mappings:
            for key, value in mapping.items():
                if key == "register":
                    count += 1
                elif key in ("vars", "set_fact") and isinstance(value, dict):
                    count += len(value)
        return count

    def decision_operators(self) -> int:
        count = 0
        for mapping in self.mappings:
            when = mapping.get("when")
            exprs = when if isinstance(when, list) else [when]
            for expr in exprs:
                if isinstance(expr, str):
                    count += len(_BOOL_OP.findall(expr))
        return count

    def error_handling_blocks(self) -> int:
        return sum(
            1
            for m in self.mappings
            if "block" in m and ("rescue" in m or "always" in m)
        )

    def jinja_spans(self) -> list[str]:
        return _JINJA_SPAN.findall(self.full_source)


def _derived_value(measure: str, analysis: _RepoAnalysis, snapshot: RepoSnapshot) -> float:
    shape = analysis.shape
    if measure == "entropy":
        return _entropy_bits(analysis.token_counts)
    if measure == "raw_line_count":
        return analysis.raw_lines
    if measure == "blank_line_count":
        return analysis.blank_lines
    if measure == "comment_line_count":
        return analysis.comment_lines
    if measure == "source_line_count":
        return analysis.raw_lines - analysis.blank_lines
    if measure == "code_line_count":
        return analysis.raw_lines - analysis.blank_lines - analysis.comment_lines
    if measure == "blank_space_between_words":
        return analysis.word_gaps
    if measure == "task_count":
        return shape.task_count
    if measure == "play_count":
        return shape.play_count
    if measure == "avg_play_size":
        return shape.avg_play_size
    if measure == "avg_task_size":
        return shape.avg_task_size
    if measure == "length_of_tasks":
        return shape.length_of_tasks
    if measure == "unique_names":
        return shape.unique_names
    if measure == "names_with_variables":
        return shape.names_with_variables
    if measure == "entity_name_keys":
        return shape.name_key_count
    if measure == "total_keys":
        return analysis.total_keys
    if measure == "variable_definitions":
        return analysis.variable_definitions()
    if measure == "decision_operators":
        return analysis.decision_operators()
    if measure == "math_operations":
        return sum(len(_MATH_OP.findall(span)) for span in analysis.jinja_spans())
    if measure == "jinja_filters":
        return sum(span.count("|") for span in analysis.jinja_spans())
    if measure == "error_handling_blocks":
        return analysis.error_handling_blocks()
    if measure == "external_modules":
        return analysis.external_modules
    if measure == "distinct_modules":
        return analysis.distinct_modules
    if measure == "avg_update_time":
        return snapshot.metadata.avg_update_time_days if snapshot.metadata else 0.0
    raise ValueError(f"unknown derived measure {measure!r}")


# Names _derived_value implements; must stay equal to
# catalog.KNOWN_DERIVED_MEASURES (asserted by the test suite).
DERIVED_MEASURE_NAMES = frozenset(
    {
        "entropy",
        "raw_line_count",
        "blank_line_count",
        "comment_line_count",
        "source_line_count",
        "code_line_count",
        "blank_space_between_words",
        "task_count",
        "play_count",
        "avg_play_size",
        "avg_task_size",
        "length_of_tasks",
        "unique_names",
        "names_with_variables",
        "entity_name_keys",
        "total_keys",
        "variable_definitions",
        "decision_operators",
        "math_operations",
        "jinja_filters",
        "error_handling_blocks",
        "external_modules",
        "distinct_modules",
        "avg_update_time",
    }
)


def _module_matches(short: str, patterns: tuple[str, ...]) -> bool:
    for pattern in patterns:
        if any(c in pattern for c in "*?["):
            if fnmatch.fnmatchcase(short, pattern):
                return True
        elif short == pattern:
            return True
    return False


def _metadata_value(snapshot: RepoSnapshot, field_name: str) -> float:
    value = getattr(snapshot.metadata, field_name)
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, (int, float)):
        return max(0.0, float(value)) if isinstance(value, float) else max(0, value)
    if isinstance(value, str):
        return 1 if value else 0
    if isinstance(value, (list, tuple)):
        return len(value)
    return 0


def extract(snapshot: RepoSnapshot, catalog: list[AttributeDefinition]) -> AttributeCounts:
    """Measure every catalog attribute on one repository snapshot.

    The result always covers every catalog id (0 when absent); problems are
    reported as warnings, never as missing entries.
    """
    key_attrs = [d for d in catalog if d.rule.kind == "key_occurrence"]
    analysis = _RepoAnalysis(snapshot, key_attrs)
    warnings = list(snapshot.warnings)

    metadata_missing = snapshot.metadata is None
    flagged_metadata = False

    values: dict[str, float] = {}
    for definition in catalog:
        rule = definition.rule
        if rule.kind == "key_occurrence":
            value: float = analysis.key_counts[definition.id]
        elif rule.kind == "module_usage":
            value = sum(
                1 for short, _ in analysis.modules if _module_matches(short, rule.payload)
            )
        elif rule.kind == "regex_match":
            spec = rule.payload
            regex = spec.compile()
            if spec.stream == "comments":
                value = sum(1 for text in analysis.comments if regex.search(text))
            else:
                value = sum(1 for _ in regex.finditer(analysis.full_source))
        elif rule.kind == "file_fact":
            fact = getattr(snapshot.file_facts, rule.payload)
            value = int(fact) if isinstance(fact, bool) else fact
        elif rule.kind == "metadata_field":
            if metadata_missing:
                value = 0
                if not flagged_metadata:
                    warnings.append("metadata absent; metadata attributes defaulted to 0")
                    flagged_metadata = True
            else:
                value = _metadata_value(snapshot, rule.payload)
        else:  # derived; unknown measures are unreachable after validation
            if metadata_missing and rule.payload == "avg_update_time" and not flagged_metadata:
                warnings.append("metadata absent; metadata attributes defaulted to 0")
                flagged_metadata = True
            value = _derived_value(rule.payload, analysis, snapshot)
        values[definition.id] = value

    return AttributeCounts(
        repo_id=snapshot.repo_id,
        loc=snapshot.loc,
        values=values,
        warnings=tuple(warnings),
    )
