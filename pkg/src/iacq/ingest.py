"""Repository ingestion: turn a directory tree into an immutable snapshot.

A snapshot holds, per YAML file, the parsed documents plus everything the
extractor needs that only the source text or parse marks can provide (line
classes, comments, play/task line spans and names), along with file-tree
facts and the optional registry metadata record.

One broken YAML file never aborts a scan: it is recorded as a parse warning,
keeps its line counts (so it still weighs in the lines-of-code denominator)
and contributes zero attribute occurrences.
"""

from __future__ import annotations

import fnmatch
import json
import os
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import kernels
from .errors import IngestError

DEFAULT_IGNORE_GLOBS: tuple[str, ...] = (".git", ".github", "molecule")
SIDECAR_NAME = "galaxy_meta.json"

_YAML_SUFFIXES = (".yml", ".yaml")
_TASK_SECTION_KEYS = frozenset(
    {"tasks", "pre_tasks", "post_tasks", "handlers", "block", "rescue", "always"}
)


class _TolerantLoader(yaml.SafeLoader):
    """SafeLoader that keeps unknown tags (e.g. !vault) instead of failing."""


def _construct_unknown(loader: yaml.SafeLoader, node: yaml.Node):
    if isinstance(node, yaml.ScalarNode):
        return node.value
    if isinstance(node, yaml.SequenceNode):
        return loader.construct_sequence(node)
    if isinstance(node, yaml.MappingNode):
        return loader.construct_mapping(node)
    return None


_TolerantLoader.add_constructor(None, _construct_unknown)


@dataclass(frozen=True)
class YamlDoc:
    """One YAML file of a repository, parsed and line-classified."""

    path: str
    text: str
    documents: tuple
    raw_line_count: int
    blank_line_count: int
    comment_line_count: int
    comments: tuple[tuple[int, str], ...]
    word_gap_count: int
    play_sizes: tuple[int, ...]
    task_sizes: tuple[int, ...]
    play_names: tuple[str, ...]
    task_names: tuple[str, ...]
    name_key_count: int
    parse_error: str | None = None

    @property
    def code_line_count(self) -> int:
        return self.raw_line_count - self.blank_line_count - self.comment_line_count


@dataclass(frozen=True)
class FileFacts:
    readme_count: int = 0
    readme_word_count: int = 0
    license_present: bool = False
    directory_count: int = 0
    file_count: int = 0
    template_file_count: int = 0
    yaml_file_count: int = 0


@dataclass(frozen=True)
class GalaxyMetadata:
    """Registry metadata record (sidecar file or registry response)."""

    download_count: int = 0
    tag_count: int = 0
    total_versions: int = 0
    dependency_count: int = 0
    supported_platform_count: int = 0
    stars: int = 0
    forks: int = 0
    open_issues: int = 0
    min_ansible_version: str = ""
    version_release_times: tuple[datetime, ...] = ()
    observed_at: datetime | None = None
    completeness: tuple[str, ...] = ()

    @property
    def avg_update_time_days(self) -> float:
        """Mean gap in days between consecutive releases; 0.0 below 2 releases."""
        times = self.version_release_times
        if len(times) < 2:
            return 0.0
        total = (times[-1] - times[0]).total_seconds()
        return total / 86400.0 / (len(times) - 1)

    def reference_time(self, time_field: str = "latest_release") -> datetime | None:
        """Timestamp anchoring this repository on the time axis."""
        if time_field == "observed_at":
            return self.observed_at
        if self.version_release_times:
            return self.version_release_times[-1]
        return self.observed_at


@dataclass(frozen=True)
class RepoSnapshot:
    repo_id: str
    root_path: str
    yaml_docs: tuple[YamlDoc, ...]
    file_facts: FileFacts
    loc: int
    metadata: GalaxyMetadata | None = None
    warnings: tuple[str, ...] = ()


def count_loc(docs) -> int:
    """Lines that are neither blank nor comment-only, summed over docs."""
    return sum(d.code_line_count for d in docs)


# --------------------------------------------------------------------------
# YAML structure: play/task spans and names from composed nodes
# --------------------------------------------------------------------------


@dataclass
class _Shape:
    play_sizes: list[int] = field(default_factory=list)
    task_sizes: list[int] = field(default_factory=list)
    play_names: list[str] = field(default_factory=list)
    task_names: list[str] = field(default_factory=list)
    name_key_count: int = 0


def _nonblank(lines: list[str], start: int, end: int) -> int:
    end = min(end, len(lines) - 1)
    return sum(1 for i in range(start, end + 1) if lines[i].strip())


def _entry_spans(entries, parent_end: int) -> list[tuple[int, int]]:
    """Line span of each sequence entry: start to the next sibling's start."""
    starts = [e.start_mark.line for e in entries]
    spans = []
    for i, a in enumerate(starts):
        b = starts[i + 1] - 1 if i + 1 < len(starts) else parent_end
        spans.append((a, max(a, b)))
    return spans


def _is_play(node) -> bool:
    return isinstance(node, yaml.MappingNode) and any(
        isinstance(k, yaml.ScalarNode) and k.value == "hosts" for k, _ in node.value
    )


def _record_entity(node, shape: _Shape, is_play: bool) -> None:
    if not isinstance(node, yaml.MappingNode):
        return
    for k, v in node.value:
        if isinstance(k, yaml.ScalarNode) and k.value == "name":
            shape.name_key_count += 1
            if isinstance(v, yaml.ScalarNode):
                (shape.play_names if is_play else shape.task_names).append(v.value)


def _walk_mapping(node, parent_end: int, lines: list[str], shape: _Shape) -> None:
    """Find task lists under a mapping; recurse into nested structures."""
    pairs = node.value
    for i, (k, v) in enumerate(pairs):
        value_end = pairs[i + 1][0].start_mark.line - 1 if i + 1 < len(pairs) else parent_end
        is_task_list = (
            isinstance(k, yaml.ScalarNode)
            and k.value in _TASK_SECTION_KEYS
            and isinstance(v, yaml.SequenceNode)
        )
        if is_task_list:
            for entry, (a, b) in zip(v.value, _entry_spans(v.value, value_end)):
                shape.task_sizes.append(_nonblank(lines, a, b))
                _record_entity(entry, shape, is_play=False)
                if isinstance(entry, yaml.MappingNode):
                    _walk_mapping(entry, b, lines, shape)
        elif isinstance(v, yaml.MappingNode):
            _walk_mapping(v, value_end, lines, shape)


def _collect_shape(doc_node, lines: list[str], shape: _Shape) -> None:
    last_line = len(lines) - 1
    if isinstance(doc_node, yaml.SequenceNode):
        entries = doc_node.value
        spans = _entry_spans(entries, last_line)
        if any(_is_play(e) for e in entries):
            # Playbook: hosts-bearing entries are plays; other top-level
            # entries (import_playbook and friends) are neither play nor task.
            for entry, (a, b) in zip(entries, spans):
                if _is_play(entry):
                    shape.play_sizes.append(_nonblank(lines, a, b))
                    _record_entity(entry, shape, is_play=True)
                    _walk_mapping(entry, b, lines, shape)
        else:
            # Task file: every top-level entry is a task.
            for entry, (a, b) in zip(entries, spans):
                shape.task_sizes.append(_nonblank(lines, a, b))
                _record_entity(entry, shape, is_play=False)
                if isinstance(entry, yaml.MappingNode):
                    _walk_mapping(entry, b, lines, shape)
    elif isinstance(doc_node, yaml.MappingNode):
        _walk_mapping(doc_node, last_line, lines, shape)


def _construct_document(node):
    loader = _TolerantLoader("")
    return loader.construct_document(node)


def parse_yaml_doc(path: str, text: str) -> YamlDoc:
    """Parse one YAML file into a YamlDoc (never raises on bad content)."""
    raw, blank, comment, comments, word_gaps = kernels.scan_lines(text)
    documents: tuple = ()
    shape = _Shape()
    parse_error: str | None = None
    try:
        nodes = [n for n in yaml.compose_all(text, Loader=_TolerantLoader) if n is not None]
        documents = tuple(_construct_document(n) for n in nodes)
    except yaml.YAMLError as exc:
        parse_error = f"{exc}".replace("\n", " ")
        documents = ()
    else:
        lines = text.splitlines()
        for node in nodes:
            _collect_shape(node, lines, shape)
    return YamlDoc(
        path=path,
        text=text,
        documents=documents,
        raw_line_count=raw,
        blank_line_count=blank,
        comment_line_count=comment,
        comments=tuple(comments),
        word_gap_count=word_gaps,
        play_sizes=tuple(shape.play_sizes),
        task_sizes=tuple(shape.task_sizes),
        play_names=tuple(shape.play_names),
        task_names=tuple(shape.task_names),
        name_key_count=shape.name_key_count,
        parse_error=parse_error,
    )


# --------------------------------------------------------------------------
# Directory scan
# --------------------------------------------------------------------------


def _ignored(rel_parts: tuple[str, ...], ignore_globs: tuple[str, ...]) -> bool:
    rel = "/".join(rel_parts)
    for pattern in ignore_globs:
        pattern = pattern.rstrip("/")
        if fnmatch.fnmatch(rel, pattern):
            return True
        if any(fnmatch.fnmatch(part, pattern) for part in rel_parts):
            return True
    return False


def scan_repo(
    root: str | Path,
    metadata_sidecar: str | Path | None = None,
    *,
    ignore_globs: tuple[str, ...] = DEFAULT_IGNORE_GLOBS,
    repo_id: str | None = None,
) -> RepoSnapshot:
    """Scan a repository directory into a RepoSnapshot.

    The metadata sidecar defaults to <root>/galaxy_meta.json when present;
    passing an explicit path makes its absence an error. The sidecar file is
    measurement input, not repository content, so it is excluded from file
    facts.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError("io", f"not a readable directory: {root}")
    rid = repo_id if repo_id is not None else root.resolve().name

    warnings: list[str] = []
    docs: list[YamlDoc] = []
    readme_count = 0
    readme_words = 0
    license_present = False
    dir_count = 0
    file_count = 0
    template_count = 0
    yaml_count = 0

    try:
        walker = os.walk(root, onerror=None)
        for dirpath, dirnames, filenames in walker:
            rel_dir = Path(dirpath).relative_to(root).parts
            dirnames.sort()
            dirnames[:] = [d for d in dirnames if not _ignored(rel_dir + (d,), ignore_globs)]
            dir_count += len(dirnames)
            for fn in sorted(filenames):
                rel_parts = rel_dir + (fn,)
                if _ignored(rel_parts, ignore_globs):
                    continue
                if not rel_dir and fn == SIDECAR_NAME:
                    continue
                file_count += 1
                fpath = Path(dirpath) / fn
                upper = fn.upper()
                suffix = Path(fn).suffix.lower()
                if upper.startswith("README"):
                    readme_count += 1
                    try:
                        readme_words += len(fpath.read_text("utf-8", errors="replace").split())
                    except OSError as exc:
                        warnings.append(f"{'/'.join(rel_parts)}: unreadable ({exc})")
                if upper.startswith(("LICENSE", "LICENCE", "COPYING")):
                    license_present = True
                if suffix == ".j2":
                    template_count += 1
                if suffix in _YAML_SUFFIXES:
                    yaml_count += 1
                    try:
                        text = fpath.read_text("utf-8", errors="replace")
                    except OSError as exc:
                        warnings.append(f"{'/'.join(rel_parts)}: unreadable ({exc})")
                        continue
                    doc = parse_yaml_doc("/".join(rel_parts), text)
                    if doc.parse_error:
                        warnings.append(f"{doc.path}: parse warning: {doc.parse_error}")
                    docs.append(doc)
    except OSError as exc:
        raise IngestError("io", f"cannot scan {root}: {exc}") from exc

    docs.sort(key=lambda d: d.path)

    metadata: GalaxyMetadata | None = None
    sidecar_path = Path(metadata_sidecar) if metadata_sidecar else root / SIDECAR_NAME
    if metadata_sidecar is not None and not sidecar_path.is_file():
        raise IngestError("io", f"metadata sidecar not found: {sidecar_path}")
    if sidecar_path.is_file():
        try:
            record = json.loads(sidecar_path.read_text("utf-8"))
            metadata = parse_galaxy_metadata(record)
        except (json.JSONDecodeError, OSError, TypeError) as exc:
            warnings.append(f"{sidecar_path.name}: metadata unreadable: {exc}")

    facts = FileFacts(
        readme_count=readme_count,
        readme_word_count=readme_words,
        license_present=license_present,
        directory_count=dir_count,
        file_count=file_count,
        template_file_count=template_count,
        yaml_file_count=yaml_count,
    )
    return RepoSnapshot(
        repo_id=rid,
        root_path=str(root),
        yaml_docs=tuple(docs),
        file_facts=facts,
        loc=count_loc(docs),
        metadata=metadata,
        warnings=tuple(warnings),
    )


# --------------------------------------------------------------------------
# Registry metadata
# --------------------------------------------------------------------------

_INT_FIELDS = (
    "download_count",
    "tag_count",
    "total_versions",
    "dependency_count",
    "supported_platform_count",
    "stars",
    "forks",
    "open_issues",
)


def _parse_ts(value: str) -> datetime:
    ts = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_galaxy_metadata(record: dict) -> GalaxyMetadata:
    """Build GalaxyMetadata from a sidecar-schema dict.

    Missing or unparseable fields default to 0/empty and are flagged in
    `completeness`; values are never fabricated.
    """
    flags: list[str] = []
    ints: dict[str, int] = {}
    for name in _INT_FIELDS:
        if name not in record or record[name] is None:
            flags.append(f"{name} missing")
            ints[name] = 0
            continue
        try:
            ints[name] = max(0, int(record[name]))
        except (TypeError, ValueError):
            flags.append(f"{name} invalid")
            ints[name] = 0

    min_version = record.get("min_ansible_version")
    if min_version is None:
        flags.append("min_ansible_version missing")
        min_version = ""

    release_times: list[datetime] = []
    raw_times = record.get("version_release_times")
    if raw_times is None:
        flags.append("version_release_times missing")
    else:
        for value in raw_times:
            try:
                release_times.append(_parse_ts(value))
            except (TypeError, ValueError):
                flags.append(f"version_release_times entry invalid: {value!r}")
    release_times.sort()

    observed_at = None
    if record.get("observed_at") is None:
        flags.append("observed_at missing")
    else:
        try:
            observed_at = _parse_ts(record["observed_at"])
        except (TypeError, ValueError):
            flags.append("observed_at invalid")

    return GalaxyMetadata(
        download_count=ints["download_count"],
        tag_count=ints["tag_count"],
        total_versions=ints["total_versions"],
        dependency_count=ints["dependency_count"],
        supported_platform_count=ints["supported_platform_count"],
        stars=ints["stars"],
        forks=ints["forks"],
        open_issues=ints["open_issues"],
        min_ansible_version=str(min_version),
        version_release_times=tuple(release_times),
        observed_at=observed_at,
        completeness=tuple(flags),
    )


def _galaxy_result_to_sidecar(rec: dict) -> dict:
    """Flatten a Galaxy v1 role record into the sidecar schema."""
    summary = rec.get("summary_fields") or {}
    flat: dict[str, object] = {}

    def put(key: str, value: object) -> None:
        if value is not None:
            flat[key] = value

    put("download_count", rec.get("download_count"))
    put("stars", rec.get("stargazers_count"))
    put("forks", rec.get("forks_count"))
    put("open_issues", rec.get("open_issues_count"))
    put("min_ansible_version", rec.get("min_ansible_version"))
    put("observed_at", rec.get("modified"))
    if "tags" in summary:
        flat["tag_count"] = len(summary["tags"] or [])
    if "dependencies" in summary:
        flat["dependency_count"] = len(summary["dependencies"] or [])
    if "platforms" in summary:
        flat["supported_platform_count"] = len(summary["platforms"] or [])
    if "versions" in summary:
        versions = summary["versions"] or []
        flat["total_versions"] = len(versions)
        times = [v.get("release_date") for v in versions if isinstance(v, dict)]
        flat["version_release_times"] = [t for t in times if t]
    return flat


def fetch_registry_metadata(repo_name: str, endpoint: str, timeout: float = 10.0) -> GalaxyMetadata:
    """Fetch role metadata from a Galaxy-compatible API (or file:// fixture).

    Accepts either a v1 role-search response ({"results": [...]}) or a flat
    sidecar-schema document. Raises IngestError(registry) on transport or
    payload failures, with a retry-after hint when the server sent one.
    """
    url = endpoint
    if "{name}" in endpoint:
        url = endpoint.format(name=urllib.parse.quote(repo_name))
    elif not endpoint.startswith("file:") and not endpoint.endswith(".json"):
        sep = "&" if "?" in endpoint else "?"
        url = f"{endpoint}{sep}name={urllib.parse.quote(repo_name)}"

    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        hint = exc.headers.get("Retry-After") if exc.headers else None
        suffix = f" (retry after {hint}s)" if hint else ""
        raise IngestError("registry", f"{url}: HTTP {exc.code}{suffix}") from exc
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise IngestError("registry", f"{url}: {exc}") from exc

    if isinstance(payload, dict) and "results" in payload:
        results = payload["results"] or []
        if not results:
            raise IngestError("registry", f"{url}: no role named {repo_name!r}")
        payload = _galaxy_result_to_sidecar(results[0])
    if not isinstance(payload, dict):
        raise IngestError("registry", f"{url}: unexpected payload type")
    return parse_galaxy_metadata(payload)
