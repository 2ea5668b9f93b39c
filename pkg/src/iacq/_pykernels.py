"""Pure-Python implementations of the per-file hot loops.

These are the reference semantics for `iacq._ckernels` (the compiled twin);
both must return bit-identical results for any input. See `iacq.kernels` for
how one of the two is selected at import time.
"""

from __future__ import annotations

IMPL = "python"


def scan_lines(text: str) -> tuple[int, int, int, list[tuple[int, str]], int]:
    """Classify the lines of one YAML source file in a single pass.

    Returns ``(raw, blank, comment_only, comments, word_gaps)`` where

    * ``raw`` is the number of lines,
    * ``blank`` the number of whitespace-only lines,
    * ``comment_only`` the number of lines whose first non-blank char is ``#``,
    * ``comments`` is ``[(line_no, text), ...]`` (1-based) for comment-only
      lines and for trailing comments (a ``#`` preceded by whitespace outside
      single/double quotes); ``text`` runs from the ``#`` to end of line,
    * ``word_gaps`` is the number of inter-word whitespace gaps summed over
      code lines (lines that are neither blank nor comment-only).

    Quote tracking is per line; multi-line quoted scalars are treated as
    unquoted, which matches the usual linter trade-off.
    """
    raw = 0
    blank = 0
    comment_only = 0
    word_gaps = 0
    comments: list[tuple[int, str]] = []

    for raw, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            blank += 1
            continue
        if stripped.startswith("#"):
            comment_only += 1
            comments.append((raw, stripped))
            continue
        # Code line: look for a trailing comment outside quotes.
        in_single = False
        in_double = False
        escaped = False
        comment_at = -1
        for i, ch in enumerate(line):
            if in_single:
                if ch == "'":
                    in_single = False
            elif in_double:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_double = False
            elif ch == "'":
                in_single = True
            elif ch == '"':
                in_double = True
            elif ch == "#" and i > 0 and line[i - 1] in " \t":
                comment_at = i
                break
        if comment_at >= 0:
            comments.append((raw, line[comment_at:].rstrip()))
        tokens = len(line.split())
        if tokens > 1:
            word_gaps += tokens - 1

    return raw, blank, comment_only, comments, word_gaps


def walk_tree(
    docs: list,
    keyword_slots: dict[str, tuple[int, ...]],
    n_slots: int,
) -> tuple[list[int], dict[str, int], int]:
    """Walk parsed YAML documents once, collecting key and token statistics.

    ``keyword_slots`` maps a mapping-key string to the indices of every
    counter it increments (one keyword may feed several attributes).

    Returns ``(slot_counts, token_counts, total_keys)``: the per-slot
    occurrence counts, the frequency map of whitespace-split tokens drawn
    from mapping keys and scalar values, and the total number of mapping
    keys seen at any depth.
    """
    slot_counts = [0] * n_slots
    token_counts: dict[str, int] = {}
    total_keys = 0

    stack = list(reversed(docs))
    while stack:
        node = stack.pop()
        if isinstance(node, dict):
            values = []
            for key, value in node.items():
                total_keys += 1
                if isinstance(key, str):
                    slots = keyword_slots.get(key)
                    if slots is not None:
                        for s in slots:
                            slot_counts[s] += 1
                    for tok in key.split():
                        token_counts[tok] = token_counts.get(tok, 0) + 1
                elif key is not None:
                    for tok in str(key).split():
                        token_counts[tok] = token_counts.get(tok, 0) + 1
                values.append(value)
            stack.extend(reversed(values))
        elif isinstance(node, (list, tuple)):
            stack.extend(reversed(node))
        elif node is not None:
            text = node if isinstance(node, str) else str(node)
            for tok in text.split():
                token_counts[tok] = token_counts.get(tok, 0) + 1

    return slot_counts, token_counts, total_keys
