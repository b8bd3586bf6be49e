"""Serialize table context and task prompts, chunk query columns into groups
of K with N sampled cell values each, and parse model completions back into
per-column answers.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .abbrev import NamePair
from .corpus import Table

PROMPT_PREFIX = "As abbreviations of column names from a table, "
DEMONSTRATION = (
    "As abbreviations of column names from a table, "
    "c_name | pCd | dt stand for Customer Name | Product Code | Date."
)
CELL_TRUNCATE_LEN = 20
DEFAULT_K = 10
DEFAULT_N = 10



@dataclass
class PromptBundle:
    """One chunk of query columns: linearized context plus task prompt."""

    table_id: str
    column_indices: list[int]
    context: str
    prompt: str
    queries: list[str]
    golds: list[str] | None = None
    demo_included: bool = False

    @property
    def bundle_id(self) -> str:
        return f"{self.table_id}:{self.column_indices[0]}-{self.column_indices[-1]}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "table_id": self.table_id,
            "columns": self.column_indices,
            "prompt": self.prompt,
            "golds": self.golds,
        }


def sample_cells(
    table: Table, column_index: int, n: int, rng: random.Random | None = None
) -> list[str]:
    """Up to n distinct non-absent values of a column, truncated to 20 chars.

    Values come in row order by default; pass an rng for uniform sampling
    without replacement instead.
    """
    if not 0 <= column_index < table.n_cols:
        raise IndexError(f"column index {column_index} out of range")
    distinct: list[str] = []
    seen: set[str] = set()
    for row in table.cells:
        value = row[column_index]
        if value is None or value in seen:
            continue
        seen.add(value)
        distinct.append(value)
    if rng is not None and len(distinct) > n:
        distinct = rng.sample(distinct, n)
    return [v[:CELL_TRUNCATE_LEN] for v in distinct[:n]]


def chunk_columns(table: Table, k: int) -> list[list[int]]:
    """Consecutive groups of k column indices in header order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    indices = list(range(table.n_cols))
    return [indices[i : i + k] for i in range(0, len(indices), k)]


def _chunked(seq: Sequence[Any], k: int) -> list[list[Any]]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return [list(seq[i : i + k]) for i in range(0, len(seq), k)]


def linearize_context(
    table: Table,
    group: Sequence[int],
    n: int,
    names: Sequence[str] | None = None,
    rng: random.Random | None = None,
) -> str:
    """Render "Column names: ... <SEP> row 1: ..." for one column group.

    `names` supplies the strings printed as column names (the query names in
    the fabrication pipeline); it defaults to the table headers.  Missing
    values render as empty slots; with no sampled values at all the row
    segments are omitted entirely.
    """
    if not group:
        raise ValueError("cannot linearize an empty column group")
    if names is None:
        names = [table.headers[i] for i in group]
    if len(names) != len(group):
        raise ValueError("names and group lengths differ")
    samples = [sample_cells(table, i, n, rng) for i in group]
    n_rows = min(n, max((len(s) for s in samples), default=0))
    parts = ["Column names: " + ", ".join(names)]
    for row in range(n_rows):
        values = [s[row] if row < len(s) else "" for s in samples]
        parts.append(f"row {row + 1}: " + ", ".join(values))
    return " <SEP> ".join(parts)


def build_training_prompt(context: str, queries: Sequence[str], golds: Sequence[str]) -> str:
    """Context plus the task sentence with gold answers, for training export."""
    if not queries or len(queries) != len(golds):
        raise ValueError(
            f"queries and golds must be equal-length and non-empty, "
            f"got {len(queries)} and {len(golds)}"
        )
    return (
        context
        + "\n"
        + PROMPT_PREFIX
        + " | ".join(queries)
        + " stand for "
        + " | ".join(golds)
        + "."
    )


def build_inference_prompt(context: str, queries: Sequence[str], with_demo: bool = False) -> str:
    """Context plus the task sentence truncated at "stand for", optionally
    preceded by the fixed one-shot demonstration."""
    if not queries:
        raise ValueError("queries must be non-empty")
    body = context + "\n" + PROMPT_PREFIX + " | ".join(queries) + " stand for"
    if with_demo:
        return DEMONSTRATION + "\n" + body
    return body


def _terminator_index(completion: str) -> int | None:
    for match in re.finditer(r"\.", completion):
        rest = completion[match.end() :]
        if rest == "" or rest.startswith("\n") or re.match(r" +[A-Z]", rest):
            return match.start()
    return None


def extract_answers(completion: str, k: int) -> list[str] | None:
    """Split a completion into exactly k pipe-separated answers.

    The completion is cut at the first sentence-terminating period (one
    followed by end of text, a newline, or spaces plus an uppercase letter),
    so embedded abbreviations like "No." survive.  Returns None when the cut
    text does not yield exactly k non-empty parts.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    text = completion.rstrip()
    cut = _terminator_index(text)
    if cut is not None:
        text = text[:cut]
    parts = [p.strip() for p in text.split("|")]
    if len(parts) != k or any(not p for p in parts):
        return None
    return parts


def parse_queries_from_prompt(prompt: str) -> list[str]:
    """Recover the query names from an inference prompt's final task sentence."""
    last = prompt.rstrip().split("\n")[-1]
    if not (last.startswith(PROMPT_PREFIX) and last.endswith(" stand for")):
        raise ValueError("prompt does not end with an inference task sentence")
    tail = last[len(PROMPT_PREFIX) : -len(" stand for")]
    return [q.strip() for q in tail.split(" | ")]


def build_bundles(
    tables: dict[str, Table],
    pairs: Sequence[NamePair],
    k: int = DEFAULT_K,
    n: int = DEFAULT_N,
    mode: str = "train",
    with_demo: bool = False,
    sample_rng: random.Random | None = None,
) -> list[PromptBundle]:
    """Group each table's paired columns into chunks of k and build prompts.

    mode "train" embeds gold answers in the prompt; mode "infer" truncates at
    "stand for".  Golds ride along on the bundle either way.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    by_table: dict[str, list[NamePair]] = {}
    for pair in sorted(pairs, key=lambda p: (p.table_id, p.column_index)):
        by_table.setdefault(pair.table_id, []).append(pair)

    bundles: list[PromptBundle] = []
    for table_id, table_pairs in by_table.items():
        table = tables.get(table_id)
        if table is None:
            raise KeyError(f"pairs reference unknown table {table_id!r}")
        for group_pairs in _chunked(table_pairs, k):
            indices = [p.column_index for p in group_pairs]
            queries = [p.query_name for p in group_pairs]
            golds = [p.logical_name for p in group_pairs]
            context = linearize_context(table, indices, n, names=queries, rng=sample_rng)
            if mode == "train":
                prompt = build_training_prompt(context, queries, golds)
            else:
                prompt = build_inference_prompt(context, queries, with_demo)
            bundles.append(
                PromptBundle(
                    table_id=table_id,
                    column_indices=indices,
                    context=context,
                    prompt=prompt,
                    queries=queries,
                    golds=golds,
                    demo_included=with_demo and mode == "infer",
                )
            )
    return bundles


def write_bundles_jsonl(bundles: Iterable[PromptBundle], path: str) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for bundle in bundles:
            f.write(json.dumps(bundle.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_bundles_jsonl(path: str) -> list[PromptBundle]:
    """Load exported bundles; query names are recovered from the prompt text
    for inference-style prompts."""
    bundles = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            raw = json.loads(line)
            prompt = raw["prompt"]
            try:
                queries = parse_queries_from_prompt(prompt)
            except ValueError:
                queries = []
            bundles.append(
                PromptBundle(
                    table_id=raw["table_id"],
                    column_indices=list(raw["columns"]),
                    context="",
                    prompt=prompt,
                    queries=queries,
                    golds=raw.get("golds"),
                )
            )
    return bundles
