"""Ingest tabular data from CSV files or a Socrata endpoint and apply
row/column/NaN/duplicate quality filters before fabrication.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from typing import IO, Any, Iterable, Sequence

import requests

SOCRATA_TOKEN_ENV = "NAMEGUESS_SOCRATA_TOKEN"

# Cell spellings treated as absent values.
NAN_TOKENS = frozenset({"", "NaN", "nan", "NA", "null", "NULL"})


class CsvParseError(ValueError):
    """Raised for empty or structurally broken CSV input."""


class SocrataError(RuntimeError):
    """Raised when the Socrata endpoint cannot be read."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass
class Table:
    """A parsed tabular artifact; cells are row-major with None for NaN."""

    id: str
    headers: list[str]
    cells: list[list[str | None]]
    name: str | None = None
    category: str | None = None
    description: str | None = None

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cols(self) -> int:
        return len(self.headers)

    def column(self, index: int) -> list[str | None]:
        return [row[index] for row in self.cells]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "headers": self.headers, "cells": self.cells}
        for key in ("name", "category", "description"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Table":
        return cls(
            id=raw["id"],
            headers=list(raw["headers"]),
            cells=[list(row) for row in raw["cells"]],
            name=raw.get("name"),
            category=raw.get("category"),
            description=raw.get("description"),
        )


@dataclass(frozen=True)
class FilterCriteria:
    """Quality thresholds a table must meet to enter a corpus."""

    min_rows: int = 5
    min_cols: int = 5
    max_nan_fraction: float = 0.5
    max_duplicate_name_fraction: float = 0.5
    max_rows_retained: int = 1000

    def __post_init__(self) -> None:
        if self.min_rows < 1 or self.min_cols < 1 or self.max_rows_retained < 1:
            raise ValueError("count thresholds must be >= 1")
        for name in ("max_nan_fraction", "max_duplicate_name_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _normalize_cell(value: str) -> str | None:
    return None if value in NAN_TOKENS else value


def ingest_csv(source: IO[bytes] | IO[str] | str | bytes, id: str) -> Table:
    """Parse delimiter-separated text with a mandatory header row.

    Empty cells and the usual NaN spellings become absent values.  Ragged
    rows raise CsvParseError naming the 1-based data row; empty input is an
    error.
    """
    if isinstance(source, bytes):
        text: IO[str] = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        text = io.StringIO(source)
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        text = io.StringIO(data)
    else:
        raise TypeError(f"unsupported CSV source type: {type(source)!r}")

    reader = csv.reader(text)
    try:
        headers = next(reader)
    except StopIteration:
        raise CsvParseError(f"table {id!r}: empty CSV input")
    if not any(h.strip() for h in headers):
        raise CsvParseError(f"table {id!r}: header row is blank")

    cells: list[list[str | None]] = []
    for i, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(headers):
            raise CsvParseError(
                f"table {id!r}: row {i} has {len(row)} fields, expected {len(headers)}"
            )
        cells.append([_normalize_cell(v) for v in row])
    return Table(id=id, headers=headers, cells=cells)


def fetch_socrata(
    domain: str,
    dataset_id: str,
    limit: int,
    scheme: str = "https",
    timeout: float = 30.0,
) -> Table:
    """Fetch a dataset from GET {scheme}://{domain}/resource/{dataset_id}.json.

    Field order of the JSON records is preserved; at most `limit` rows are
    returned.  A NAMEGUESS_SOCRATA_TOKEN environment variable, when set, is
    sent as the app-token header.
    """
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    url = f"{scheme}://{domain}/resource/{dataset_id}.json?$limit={limit}"
    headers = {}
    token = os.environ.get(SOCRATA_TOKEN_ENV)
    if token:
        headers["X-App-Token"] = token
    try:
        response = requests.get(url, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise SocrataError(f"request to {url} failed: {exc}") from exc
    if not 200 <= response.status_code < 300:
        raise SocrataError(
            f"GET {url} returned HTTP {response.status_code}", status=response.status_code
        )
    try:
        records = response.json()
    except ValueError as exc:
        raise SocrataError(f"response from {url} is not JSON: {exc}") from exc
    if not isinstance(records, list) or any(not isinstance(r, dict) for r in records):
        raise SocrataError(f"unexpected JSON shape from {url}: expected a list of objects")

    fields: list[str] = []
    for record in records:
        for key in record:
            if key not in fields:
                fields.append(key)
    cells = [
        [_normalize_cell(str(r[k])) if k in r and r[k] is not None else None for k in fields]
        for r in records[:limit]
    ]
    return Table(id=dataset_id, headers=fields, cells=cells)


def nan_fraction(table: Table) -> float:
    total = table.n_rows * table.n_cols
    if total == 0:
        return 0.0
    absent = sum(1 for row in table.cells for cell in row if cell is None)
    return absent / total


def duplicate_name_fraction(table: Table) -> float:
    """1 - distinct headers / column count, case-sensitive."""
    if table.n_cols == 0:
        return 0.0
    return 1.0 - len(set(table.headers)) / table.n_cols


def filter_tables(
    tables: Sequence[Table], criteria: FilterCriteria | None = None
) -> tuple[list[Table], list[tuple[str, str]]]:
    """Partition tables into (kept, rejected-with-reason).

    Rows beyond max_rows_retained are cut before any check so that filtering
    the kept set again is a no-op.  Rejections carry the first failed
    criterion, checked in order: rows, columns, NaN fraction, duplicates.
    """
    criteria = criteria or FilterCriteria()
    kept: list[Table] = []
    rejected: list[tuple[str, str]] = []
    for table in tables:
        if table.n_rows > criteria.max_rows_retained:
            table = Table(
                id=table.id,
                headers=table.headers,
                cells=table.cells[: criteria.max_rows_retained],
                name=table.name,
                category=table.category,
                description=table.description,
            )
        if table.n_rows < criteria.min_rows:
            rejected.append((table.id, "too few rows"))
        elif table.n_cols < criteria.min_cols:
            rejected.append((table.id, "too few columns"))
        elif nan_fraction(table) > criteria.max_nan_fraction:
            rejected.append((table.id, "NaN fraction"))
        elif duplicate_name_fraction(table) > criteria.max_duplicate_name_fraction:
            rejected.append((table.id, "duplicate header fraction"))
        else:
            kept.append(table)
    return kept, rejected


def manifest_lines(
    tables: Sequence[Table], kept: Sequence[Table], rejected: Sequence[tuple[str, str]]
) -> list[str]:
    """One JSON object per input table: id, dimensions, kept flag, reason."""
    reasons = dict(rejected)
    kept_rows = {t.id: (t.n_rows, t.n_cols) for t in kept}
    lines = []
    for table in tables:
        n_rows, n_cols = kept_rows.get(table.id, (table.n_rows, table.n_cols))
        lines.append(
            json.dumps(
                {
                    "id": table.id,
                    "n_rows": n_rows,
                    "n_cols": n_cols,
                    "kept": table.id in kept_rows,
                    "reason": reasons.get(table.id),
                },
                ensure_ascii=False,
            )
        )
    return lines


def write_tables_jsonl(tables: Iterable[Table], path: str) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for table in tables:
            f.write(json.dumps(table.to_dict(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_tables_jsonl(path: str) -> list[Table]:
    tables = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                tables.append(Table.from_dict(json.loads(line)))
    return tables
