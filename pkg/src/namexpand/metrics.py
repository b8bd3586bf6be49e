"""Score predicted expansions against gold logical names: normalized exact
match, multiset token F1, and aggregates overall plus per difficulty level.

Aggregates come in two conventions: over successfully extracted predictions
only (as commonly reported), and over all records with failures scored zero.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .difficulty import DifficultyLevel

_PUNCT_TO_SPACE = str.maketrans({c: " " for c in string.punctuation})
_ARTICLES = {"a", "an", "the"}


def normalize_answer(s: str) -> str:
    """Lowercase, turn punctuation into spaces, drop standalone articles and
    collapse whitespace."""
    tokens = s.lower().translate(_PUNCT_TO_SPACE).split()
    return " ".join(t for t in tokens if t not in _ARTICLES)


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def token_f1(pred: str, gold: str) -> float:
    """Harmonic mean of token precision/recall; shared tokens counted with
    multiplicity."""
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    shared = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if shared == 0:
        return 0.0
    precision = shared / len(pred_tokens)
    recall = shared / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


@dataclass
class EvalRecord:
    """Per-example scores; an absent prediction marks an extraction failure."""

    table_id: str
    column_index: int
    prediction: str | None
    gold: str
    difficulty: DifficultyLevel
    em: int
    f1: float

    @property
    def extracted(self) -> bool:
        return self.prediction is not None


def score_record(
    table_id: str,
    column_index: int,
    prediction: str | None,
    gold: str,
    difficulty: DifficultyLevel,
) -> EvalRecord:
    if prediction is None:
        em, f1 = 0, 0.0
    else:
        em = exact_match(prediction, gold)
        f1 = token_f1(prediction, gold)
        if em == 1:
            f1 = 1.0
    return EvalRecord(table_id, column_index, prediction, gold, difficulty, em, f1)


@dataclass(frozen=True)
class ScoreCell:
    em: float
    f1: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return {"em": self.em, "f1": self.f1, "n": self.n}


def _mean_cell(records: Sequence[EvalRecord]) -> ScoreCell:
    n = len(records)
    if n == 0:
        return ScoreCell(em=0.0, f1=0.0, n=0)
    return ScoreCell(
        em=sum(r.em for r in records) / n,
        f1=sum(r.f1 for r in records) / n,
        n=n,
    )


@dataclass(frozen=True)
class EvalReport:
    """Aggregate scores under both conventions, plus the extraction rate."""

    overall: ScoreCell
    per_difficulty: dict[DifficultyLevel, ScoreCell]
    overall_all: ScoreCell
    per_difficulty_all: dict[DifficultyLevel, ScoreCell]
    extraction_rate: float
    n: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "extraction_rate": self.extraction_rate,
            "extracted_only": {
                "overall": self.overall.to_dict(),
                "per_difficulty": {
                    lvl.as_str(): cell.to_dict() for lvl, cell in self.per_difficulty.items()
                },
            },
            "all_records": {
                "overall": self.overall_all.to_dict(),
                "per_difficulty": {
                    lvl.as_str(): cell.to_dict() for lvl, cell in self.per_difficulty_all.items()
                },
            },
        }


def aggregate(records: Iterable[EvalRecord]) -> EvalReport:
    """Fold records (in canonical order) into an EvalReport."""
    ordered = sorted(records, key=lambda r: (r.table_id, r.column_index))
    if not ordered:
        raise ValueError("cannot aggregate an empty record list")
    extracted = [r for r in ordered if r.extracted]
    per_level = {
        level: _mean_cell([r for r in extracted if r.difficulty == level])
        for level in DifficultyLevel
    }
    per_level_all = {
        level: _mean_cell([r for r in ordered if r.difficulty == level])
        for level in DifficultyLevel
    }
    return EvalReport(
        overall=_mean_cell(extracted),
        per_difficulty=per_level,
        overall_all=_mean_cell(ordered),
        per_difficulty_all=per_level_all,
        extraction_rate=len(extracted) / len(ordered),
        n=len(ordered),
    )


def render_report(reports: dict[str, EvalReport]) -> str:
    """Render one text table: rows overall + four levels, EM and F1 column
    blocks with one sub-column per labelled prediction set (e.g. q, t'+q)."""
    if not reports:
        raise ValueError("nothing to render")
    labels = list(reports)
    width = max(12, max(len(lbl) for lbl in labels) + 2)

    def fmt(value: float) -> str:
        return f"{100 * value:.1f}"

    lines = []
    header_blocks = "".join(f"{metric:<{width * len(labels)}}" for metric in ("EM", "F1"))
    lines.append(f"{'':<12}{header_blocks}")
    sub = "".join(f"{lbl:<{width}}" for lbl in labels) * 2
    lines.append(f"{'':<12}{sub}")
    row_specs: list[tuple[str, DifficultyLevel | None]] = [("Overall", None)] + [
        (level.label, level) for level in DifficultyLevel
    ]
    for row_label, level in row_specs:
        cells = []
        for metric in ("em", "f1"):
            for lbl in labels:
                report = reports[lbl]
                cell = report.overall if level is None else report.per_difficulty[level]
                cells.append(f"{fmt(getattr(cell, metric)):<{width}}")
        lines.append(f"{row_label:<12}{''.join(cells)}")
    footer = "  ".join(
        f"{lbl}: n={reports[lbl].n}, extraction rate {fmt(reports[lbl].extraction_rate)}%"
        for lbl in labels
    )
    lines.append(footer)
    all_line = "  ".join(
        f"{lbl}: EM {fmt(reports[lbl].overall_all.em)}, F1 {fmt(reports[lbl].overall_all.f1)}"
        for lbl in labels
    )
    lines.append(f"all-records convention: {all_line}")
    return "\n".join(lines)
