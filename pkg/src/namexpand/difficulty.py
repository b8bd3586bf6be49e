"""Classify query/gold name pairs into four hardness levels by normalized
character edit distance, with threshold calibration against target bucket
proportions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .segment import surface_tokens


class ClassificationError(ValueError):
    """Raised when a gold name has nothing left after normalization."""


class DifficultyLevel(enum.IntEnum):
    EASY = 1
    MEDIUM = 2
    HARD = 3
    EXTRA_HARD = 4

    def as_str(self) -> str:
        return self.name.lower()

    @property
    def label(self) -> str:
        return {"EASY": "Easy", "MEDIUM": "Medium", "HARD": "Hard", "EXTRA_HARD": "Extra Hard"}[
            self.name
        ]

    @classmethod
    def from_str(cls, value: str) -> "DifficultyLevel":
        return cls[value.strip().upper()]


@dataclass(frozen=True)
class DifficultyThresholds:
    """Normalized-distance cutpoints separating the four levels."""

    t1: float = 0.1
    t2: float = 0.35
    t3: float = 0.6

    def __post_init__(self) -> None:
        if not 0.0 <= self.t1 < self.t2 < self.t3 <= 1.0:
            raise ValueError(f"thresholds must satisfy 0 <= t1 < t2 < t3 <= 1, got {self}")


def normalize_for_distance(name: str) -> str:
    """Lowercase, split on delimiters/case/digit boundaries, drop digit-only
    tokens and join with single spaces."""
    return " ".join(t for t in surface_tokens(name) if not t.isdigit())


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def normalized_distance(query: str, gold: str) -> float:
    gold_norm = normalize_for_distance(gold)
    if not gold_norm:
        raise ClassificationError(f"gold name {gold!r} is empty after normalization")
    return edit_distance(normalize_for_distance(query), gold_norm) / len(gold_norm)


def classify(
    query: str, gold: str, thresholds: DifficultyThresholds | None = None
) -> DifficultyLevel:
    """Bucket a pair by its normalized edit distance."""
    thresholds = thresholds or DifficultyThresholds()
    d = normalized_distance(query, gold)
    if d <= thresholds.t1:
        return DifficultyLevel.EASY
    if d <= thresholds.t2:
        return DifficultyLevel.MEDIUM
    if d <= thresholds.t3:
        return DifficultyLevel.HARD
    return DifficultyLevel.EXTRA_HARD


def calibrate_thresholds(
    distances: Sequence[float], target_proportions: Sequence[float]
) -> DifficultyThresholds:
    """Fit cutpoints so bucket sizes approximate the four target proportions.

    Candidate cutpoints sit between consecutive distinct distance values, so
    ties always land in one bucket; for each cumulative target the candidate
    with the closest achievable cumulative mass is chosen.
    """
    if len(target_proportions) != 4:
        raise ValueError("expected four target proportions")
    if abs(sum(target_proportions) - 1.0) > 1e-6:
        raise ValueError(f"target proportions must sum to 1, got {target_proportions}")
    if not distances:
        raise ValueError("cannot calibrate on an empty distance sample")

    ordered = sorted(distances)
    n = len(ordered)
    distinct: list[float] = []
    prefix: list[int] = []
    for i, d in enumerate(ordered):
        if not distinct or d != distinct[-1]:
            distinct.append(d)
            prefix.append(i + 1)
        else:
            prefix[-1] = i + 1

    # Cutpoint after distinct value v_j captures prefix[j] items; use the
    # midpoint to the next value (or a hair above the last).  Normalized
    # distances can exceed 1 when the query outgrows the gold; cutpoints are
    # capped at 1, so that tail always classifies as extra-hard.
    candidates = []
    for j, value in enumerate(distinct):
        if value > 1.0:
            break
        if j + 1 < len(distinct):
            cut = (value + distinct[j + 1]) / 2.0
        else:
            cut = value + 1e-9
        candidates.append((min(cut, 1.0), prefix[j]))

    cumulative_targets = [
        target_proportions[0],
        target_proportions[0] + target_proportions[1],
        sum(target_proportions[:3]),
    ]
    cuts: list[float] = []
    last_index = -1
    for target in cumulative_targets:
        best_j = None
        best_err = None
        for j in range(last_index + 1, len(candidates)):
            err = abs(candidates[j][1] / n - target)
            if best_err is None or err < best_err:
                best_err, best_j = err, j
        if best_j is None:
            raise ValueError("not enough distinct distances to fit three cutpoints")
        cuts.append(candidates[best_j][0])
        last_index = best_j
    return DifficultyThresholds(t1=cuts[0], t2=cuts[1], t3=cuts[2])
