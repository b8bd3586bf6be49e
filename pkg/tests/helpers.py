"""Shared test utilities: synthetic CSV corpora and brute-force reference
scorers kept independent of the library implementations."""

import random
import re
from pathlib import Path

WORDS = [
    "current", "balance", "customer", "name", "account", "number", "fiscal",
    "year", "total", "amount", "zip", "code", "event", "date", "birth",
    "rate", "mailing", "address", "district", "employee", "salary", "status",
    "payment", "order", "vendor", "product", "category", "region",
]


def write_corpus(root: Path, n_tables=6, n_cols=6, n_rows=8, seed=0) -> Path:
    rng = random.Random(seed)
    csv_dir = root / "csv"
    csv_dir.mkdir()
    for t in range(n_tables):
        headers = []
        seen = set()
        while len(headers) < n_cols:
            header = " ".join(
                w.capitalize() for w in rng.sample(WORDS, rng.randint(1, 3))
            )
            if rng.random() < 0.25:
                header += f" {rng.randint(1990, 2025)}"
            if header not in seen:
                seen.add(header)
                headers.append(header)
        lines = [",".join(headers)]
        for r in range(n_rows):
            lines.append(",".join(f"v{t}{r}{c}" for c in range(n_cols)))
        (csv_dir / f"table{t:02d}.csv").write_text("\n".join(lines) + "\n")
    return csv_dir


def brute_normalize(s):
    """Reference normalizer built differently from the library's: regex
    substitution instead of a translation table."""
    s = re.sub(r"[!-/:-@\[-`{-~]", " ", s.lower())
    words = [w for w in s.split() if w not in ("a", "an", "the")]
    return " ".join(words)


def brute_em(pred, gold):
    return 1 if brute_normalize(pred) == brute_normalize(gold) else 0


def brute_f1(pred, gold):
    p = brute_normalize(pred).split()
    g = brute_normalize(gold).split()
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    shared = 0
    remaining = list(g)
    for token in p:
        if token in remaining:
            remaining.remove(token)
            shared += 1
    if shared == 0:
        return 0.0
    precision = shared / len(p)
    recall = shared / len(g)
    return 2 * precision * recall / (precision + recall)
