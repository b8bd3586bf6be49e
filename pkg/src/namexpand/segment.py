"""Split column headers into word tokens and decide whether a header is
well-curated enough to serve as a gold expansion.

The segmenter first splits on delimiters, letter-case boundaries and
letter/digit boundaries, then resolves run-together lowercase text with a
dynamic program over a frequency-ranked lexicon (Zipf-style word costs).
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable

log = logging.getLogger(__name__)

TokenSeq = list[str]

# Cost per character of text not covered by any lexicon word.  Must exceed
# log2(rank + 2) for every shipped word so a known word always beats
# character-by-character coverage of the same span.
UNKNOWN_CHAR_COST = 20.0

_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z]+|[a-z]+|[0-9]+")
_ALNUM_RE = re.compile(r"[A-Za-z0-9]+")


class LexiconError(ValueError):
    """Raised for unusable lexicon or vocabulary inputs."""


@dataclass(frozen=True)
class FrequencyLexicon:
    """Words ordered by descending corpus frequency, with per-word DP costs."""

    words: tuple[str, ...]
    ranks: dict[str, int] = field(repr=False)
    costs: dict[str, float] = field(repr=False)
    max_word_len: int

    def __contains__(self, word: str) -> bool:
        return word in self.ranks

    def rank(self, word: str) -> int | None:
        return self.ranks.get(word)

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class Vocabulary:
    """Lowercase word set a well-curated header must resolve into."""

    entries: frozenset[str]
    min_word_len: int = 3

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _read_lines(source: IO[bytes] | IO[str] | Iterable[str]) -> list[str]:
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return data.splitlines()
    return [str(line).rstrip("\n") for line in source]


def load_frequency_lexicon(source: IO[bytes] | IO[str] | Iterable[str]) -> FrequencyLexicon:
    """Build a lexicon from a most-frequent-first word list.

    Non-alphabetic lines are skipped (one warning reports how many); ranks
    follow file order after skipping.  An empty result is an error.
    """
    words: list[str] = []
    ranks: dict[str, int] = {}
    costs: dict[str, float] = {}
    skipped = 0
    for raw in _read_lines(source):
        word = raw.strip().lower()
        if not word:
            continue
        if not word.isalpha():
            skipped += 1
            continue
        if word in ranks:
            skipped += 1
            continue
        ranks[word] = len(words)
        costs[word] = math.log2(len(words) + 2) * len(word)
        words.append(word)
    if skipped:
        log.warning("lexicon: skipped %d non-alphabetic or duplicate lines", skipped)
    if not words:
        raise LexiconError("frequency lexicon is empty")
    return FrequencyLexicon(
        words=tuple(words), ranks=ranks, costs=costs, max_word_len=max(len(w) for w in words)
    )


def build_vocabulary(
    wordlist: IO[bytes] | IO[str] | Iterable[str], min_word_len: int = 3
) -> Vocabulary:
    """Filter a word list down to lowercase alphabetic entries of usable length."""
    kept = set()
    for raw in _read_lines(wordlist):
        word = raw.strip().lower()
        if word and word.isalpha() and len(word) >= min_word_len:
            kept.add(word)
    if not kept:
        raise LexiconError("vocabulary is empty after filtering")
    return Vocabulary(entries=frozenset(kept), min_word_len=min_word_len)


def default_lexicon() -> FrequencyLexicon:
    with resources.files("namexpand.data").joinpath("word_frequencies.txt").open("rb") as f:
        return load_frequency_lexicon(f)


def default_vocabulary(min_word_len: int = 3) -> Vocabulary:
    with resources.files("namexpand.data").joinpath("curation_vocabulary.txt").open("rb") as f:
        return build_vocabulary(f, min_word_len)


def surface_tokens(name: str) -> TokenSeq:
    """Delimiter, case-boundary and letter/digit split only (no lexicon pass).

    Any non-alphanumeric character acts as a delimiter.  Output is lowercase.
    """
    tokens: list[str] = []
    for chunk in _ALNUM_RE.findall(name):
        tokens.extend(piece.lower() for piece in _CAMEL_RE.findall(chunk))
    return tokens


def _dp_segment(run: str, lexicon: FrequencyLexicon) -> list[str]:
    """Min-cost segmentation of a lowercase alphabetic run.

    Candidate segments are lexicon words (cost log2(rank + 2) * len) and
    single unknown characters (UNKNOWN_CHAR_COST each).  Adjacent unknown
    characters in the result are merged back into one token, so a run the
    lexicon cannot explain comes out unchanged.

    A run that is itself a lexicon word is kept whole: a known word never
    splits against itself, even when frequent short words would make a
    cheaper cover.
    """
    if run in lexicon:
        return [run]
    n = len(run)
    best = [0.0] + [math.inf] * n
    back = [0] * (n + 1)
    window = max(lexicon.max_word_len, 1)
    for i in range(1, n + 1):
        for j in range(max(0, i - window), i):
            seg = run[j:i]
            if len(seg) == 1:
                cost = lexicon.costs.get(seg, UNKNOWN_CHAR_COST)
            else:
                cost = lexicon.costs.get(seg, math.inf)
            total = best[j] + cost
            if total < best[i]:
                best[i] = total
                back[i] = j
    pieces: list[str] = []
    i = n
    while i > 0:
        j = back[i]
        pieces.append(run[j:i])
        i = j
    pieces.reverse()

    merged: list[str] = []
    for piece in pieces:
        if piece not in lexicon and merged and merged[-1] not in lexicon:
            merged[-1] += piece
        else:
            merged.append(piece)
    return merged


def split_identifier(name: str, lexicon: FrequencyLexicon) -> TokenSeq:
    """Split a header into lowercase word/digit tokens.

    Explicit delimiters and case/digit boundaries split first; remaining
    alphabetic runs go through the lexicon dynamic program.
    """
    if not name:
        raise ValueError("cannot split an empty name")
    tokens: list[str] = []
    for piece in surface_tokens(name):
        if piece.isdigit():
            tokens.append(piece)
        else:
            tokens.extend(_dp_segment(piece, lexicon))
    return tokens


# Irregular plural forms the suffix rules cannot reach.
_IRREGULAR = {
    "children": "child",
    "men": "man",
    "women": "woman",
    "people": "person",
    "feet": "foot",
    "teeth": "tooth",
    "geese": "goose",
    "mice": "mouse",
    "lives": "life",
    "wives": "wife",
    "knives": "knife",
    "leaves": "leaf",
    "halves": "half",
    "shelves": "shelf",
    "indices": "index",
    "matrices": "matrix",
    "appendices": "appendix",
    "analyses": "analysis",
    "bases": "basis",
    "crises": "crisis",
    "theses": "thesis",
    "diagnoses": "diagnosis",
    "criteria": "criterion",
    "phenomena": "phenomenon",
    "statuses": "status",
    "buses": "bus",
    "viruses": "virus",
    "campuses": "campus",
    "bonuses": "bonus",
    "censuses": "census",
    "surpluses": "surplus",
    "radiuses": "radius",
    "taxes": "tax",
    "axes": "axis",
}

# Words whose trailing "s" is not a plural marker (beyond the generic
# -ss / -us / -is guards).
_NO_STRIP = {
    "news",
    "series",
    "species",
    "lens",
    "bias",
    "alias",
    "atlas",
    "canvas",
    "chaos",
    "corps",
    "texas",
    "christmas",
    "kansas",
    "arkansas",
    "massachusetts",
}


def lemmatize(token: str) -> str:
    """Reduce a lowercase alphabetic token to a base form.

    Table-driven for irregular plurals, otherwise simple -ies / -es / -s
    suffix stripping with an exception list.  Idempotent.
    """
    if token in _IRREGULAR:
        return _IRREGULAR[token]
    if len(token) < 4 or token in _NO_STRIP:
        return token
    result = token
    if token.endswith("ies") and len(token) > 4:
        result = token[:-3] + "y"
    elif token.endswith("es") and token[:-2].endswith(("ss", "x", "z", "ch", "sh")):
        result = token[:-2]
    elif token.endswith("s") and not token.endswith(("ss", "us", "is")):
        result = token[:-1]
    return _IRREGULAR.get(result, result)


def is_logical_name(name: str, vocab: Vocabulary, lexicon: FrequencyLexicon) -> bool:
    """True when a header is well-curated: the whole name is a vocabulary
    entry, or every token is a digit run or lemmatizes into the vocabulary.
    """
    if not name or not name.strip():
        return False
    if name.strip().lower() in vocab:
        return True
    tokens = split_identifier(name, lexicon)
    if not tokens:
        return False
    for token in tokens:
        if token.isdigit():
            continue
        if lemmatize(token) not in vocab:
            return False
    return True
