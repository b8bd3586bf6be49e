"""Probabilistic abbreviation of well-curated column headers.

Each header draws one method (keep / lookup / rule), one rule, a character
budget k and a combining case style; the drawn rule applies to every word of
the header.  Acronym phrase replacement, four-digit-year shortening, optional
word removal and year-to-front reordering run around the per-word pass, and a
per-table cache keeps repeated words abbreviated the same way throughout a
table.  Every generated name carries a trace that replays to the exact
output.
"""

from __future__ import annotations

import hashlib
import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from enum import Enum
from importlib import resources
from itertools import groupby
from typing import IO, Any, Iterable, Sequence

from .corpus import Table
from .segment import FrequencyLexicon, TokenSeq, Vocabulary, is_logical_name, split_identifier

log = logging.getLogger(__name__)

VOWELS = frozenset("aeiou")

# Words the optional removal step may drop from a header.
DROP_WORDS = frozenset({"name", "code", "value", "id"})

_YEAR_RE = re.compile(r"^[12][0-9]{3}$")


class Method(str, Enum):
    KEEP = "keep"
    LOOKUP = "lookup"
    RULE = "rule"


class Rule(str, Enum):
    RULE1 = "rule1"
    RULE2 = "rule2"
    RULE3 = "rule3"


class CaseStyle(str, Enum):
    CAMEL = "camel"
    PASCAL = "pascal"
    SNAKE = "snake"
    SIMPLE = "simple"


class SnakeMode(str, Enum):
    UPPER = "upper"
    LOWER = "lower"
    AS_PRODUCED = "as_produced"


class DictError(ValueError):
    """Raised for malformed lookup or acronym dictionary files."""


@dataclass(frozen=True)
class FabricationConfig:
    """All weights, thresholds and paths steering abbreviation generation."""

    p_method: tuple[float, float, float] = (0.3, 0.6, 0.1)
    p_rule: tuple[float, float, float] = (0.2, 0.4, 0.4)
    k_range: tuple[int, int] = (1, 5)
    p_acronym: float = 0.5
    p_year_shorten: float = 0.5
    p_case: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    p_word_removal: float = 0.05
    p_reorder_year_front: float = 0.05
    seed: int = 0
    lookup_path: str | None = None
    acronym_path: str | None = None

    def __post_init__(self) -> None:
        for name, weights in (("p_method", self.p_method), ("p_rule", self.p_rule), ("p_case", self.p_case)):
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValueError(f"{name} weights must sum to 1, got {weights}")
            if any(w < 0 or w > 1 for w in weights):
                raise ValueError(f"{name} weights must lie in [0, 1], got {weights}")
        lo, hi = self.k_range
        if not (1 <= lo <= hi <= 5):
            raise ValueError(f"k_range must be within [1, 5], got {self.k_range}")
        for name in ("p_acronym", "p_year_shorten", "p_word_removal", "p_reorder_year_front"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "FabricationConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        coerced = dict(raw)
        for key in ("p_method", "p_rule", "p_case", "k_range"):
            if key in coerced:
                coerced[key] = tuple(coerced[key])
        return cls(**coerced)

    def to_dict(self) -> dict[str, Any]:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class LookupDict:
    """Word -> candidate abbreviations (Method 2 source)."""

    map: dict[str, list[str]]

    def __contains__(self, word: str) -> bool:
        return word in self.map

    def __len__(self) -> int:
        return len(self.map)


@dataclass(frozen=True)
class AcronymDict:
    """Multi-word phrase -> acronym."""

    map: dict[str, str]
    max_phrase_words: int

    def __len__(self) -> int:
        return len(self.map)


def load_lookup_dict(source: IO[bytes] | IO[str] | Iterable[str]) -> LookupDict:
    """Parse a "word<TAB>abbr1|abbr2|..." file."""
    mapping: dict[str, list[str]] = {}
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            word, cands = line.split("\t")
        except ValueError:
            raise DictError(f"lookup line {lineno}: expected 'word<TAB>abbrs', got {line!r}")
        word = word.strip()
        candidates = [c.strip() for c in cands.split("|") if c.strip()]
        if word != word.lower():
            raise DictError(f"lookup line {lineno}: key must be lowercase: {word!r}")
        if not candidates:
            raise DictError(f"lookup line {lineno}: no candidates for {word!r}")
        for cand in candidates:
            if cand.isalpha() and len(cand) > len(word):
                raise DictError(
                    f"lookup line {lineno}: candidate {cand!r} longer than key {word!r}"
                )
        mapping[word] = candidates
    if not mapping:
        raise DictError("lookup dictionary is empty")
    return LookupDict(map=mapping)


def load_acronym_dict(source: IO[bytes] | IO[str] | Iterable[str]) -> AcronymDict:
    """Parse a "phrase<TAB>acronym" file; keys are >= 2-word phrases."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            phrase, acronym = line.split("\t")
        except ValueError:
            raise DictError(f"acronym line {lineno}: expected 'phrase<TAB>acronym', got {line!r}")
        phrase, acronym = phrase.strip(), acronym.strip()
        if len(phrase.split()) < 2 or phrase != phrase.lower():
            raise DictError(f"acronym line {lineno}: key must be a lowercase multi-word phrase")
        if not acronym.isalpha():
            raise DictError(f"acronym line {lineno}: acronym must be alphabetic: {acronym!r}")
        mapping[phrase] = acronym
    if not mapping:
        raise DictError("acronym dictionary is empty")
    max_words = max(len(p.split()) for p in mapping)
    return AcronymDict(map=mapping, max_phrase_words=max_words)


def _iter_lines(source: IO[bytes] | IO[str] | Iterable[str]) -> Iterable[str]:
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return data.splitlines()
    return source


def default_lookup_dict() -> LookupDict:
    with resources.files("namexpand.data").joinpath("abbreviation_lookup.tsv").open("rb") as f:
        return load_lookup_dict(f)


def default_acronym_dict() -> AcronymDict:
    with resources.files("namexpand.data").joinpath("acronym_phrases.tsv").open("rb") as f:
        return load_acronym_dict(f)


def select_method(rng: random.Random, p_method: Sequence[float]) -> Method:
    return rng.choices(list(Method), weights=p_method, k=1)[0]


def select_rule(rng: random.Random, p_rule: Sequence[float]) -> Rule:
    return rng.choices(list(Rule), weights=p_rule, k=1)[0]


def rule1_prefix(word: str, k: int) -> str:
    """Keep the first k characters."""
    return word[:k]


def rule2_vowel_drop(word: str, k: int) -> str:
    """Drop non-leading vowels, rightmost first, until length <= k or none remain."""
    chars = list(word)
    while len(chars) > k:
        idx = next((i for i in range(len(chars) - 1, 0, -1) if chars[i] in VOWELS), None)
        if idx is None:
            break
        del chars[idx]
    return "".join(chars)


def collapse_duplicates(word: str) -> str:
    """Collapse runs of the same character to a single occurrence."""
    return "".join(ch for ch, _ in groupby(word))


def rule3_random_drop(word: str, k: int, rng: random.Random) -> str:
    """Collapse duplicate neighbours, then randomly drop non-leading vowels and
    finally non-leading consonants while the string is longer than k.

    The leading character is never removed.
    """
    chars = list(collapse_duplicates(word))
    for removable in (
        lambda c: c in VOWELS,
        lambda c: c not in VOWELS,
    ):
        while len(chars) > k:
            candidates = [i for i in range(1, len(chars)) if removable(chars[i])]
            if not candidates:
                break
            del chars[rng.choice(candidates)]
    return "".join(chars)


def lookup_abbreviation(word: str, lookup: LookupDict, rng: random.Random) -> str | None:
    """A uniformly random candidate for a known word, else None."""
    candidates = lookup.map.get(word)
    if not candidates:
        return None
    return rng.choice(candidates)


def shorten_year(token: str, rng: random.Random, p_year_shorten: float) -> str:
    """Shorten a four-digit year in [1000, 2999] to its last two digits with
    probability p_year_shorten."""
    if _YEAR_RE.match(token) and rng.random() < p_year_shorten:
        return token[2:]
    return token


def acronym_extract(
    tokens: TokenSeq, acronyms: AcronymDict, rng: random.Random, p_acronym: float
) -> tuple[TokenSeq, list[dict[str, Any]]]:
    """Replace longest-match dictionary phrases with their acronyms.

    Fires once per header with probability p_acronym; hits report the phrase,
    the acronym and the position in the output token list so later stages can
    leave replaced spans untouched.
    """
    if rng.random() >= p_acronym:
        return list(tokens), []
    out: list[str] = []
    hits: list[dict[str, Any]] = []
    i = 0
    while i < len(tokens):
        matched = False
        max_len = min(acronyms.max_phrase_words, len(tokens) - i)
        for length in range(max_len, 1, -1):
            phrase = " ".join(tokens[i : i + length])
            acronym = acronyms.map.get(phrase)
            if acronym is not None:
                hits.append({"phrase": phrase, "acronym": acronym, "index": len(out)})
                out.append(acronym)
                i += length
                matched = True
                break
        if not matched:
            out.append(tokens[i])
            i += 1
    return out, hits


def _capitalize(word: str) -> str:
    return word[:1].upper() + word[1:]


def combine(
    words: Sequence[str], style: CaseStyle, snake_mode: SnakeMode = SnakeMode.AS_PRODUCED
) -> str:
    """Concatenate abbreviated words in one of the four naming styles."""
    if not words:
        raise ValueError("cannot combine an empty word list")
    if style is CaseStyle.CAMEL:
        return words[0].lower() + "".join(_capitalize(w) for w in words[1:])
    if style is CaseStyle.PASCAL:
        return "".join(_capitalize(w) for w in words)
    if style is CaseStyle.SNAKE:
        joined = "_".join(words)
        if snake_mode is SnakeMode.UPPER:
            return joined.upper()
        if snake_mode is SnakeMode.LOWER:
            return joined.lower()
        return joined
    return "".join(w.lower() for w in words)


def abbreviate_header(
    tokens: TokenSeq,
    config: FabricationConfig,
    lookup: LookupDict,
    acronyms: AcronymDict,
    table_cache: dict[str, str],
    rng: random.Random,
    *,
    method: Method | None = None,
    rule: Rule | None = None,
    k: int | None = None,
    style: CaseStyle | None = None,
    snake_mode: SnakeMode | None = None,
) -> tuple[str, dict[str, Any]]:
    """Abbreviate one tokenized header, returning the name and its trace.

    Method, rule, k, case style and snake casing are drawn once per header;
    keyword arguments pin any of them for fully deterministic output.  The
    trace records every draw and per-word mapping; replay_trace() turns it
    back into the exact query name.
    """
    if not tokens:
        raise ValueError("cannot abbreviate an empty token list")

    if method is None:
        method = select_method(rng, config.p_method)
    if rule is None:
        rule = select_rule(rng, config.p_rule)
    if k is None:
        k = rng.randint(*config.k_range)
    if style is None:
        style = rng.choices(list(CaseStyle), weights=config.p_case, k=1)[0]
    if snake_mode is None and style is CaseStyle.SNAKE:
        snake_mode = rng.choice(list(SnakeMode))
    if style is not CaseStyle.SNAKE:
        snake_mode = None

    worked, acronym_hits = acronym_extract(tokens, acronyms, rng, config.p_acronym)
    immutable = {hit["index"] for hit in acronym_hits}

    rule_fns = {
        Rule.RULE1: lambda w: rule1_prefix(w, k),
        Rule.RULE2: lambda w: rule2_vowel_drop(w, k),
        Rule.RULE3: lambda w: rule3_random_drop(w, k, rng),
    }
    apply_rule = rule_fns[rule]

    words: list[dict[str, Any]] = []
    for idx, word in enumerate(worked):
        if idx in immutable:
            words.append({"source": word, "output": word, "via": "acronym"})
            continue
        if word in table_cache:
            words.append({"source": word, "output": table_cache[word], "via": "cache"})
            continue
        if not word.isalpha():
            output = shorten_year(word, rng, config.p_year_shorten)
            via = "year" if output != word else "keep"
        elif method is Method.KEEP:
            output, via = word, "keep"
        elif method is Method.LOOKUP:
            candidate = lookup_abbreviation(word, lookup, rng)
            if candidate is None:
                output, via = apply_rule(word), "rule"
            else:
                output, via = candidate, "lookup"
        else:
            output, via = apply_rule(word), "rule"
        table_cache[word] = output
        words.append({"source": word, "output": output, "via": via})

    removed: list[int] = []
    if len(words) > 1 and rng.random() < config.p_word_removal:
        droppable = [
            i
            for i, w in enumerate(words)
            if w["via"] != "acronym" and w["source"] in DROP_WORDS
        ]
        if droppable:
            removed = [droppable[-1]]

    outputs = [w["output"] for i, w in enumerate(words) if i not in removed]
    year_to_front = False
    if (
        len(outputs) > 1
        and outputs[-1].isdigit()
        and not outputs[0].isdigit()
        and rng.random() < config.p_reorder_year_front
    ):
        outputs = [outputs[-1]] + outputs[:-1]
        year_to_front = True

    query_name = combine(outputs, style, snake_mode or SnakeMode.AS_PRODUCED)
    trace = {
        "method": method.value,
        "rule": rule.value,
        "k": k,
        "style": style.value,
        "snake_mode": snake_mode.value if snake_mode else None,
        "acronyms": acronym_hits,
        "words": words,
        "removed": removed,
        "year_to_front": year_to_front,
    }
    return query_name, trace


def replay_trace(trace: dict[str, Any]) -> str:
    """Rebuild the query name recorded in a trace."""
    removed = set(trace["removed"])
    outputs = [w["output"] for i, w in enumerate(trace["words"]) if i not in removed]
    if trace["year_to_front"]:
        outputs = [outputs[-1]] + outputs[:-1]
    snake_mode = SnakeMode(trace["snake_mode"]) if trace["snake_mode"] else SnakeMode.AS_PRODUCED
    return combine(outputs, CaseStyle(trace["style"]), snake_mode)


@dataclass
class NamePair:
    """One fabricated example: abbreviated query name x and gold logical name y."""

    table_id: str
    column_index: int
    query_name: str
    logical_name: str
    trace: dict[str, Any] = field(default_factory=dict)
    difficulty: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "table_id": self.table_id,
            "column_index": self.column_index,
            "query_name": self.query_name,
            "logical_name": self.logical_name,
            "trace": self.trace,
        }
        if self.difficulty is not None:
            out["difficulty"] = self.difficulty
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "NamePair":
        return cls(
            table_id=raw["table_id"],
            column_index=raw["column_index"],
            query_name=raw["query_name"],
            logical_name=raw["logical_name"],
            trace=raw.get("trace", {}),
            difficulty=raw.get("difficulty"),
        )


def table_rng_seed(seed: int, table_id: str) -> int:
    """Stable 64-bit per-table seed so fabrication order cannot matter."""
    digest = hashlib.blake2b(f"{seed}\x1f{table_id}".encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def _fabricate_table(
    table: Table,
    config: FabricationConfig,
    vocab: Vocabulary,
    lexicon: FrequencyLexicon,
    lookup: LookupDict,
    acronyms: AcronymDict,
) -> list[NamePair]:
    rng = random.Random(table_rng_seed(config.seed, table.id))
    cache: dict[str, str] = {}
    pairs: list[NamePair] = []
    for idx, header in enumerate(table.headers):
        if not header or not is_logical_name(header, vocab, lexicon):
            continue
        tokens = split_identifier(header, lexicon)
        if all(t.isdigit() for t in tokens):
            # a gold with no alphabetic content has nothing to expand and no
            # defined difficulty, so it cannot serve as an example
            continue
        query_name, trace = abbreviate_header(tokens, config, lookup, acronyms, cache, rng)
        pairs.append(NamePair(table.id, idx, query_name, header, trace))
    return pairs


def fabricate_corpus(
    tables: Sequence[Table],
    config: FabricationConfig,
    vocab: Vocabulary,
    lexicon: FrequencyLexicon,
    lookup: LookupDict | None = None,
    acronyms: AcronymDict | None = None,
    workers: int = 1,
) -> list[NamePair]:
    """Turn curated headers of already-filtered tables into (x, y) pairs.

    Headers that fail curation are skipped.  Each table gets its own RNG
    derived from (seed, table id), so output is identical no matter the
    processing order or worker count; results are canonically sorted by
    (table id, column index).
    """
    if lookup is None:
        lookup = _load_lookup(config)
    if acronyms is None:
        acronyms = _load_acronyms(config)

    def work(table: Table) -> list[NamePair]:
        return _fabricate_table(table, config, vocab, lexicon, lookup, acronyms)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_table = list(pool.map(work, tables))
    else:
        per_table = [work(t) for t in tables]

    pairs = [pair for chunk in per_table for pair in chunk]
    pairs.sort(key=lambda p: (p.table_id, p.column_index))
    skipped = sum(len(t.headers) for t in tables) - len(pairs)
    if skipped:
        log.info("fabricate: skipped %d headers that failed curation", skipped)
    return pairs


def _load_lookup(config: FabricationConfig) -> LookupDict:
    if config.lookup_path:
        with open(config.lookup_path, "rb") as f:
            return load_lookup_dict(f)
    return default_lookup_dict()


def _load_acronyms(config: FabricationConfig) -> AcronymDict:
    if config.acronym_path:
        with open(config.acronym_path, "rb") as f:
            return load_acronym_dict(f)
    return default_acronym_dict()
