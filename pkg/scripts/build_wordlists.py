#!/usr/bin/env python3
"""Regenerate the packaged word-frequency lexicon and curation vocabulary.

Raw inputs (not committed) come from three npm data packages:

    npm pack norvig-frequencies word-list subtlex-word-frequencies

* norvig-frequencies: ~97k English words in descending web-corpus frequency
  (Peter Norvig's Google unigram counts) -> basis of the segmenter lexicon.
* word-list: SCOWL-derived dictionary of ~274k English words -> membership
  filter for the curation vocabulary.
* subtlex-word-frequencies: SUBTLEX-US word counts -> secondary frequency
  signal so everyday words missed by the web list still enter the vocabulary.

Usage:
    python scripts/build_wordlists.py RAW_DIR OUT_DIR

where RAW_DIR contains norvig/lib/data.js, wordlist/words.txt and
subtlex/index.json as extracted from the tarballs above, and OUT_DIR is
normally src/namexpand/data.
"""

import json
import sys
from pathlib import Path

LEXICON_SIZE = 64_000
NORVIG_VOCAB_CUTOFF = 60_000
SUBTLEX_VOCAB_CUTOFF = 40_000
MIN_VOCAB_LEN = 3

# Database-style shorthand that happens to be (or collide with) dictionary
# words.  Keeping these out of the curation vocabulary stops abbreviated
# headers from being mistaken for well-curated ones.
VOCAB_BLOCKLIST = {
    "abbr", "abbrev", "acct", "accts", "addl", "addr", "adj", "admin", "agg",
    "alt", "amt", "amts", "ann", "apr", "apt", "assn", "asst", "attn", "aug",
    "auth", "avg", "bal", "bals", "bld", "bldg", "blvd", "calc", "cert",
    "chg", "chk", "cmd", "cnt", "cnty", "comm", "config", "coord", "corp",
    "cpu", "ctr", "ctrl", "cum", "cur", "curr", "cust", "dbl", "dec", "defn",
    "del", "dept", "desc", "dev", "diff", "dir", "dist", "div", "dln", "dob",
    "doc", "docs", "dwn", "elem", "emp", "env", "eqn", "est", "exec", "exp",
    "ext", "feb", "fig", "figs", "freq", "fri", "func", "gen", "gov", "govt",
    "gpa", "gps", "hosp", "hwy", "impl", "inc", "ind", "info", "init", "ins",
    "inst", "intl", "inv", "jan", "jul", "jun", "lang", "lat", "lbs", "lib",
    "loc", "lon", "ltd", "max", "med", "mfg", "mfr", "mgmt", "mgr", "mgrs",
    "min", "mins", "misc", "mon", "mph", "msg", "msgs", "mtg", "mtge", "nat",
    "nbr", "nov", "num", "nums", "obj", "oct", "ord", "org", "orig", "param",
    "pct", "perf", "pkg", "pos", "pref", "prev", "prim", "proc", "prod",
    "prof", "proj", "pts", "qtr", "qty", "rec", "recs", "ref", "refs", "reg",
    "rep", "reps", "req", "rev", "rpt", "rte", "sched", "sec", "secs", "sep",
    "sept", "seq", "spec", "specs", "sql", "sqft", "src", "ssn", "stat",
    "stats", "std", "str", "sts", "sub", "subj", "svc", "sys", "tech",
    "tel", "temp", "thu", "thur", "thurs", "tot", "tue", "tues", "txn",
    "uid", "univ", "upd", "util", "utils", "val", "vals", "var", "vars",
    "veh", "ver", "vol", "vols", "wed", "wkly", "xml", "yds", "yr", "yrs",
}


def load_norvig(path: Path) -> list[str]:
    js = path.read_text()
    start = js.index('module.exports = "') + len('module.exports = "')
    end = js.rindex('"')
    return [w.lower() for w in js[start:end].split("\\n")]


def load_subtlex(path: Path) -> list[str]:
    entries = json.loads(path.read_text())
    return [e["word"].lower() for e in entries]


def build_lexicon(norvig: list[str], scowl: set[str]) -> list[str]:
    # The raw web-corpus list is full of frequent non-word tokens ("sa", "tp",
    # country codes) that shred real words under a per-character cost model;
    # keeping only dictionary words of length >= 3 removes them.  Short
    # function words re-emerge from unknown-run merging during segmentation.
    out, seen = [], set()
    for w in norvig:
        if len(w) < 3 or not w.isalpha() or not w.isascii() or w in seen or w not in scowl:
            continue
        seen.add(w)
        out.append(w)
        if len(out) >= LEXICON_SIZE:
            break
    return out


def build_vocabulary(scowl: list[str], norvig: list[str], subtlex: list[str]) -> list[str]:
    frequent = set(norvig[:NORVIG_VOCAB_CUTOFF]) | set(subtlex[:SUBTLEX_VOCAB_CUTOFF])
    vocab = sorted(
        w
        for w in set(scowl)
        if len(w) >= MIN_VOCAB_LEN
        and w.isalpha()
        and w.isascii()
        and w in frequent
        and w not in VOCAB_BLOCKLIST
    )
    return vocab


def main() -> None:
    raw_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    norvig = load_norvig(raw_dir / "norvig" / "lib" / "data.js")
    subtlex = load_subtlex(raw_dir / "subtlex" / "index.json")
    scowl = [w.strip().lower() for w in (raw_dir / "wordlist" / "words.txt").read_text().splitlines() if w.strip()]

    lexicon = build_lexicon(norvig, set(scowl))
    vocab = build_vocabulary(scowl, norvig, subtlex)

    (out_dir / "word_frequencies.txt").write_text("\n".join(lexicon) + "\n")
    (out_dir / "curation_vocabulary.txt").write_text("\n".join(vocab) + "\n")
    print(f"lexicon: {len(lexicon)} words, vocabulary: {len(vocab)} words")


if __name__ == "__main__":
    main()
