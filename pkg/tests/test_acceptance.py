"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line (visible with -s or in failure reports)."""

import json
import random
import time
from collections import Counter
from contextlib import contextmanager
import pytest

from helpers import brute_em, brute_f1, write_corpus
from namexpand.abbrev import (
    CaseStyle,
    FabricationConfig,
    Method,
    Rule,
    SnakeMode,
    abbreviate_header,
    collapse_duplicates,
    fabricate_corpus,
    replay_trace,
    rule3_random_drop,
    shorten_year,
)
from namexpand.cli import main, read_pairs_jsonl
from namexpand.corpus import Table
from namexpand.difficulty import (
    DifficultyLevel,
    calibrate_thresholds,
    classify,
    normalized_distance,
)
from namexpand.metrics import exact_match, token_f1
from namexpand.promptkit import (
    DEMONSTRATION,
    build_inference_prompt,
    build_training_prompt,
    extract_answers,
    linearize_context,
)
from namexpand.segment import split_identifier


@contextmanager
def criterion(number, description):
    try:
        yield
    except BaseException:
        print(f"CRITERION {number} [FAIL] {description}")
        raise
    print(f"CRITERION {number} [PASS] {description}")


def run_cli(args):
    return main([str(a) for a in args])


def is_subsequence(short, long):
    it = iter(long)
    return all(ch in it for ch in short)


def test_criterion_1_golden_abbreviation_examples(lexicon, lookup, acronyms):
    cases = [
        # (header, expected, forced draws, probability forcing)
        ("abbreviation", "abbr",
         dict(method=Method.RULE, rule=Rule.RULE1, k=4, style=CaseStyle.SIMPLE), {}),
        ("abbreviation", "abbrvtn",
         dict(method=Method.RULE, rule=Rule.RULE2, k=5, style=CaseStyle.SIMPLE), {}),
        ("doodle", "doodl",
         dict(method=Method.RULE, rule=Rule.RULE2, k=5, style=CaseStyle.SIMPLE), {}),
        ("Current Balance", "CUR_BAL",
         dict(method=Method.RULE, rule=Rule.RULE1, k=3,
              style=CaseStyle.SNAKE, snake_mode=SnakeMode.UPPER), {}),
        ("Fiscal Year 2021", "FY_2021",
         dict(method=Method.KEEP, style=CaseStyle.SNAKE, snake_mode=SnakeMode.UPPER),
         dict(p_acronym=1.0)),
        ("Zip Code", "Zip",
         dict(method=Method.KEEP, style=CaseStyle.PASCAL), dict(p_word_removal=1.0)),
        ("Birth Rate 2018", "2018_BR",
         dict(method=Method.KEEP, style=CaseStyle.SNAKE, snake_mode=SnakeMode.UPPER),
         dict(p_acronym=1.0, p_reorder_year_front=1.0)),
        ("Employee Date of Birth", "EMP_DOB",
         dict(method=Method.RULE, rule=Rule.RULE1, k=3,
              style=CaseStyle.SNAKE, snake_mode=SnakeMode.UPPER),
         dict(p_acronym=1.0)),
        ("Event Name", "Evnt",
         dict(method=Method.RULE, rule=Rule.RULE2, k=4, style=CaseStyle.PASCAL),
         dict(p_word_removal=1.0)),
        ("Mailing Address District 2013", "2013MailAddrDist",
         dict(method=Method.RULE, rule=Rule.RULE1, k=4, style=CaseStyle.PASCAL),
         dict(p_reorder_year_front=1.0)),
    ]
    with criterion(1, "golden abbreviation examples reproduce exactly in < 1 s"):
        start = time.monotonic()
        for header, expected, forced, probs in cases:
            config_kw = dict(
                p_acronym=0.0, p_year_shorten=0.0, p_word_removal=0.0,
                p_reorder_year_front=0.0,
            )
            config_kw.update(probs)
            tokens = split_identifier(header, lexicon)
            got, trace = abbreviate_header(
                tokens, FabricationConfig(**config_kw), lookup, acronyms, {},
                random.Random(0), **forced,
            )
            assert got == expected, f"{header!r}: got {got!r}, want {expected!r}"
            assert replay_trace(trace) == expected
        assert shorten_year("2020", random.Random(0), 1.0) == "20"
        elapsed = time.monotonic() - start
        assert elapsed < 1.0, f"golden examples took {elapsed:.2f}s"


def test_criterion_2_rule3_property_suite():
    with criterion(2, "rule 3 property suite: 10,000 random (word, k, seed), zero violations"):
        rng = random.Random(20240901)
        violations = 0
        for _ in range(10_000):
            length = rng.randint(1, 16)
            word = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(length))
            k = rng.randint(1, 5)
            out = rule3_random_drop(word, k, random.Random(rng.getrandbits(64)))
            collapsed = collapse_duplicates(word)
            starts_ok = out[0] == word[0]
            subseq_ok = is_subsequence(out, collapsed)
            # loop exit: at or under the budget, or only the protected leading
            # character left to remove
            exit_ok = len(out) <= k or len(out) == 1
            if not (starts_ok and subseq_ok and exit_ok):
                violations += 1
        assert violations == 0


def test_criterion_3_probability_calibration(lexicon, vocab, lookup, acronyms):
    with criterion(3, "draw frequencies over 100,000 headers match configured weights"):
        start = time.monotonic()
        words = [w for w in sorted(vocab.entries)[::97] if 3 <= len(w) <= 12][:400]
        rng = random.Random(0)
        tables = [
            Table(
                id=f"t{t:03d}",
                headers=[rng.choice(words).capitalize() for _ in range(500)],
                cells=[["x"] * 500 for _ in range(5)],
            )
            for t in range(200)
        ]
        pairs = fabricate_corpus(tables, FabricationConfig(seed=5), vocab, lexicon, lookup, acronyms)
        n = len(pairs)
        assert n == 100_000
        methods = Counter(p.trace["method"] for p in pairs)
        rules = Counter(p.trace["rule"] for p in pairs)
        styles = Counter(p.trace["style"] for p in pairs)
        for name, weight in zip(("keep", "lookup", "rule"), (0.3, 0.6, 0.1)):
            assert abs(methods[name] / n - weight) < 0.015, (name, methods[name] / n)
        for name, weight in zip(("rule1", "rule2", "rule3"), (0.2, 0.4, 0.4)):
            assert abs(rules[name] / n - weight) < 0.02, (name, rules[name] / n)
        for name in ("camel", "pascal", "snake", "simple"):
            assert abs(styles[name] / n - 0.25) < 0.02, (name, styles[name] / n)
        # chi-square against the configured weights (critical values at p=0.01)
        chi_m = sum(
            (methods[name] - n * w) ** 2 / (n * w)
            for name, w in zip(("keep", "lookup", "rule"), (0.3, 0.6, 0.1))
        )
        assert chi_m < 9.21  # df=2
        chi_r = sum(
            (rules[name] - n * w) ** 2 / (n * w)
            for name, w in zip(("rule1", "rule2", "rule3"), (0.2, 0.4, 0.4))
        )
        assert chi_r < 9.21  # df=2
        chi_c = sum(
            (styles[name] - n * 0.25) ** 2 / (n * 0.25)
            for name in ("camel", "pascal", "snake", "simple")
        )
        assert chi_c < 11.345  # df=3
        elapsed = time.monotonic() - start
        assert elapsed < 120, f"calibration run took {elapsed:.1f}s"


def test_criterion_4_fabricate_determinism(tmp_path):
    with criterion(4, "fabricate is byte-deterministic and parallel == serial"):
        csv_dir = write_corpus(tmp_path, n_tables=10, n_cols=8, seed=3)
        tables = tmp_path / "tables.jsonl"
        assert run_cli(["ingest", "--csv-dir", csv_dir, "--out", tables]) == 0
        outs = [tmp_path / f"pairs{i}.jsonl" for i in range(3)]
        assert run_cli(["fabricate", "--tables", tables, "--seed", 77, "--out", outs[0]]) == 0
        assert run_cli(["fabricate", "--tables", tables, "--seed", 77, "--out", outs[1]]) == 0
        assert run_cli(["fabricate", "--tables", tables, "--seed", 77, "--out", outs[2],
                        "--workers", 8]) == 0
        first = outs[0].read_bytes()
        assert first == outs[1].read_bytes()
        assert first == outs[2].read_bytes()
        assert len(first) > 0


def test_criterion_5_metrics_oracle_equivalence():
    with criterion(5, "EM/F1 agree with brute-force scorer on 1,000 pairs; F1 worked value 0.8"):
        assert token_f1("customer name", "customer full name") == pytest.approx(0.8, abs=0)
        assert brute_f1("customer name", "customer full name") == pytest.approx(0.8, abs=0)
        rng = random.Random(4242)
        vocab_words = [
            "customer", "name", "total", "fiscal", "year", "the", "an", "no.",
            "2021", "Zip-Code", "balance", "X", "", "district",
        ]
        for _ in range(1000):
            pred = " ".join(rng.choice(vocab_words) for _ in range(rng.randint(0, 5)))
            gold = " ".join(rng.choice(vocab_words) for _ in range(rng.randint(1, 5)))
            assert abs(token_f1(pred, gold) - brute_f1(pred, gold)) <= 1e-9
            assert exact_match(pred, gold) == brute_em(pred, gold)


def test_criterion_6_prompt_byte_exactness():
    with criterion(6, "prompt templates and demonstration are byte-exact"):
        table = Table(
            id="t1",
            headers=["Customer Name", "Product Code"],
            cells=[["Alice", "7"], ["Bob", "9"]],
        )
        context = linearize_context(table, [0, 1], 2, names=["c_name", "pCd"])
        assert context == (
            "Column names: c_name, pCd <SEP> row 1: Alice, 7 <SEP> row 2: Bob, 9"
        )
        train = build_training_prompt(context, ["c_name", "pCd"], ["Customer Name", "Product Code"])
        assert train == (
            "Column names: c_name, pCd <SEP> row 1: Alice, 7 <SEP> row 2: Bob, 9\n"
            "As abbreviations of column names from a table, "
            "c_name | pCd stand for Customer Name | Product Code."
        )
        infer = build_inference_prompt(context, ["c_name", "pCd"], with_demo=True)
        assert infer == (
            "As abbreviations of column names from a table, "
            "c_name | pCd | dt stand for Customer Name | Product Code | Date.\n"
            "Column names: c_name, pCd <SEP> row 1: Alice, 7 <SEP> row 2: Bob, 9\n"
            "As abbreviations of column names from a table, c_name | pCd stand for"
        )
        demo_tail = DEMONSTRATION.split(" stand for ", 1)[1]
        assert extract_answers(demo_tail, 3) == ["Customer Name", "Product Code", "Date"]


def test_criterion_7_end_to_end_offline_eval(tmp_path):
    with criterion(7, "oracle stub scores EM=F1=100.0; identity stub matches the independent fraction"):
        csv_dir = write_corpus(tmp_path, n_tables=8, n_cols=8, seed=11)
        tables = tmp_path / "tables.jsonl"
        pairs = tmp_path / "pairs.jsonl"
        prompts = tmp_path / "prompts.jsonl"
        assert run_cli(["ingest", "--csv-dir", csv_dir, "--out", tables]) == 0
        assert run_cli(["fabricate", "--tables", tables, "--seed", 21, "--out", pairs]) == 0
        assert run_cli(["classify-difficulty", "--pairs", pairs]) == 0
        assert run_cli(["prompts", "--pairs", pairs, "--tables", tables, "--mode", "infer",
                        "--demo", "--out", prompts]) == 0

        oracle_preds, oracle_report = tmp_path / "po.jsonl", tmp_path / "ro.json"
        assert run_cli(["infer", "--prompts", prompts, "--stub", "oracle", "--out", oracle_preds]) == 0
        assert run_cli(["score", "--pairs", pairs, "--preds", oracle_preds, "--out", oracle_report]) == 0
        scored = json.loads(oracle_report.read_text())
        assert scored["extracted_only"]["overall"]["em"] == 1.0
        assert scored["extracted_only"]["overall"]["f1"] == 1.0
        assert scored["all_records"]["overall"]["em"] == 1.0

        ident_preds, ident_report = tmp_path / "pi.jsonl", tmp_path / "ri.json"
        assert run_cli(["infer", "--prompts", prompts, "--stub", "identity", "--out", ident_preds]) == 0
        assert run_cli(["score", "--pairs", pairs, "--preds", ident_preds, "--out", ident_report]) == 0
        scored = json.loads(ident_report.read_text())
        assert scored["extraction_rate"] == 1.0
        loaded = read_pairs_jsonl(pairs)
        expected_em = sum(
            brute_em(p.query_name, p.logical_name) for p in loaded
        ) / len(loaded)
        assert abs(scored["extracted_only"]["overall"]["em"] * 100 - expected_em * 100) <= 0.1


def test_criterion_8_difficulty_behavior(lexicon, vocab, lookup, acronyms):
    with criterion(8, "classify(x,x)=Easy, monotone under corruption, calibration hits targets"):
        words = [w for w in sorted(vocab.entries)[::53] if 3 <= len(w) <= 12][:400]
        rng = random.Random(31)
        tables = [
            Table(
                id=f"c{t:03d}",
                headers=[
                    " ".join(rng.choice(words).capitalize() for _ in range(rng.randint(2, 3)))
                    for _ in range(48)
                ],
                cells=[["x"] * 48 for _ in range(5)],
            )
            for t in range(250)
        ]
        config = FabricationConfig(seed=9, p_method=(0.0, 0.6, 0.4))
        pairs = fabricate_corpus(tables, config, vocab, lexicon, lookup, acronyms)
        assert len(pairs) >= 10_000

        for pair in pairs[:2000]:
            assert classify(pair.query_name, pair.query_name) is DifficultyLevel.EASY

        # corruption appends letters absent from the gold, in normalized form,
        # so each edit grows the distance by exactly one
        corrupt_rng = random.Random(17)
        from namexpand.difficulty import normalize_for_distance

        for _ in range(1000):
            pair = pairs[corrupt_rng.randrange(len(pairs))]
            gold = pair.logical_name
            alphabet = [c for c in "qzxjvwk" if c not in normalize_for_distance(gold)]
            assert alphabet
            query = normalize_for_distance(pair.query_name)
            last = classify(query, gold)
            for _ in range(corrupt_rng.randint(1, 4)):
                query += corrupt_rng.choice(alphabet)
                level = classify(query, gold)
                assert level >= last
                last = level

        targets = (0.11, 0.39, 0.40, 0.10)
        distances = [normalized_distance(p.query_name, p.logical_name) for p in pairs]
        fitted = calibrate_thresholds(distances, targets)
        buckets = Counter(
            classify(p.query_name, p.logical_name, fitted) for p in pairs
        )
        for level, target in zip(DifficultyLevel, targets):
            achieved = buckets[level] / len(pairs)
            assert abs(achieved - target) < 0.01, (level.name, achieved, target)


def test_criterion_9_report_schema(tmp_path, capsys):
    with criterion(9, "report renders the overall + four-level EM/F1 structure, q vs t'+q"):
        csv_dir = write_corpus(tmp_path, n_tables=5, n_cols=6, seed=29)
        tables, pairs, prompts = (tmp_path / n for n in ("t.jsonl", "p.jsonl", "b.jsonl"))
        preds_q, preds_tq = tmp_path / "pq.jsonl", tmp_path / "ptq.jsonl"
        out = tmp_path / "report.txt"
        assert run_cli(["ingest", "--csv-dir", csv_dir, "--out", tables]) == 0
        assert run_cli(["fabricate", "--tables", tables, "--seed", 2, "--out", pairs]) == 0
        assert run_cli(["classify-difficulty", "--pairs", pairs]) == 0
        assert run_cli(["prompts", "--pairs", pairs, "--tables", tables, "--mode", "infer",
                        "--out", prompts]) == 0
        assert run_cli(["infer", "--prompts", prompts, "--stub", "identity", "--out", preds_q]) == 0
        assert run_cli(["infer", "--prompts", prompts, "--stub", "oracle", "--out", preds_tq]) == 0
        assert run_cli(["report", "--pairs", pairs, "--preds", preds_q,
                        "--preds-context", preds_tq, "--out", out]) == 0
        text = out.read_text()
        lines = text.splitlines()
        assert lines[0].split() == ["EM", "F1"]
        assert lines[1].split() == ["q", "t'+q", "q", "t'+q"]
        row_labels = [line.split("  ")[0].strip() for line in lines[2:7]]
        assert row_labels == ["Overall", "Easy", "Medium", "Hard", "Extra Hard"]
        for line in lines[2:7]:
            assert len(line.split()) >= 5  # label + four score cells
        assert "extraction rate" in text
