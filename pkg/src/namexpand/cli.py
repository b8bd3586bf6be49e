"""Command-line pipeline: ingest -> fabricate -> classify-difficulty ->
prompts -> infer -> score -> report.

Every command writes a run manifest (<out>.run.json) capturing the options,
seed, version, wall clock and stage counts, so any stage can be replayed
byte-exactly.  Exit codes: 0 success, 1 input error, 2 endpoint failure.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import random
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import click

from . import __version__
from .abbrev import DictError, FabricationConfig, NamePair, fabricate_corpus
from .corpus import (
    CsvParseError,
    FilterCriteria,
    SocrataError,
    Table,
    fetch_socrata,
    filter_tables,
    ingest_csv,
    manifest_lines,
    read_tables_jsonl,
    write_tables_jsonl,
)
from .difficulty import (
    ClassificationError,
    DifficultyLevel,
    DifficultyThresholds,
    calibrate_thresholds,
    classify,
    normalized_distance,
)
from .llmclient import (
    STUB_KINDS,
    EndpointConfig,
    EndpointError,
    make_stub_completer,
    read_raw_log,
    run_inference,
)
from .metrics import EvalReport, aggregate, render_report, score_record
from .promptkit import (
    PromptBundle,
    build_bundles,
    extract_answers,
    read_bundles_jsonl,
    write_bundles_jsonl,
)
from .segment import (
    LexiconError,
    build_vocabulary,
    default_lexicon,
    default_vocabulary,
    load_frequency_lexicon,
)

log = logging.getLogger(__name__)

INPUT_ERRORS = (
    CsvParseError,
    DictError,
    LexiconError,
    ClassificationError,
    ValueError,
    KeyError,
    OSError,
)


class _JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {
                "time": datetime.now(timezone.utc).isoformat(),
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage(),
            }
        )


def _setup_logging(log_json: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if log_json:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=logging.INFO, handlers=[handler], force=True)


def _write_run_manifest(
    command: str,
    out_path: str | Path,
    options: dict[str, Any],
    inputs: Sequence[str],
    outputs: Sequence[str],
    seed: int | None,
    counts: dict[str, Any],
    started: float,
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "started_at": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "wall_clock_s": round(time.time() - started, 3),
        "seed": seed,
        "config": options,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "counts": counts,
    }
    path = Path(f"{out_path}.run.json")
    path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_pairs_jsonl(pairs: Sequence[NamePair], path: str | Path) -> None:
    tmp = Path(f"{path}.tmp")
    with tmp.open("w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def read_pairs_jsonl(path: str | Path) -> list[NamePair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                pairs.append(NamePair.from_dict(json.loads(line)))
    return pairs


def _load_lexicon(path: str | None):
    if path:
        with open(path, "rb") as f:
            return load_frequency_lexicon(f)
    return default_lexicon()


def _load_vocab(path: str | None, min_word_len: int = 3):
    if path:
        with open(path, "rb") as f:
            return build_vocabulary(f, min_word_len)
    return default_vocabulary(min_word_len)


def _load_tables_arg(path: str) -> list[Table]:
    """Accept either one JSON-lines file or a directory of them."""
    p = Path(path)
    if p.is_dir():
        tables: list[Table] = []
        for child in sorted(p.glob("*.jsonl")):
            if child.name.endswith(".manifest.jsonl"):
                continue
            tables.extend(read_tables_jsonl(str(child)))
        if not tables:
            raise click.UsageError(f"no *.jsonl table files under {path}")
        return tables
    return read_tables_jsonl(path)


@click.group()
@click.version_option(__version__, prog_name="namexpand")
@click.option("--log-json", is_flag=True, help="Emit structured JSON logs on stderr.")
@click.option("--config", "global_config", type=click.Path(exists=True, dir_okay=False),
              help="Fabrication config file used by commands that take one.")
@click.pass_context
def cli(ctx: click.Context, log_json: bool, global_config: str | None) -> None:
    """Fabricate abbreviated column-name corpora and evaluate expansion models."""
    _setup_logging(log_json)
    ctx.obj = {"config": global_config}


@cli.command()
@click.option("--csv", "csv_paths", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--csv-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--socrata-domain", help="Socrata host, e.g. data.cityofnewyork.us")
@click.option("--socrata-dataset", help="Socrata dataset id, e.g. abcd-1234")
@click.option("--socrata-scheme", default="https", type=click.Choice(["https", "http"]),
              help="Scheme for the Socrata host (http eases local testing).")
@click.option("--limit", default=1000, show_default=True, help="Max rows fetched per Socrata dataset.")
@click.option("--min-rows", default=5, show_default=True)
@click.option("--min-cols", default=5, show_default=True)
@click.option("--max-nan-fraction", default=0.5, show_default=True)
@click.option("--max-duplicate-fraction", default=0.5, show_default=True)
@click.option("--max-rows", default=1000, show_default=True, help="Rows retained per kept table.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Kept tables (JSON lines).")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False),
              help="Per-table keep/reject manifest [default: <out stem>.manifest.jsonl].")
def ingest(
    csv_paths: tuple[str, ...],
    csv_dir: str | None,
    socrata_domain: str | None,
    socrata_dataset: str | None,
    socrata_scheme: str,
    limit: int,
    min_rows: int,
    min_cols: int,
    max_nan_fraction: float,
    max_duplicate_fraction: float,
    max_rows: int,
    out: str,
    manifest_path: str | None,
) -> None:
    """Read tables from CSV files or a Socrata endpoint and filter them."""
    started = time.time()
    tables: list[Table] = []
    inputs: list[str] = []

    files = [Path(p) for p in csv_paths]
    if csv_dir:
        files.extend(sorted(Path(csv_dir).glob("*.csv")))
    seen_ids: set[str] = set()
    for path in files:
        table_id = path.stem
        if table_id in seen_ids:
            raise click.UsageError(f"duplicate table id {table_id!r} from {path}")
        seen_ids.add(table_id)
        with open(path, "rb") as f:
            tables.append(ingest_csv(f, table_id))
        inputs.append(str(path))

    if socrata_domain or socrata_dataset:
        if not (socrata_domain and socrata_dataset):
            raise click.UsageError("--socrata-domain and --socrata-dataset go together")
        tables.append(fetch_socrata(socrata_domain, socrata_dataset, limit, scheme=socrata_scheme))
        inputs.append(f"{socrata_scheme}://{socrata_domain}/resource/{socrata_dataset}.json")

    if not tables:
        raise click.UsageError("no input: pass --csv/--csv-dir or a Socrata dataset")

    criteria = FilterCriteria(
        min_rows=min_rows,
        min_cols=min_cols,
        max_nan_fraction=max_nan_fraction,
        max_duplicate_name_fraction=max_duplicate_fraction,
        max_rows_retained=max_rows,
    )
    kept, rejected = filter_tables(tables, criteria)
    write_tables_jsonl(kept, out)
    manifest_file = manifest_path or str(Path(out).with_suffix(".manifest.jsonl"))
    Path(manifest_file).write_text(
        "\n".join(manifest_lines(tables, kept, rejected)) + "\n", encoding="utf-8"
    )
    log.info("ingest: %d tables in, %d kept, %d rejected", len(tables), len(kept), len(rejected))
    _write_run_manifest(
        "ingest",
        out,
        {
            "criteria": dataclasses.asdict(criteria),
            "limit": limit,
            "socrata_domain": socrata_domain,
            "socrata_dataset": socrata_dataset,
        },
        inputs,
        [out, manifest_file],
        seed=None,
        counts={"ingested": len(tables), "kept": len(kept), "rejected": len(rejected)},
        started=started,
    )


@cli.command()
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Name pairs (JSON lines).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file overriding any fabrication config field.")
@click.option("--seed", type=int, default=None, help="RNG seed; wins over the config file.")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab", "vocab_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--min-word-len", default=3, show_default=True,
              help="Shortest word admitted to the curation vocabulary.")
@click.option("--lookup", "lookup_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--acronyms", "acronym_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", default=1, show_default=True, help="Parallel fabrication workers.")
@click.pass_context
def fabricate(
    ctx: click.Context,
    tables_path: str,
    out: str,
    config_path: str | None,
    seed: int | None,
    lexicon_path: str | None,
    vocab_path: str | None,
    min_word_len: int,
    lookup_path: str | None,
    acronym_path: str | None,
    workers: int,
) -> None:
    """Abbreviate curated headers of filtered tables into (query, gold) pairs."""
    started = time.time()
    config_path = config_path or (ctx.obj or {}).get("config")
    raw_config: dict[str, Any] = {}
    if config_path:
        raw_config = json.loads(Path(config_path).read_text(encoding="utf-8"))
    config = FabricationConfig.from_dict(raw_config)
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if lookup_path:
        overrides["lookup_path"] = lookup_path
    if acronym_path:
        overrides["acronym_path"] = acronym_path
    if overrides:
        config = dataclasses.replace(config, **overrides)

    tables = _load_tables_arg(tables_path)
    lexicon = _load_lexicon(lexicon_path)
    vocab = _load_vocab(vocab_path, min_word_len)
    pairs = fabricate_corpus(tables, config, vocab, lexicon, workers=workers)
    write_pairs_jsonl(pairs, out)
    log.info("fabricate: %d tables -> %d pairs", len(tables), len(pairs))
    _write_run_manifest(
        "fabricate",
        out,
        {"fabrication": config.to_dict(), "workers": workers,
         "lexicon": lexicon_path, "vocab": vocab_path},
        [tables_path],
        [out],
        seed=config.seed,
        counts={"tables": len(tables), "pairs": len(pairs)},
        started=started,
    )


def _parse_floats(raw: str, expected: int, name: str) -> list[float]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if len(parts) != expected:
        raise click.UsageError(f"{name} expects {expected} comma-separated values, got {raw!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise click.UsageError(f"{name} must be numeric, got {raw!r}")


@cli.command("classify-difficulty")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--thresholds", default="0.1,0.35,0.6", show_default=True,
              help="Normalized-distance cutpoints t1,t2,t3.")
@click.option("--calibrate", "calibrate_targets", default=None,
              help="Fit cutpoints to four target proportions, e.g. 0.11,0.39,0.40,0.10.")
def classify_difficulty(pairs_path: str, thresholds: str, calibrate_targets: str | None) -> None:
    """Annotate each pair's difficulty level in place."""
    started = time.time()
    pairs = read_pairs_jsonl(pairs_path)
    if not pairs:
        raise click.UsageError(f"{pairs_path} holds no pairs")
    if calibrate_targets:
        targets = _parse_floats(calibrate_targets, 4, "--calibrate")
        distances = [normalized_distance(p.query_name, p.logical_name) for p in pairs]
        cutpoints = calibrate_thresholds(distances, targets)
        click.echo(
            f"calibrated thresholds: {cutpoints.t1:.6f},{cutpoints.t2:.6f},{cutpoints.t3:.6f}"
        )
    else:
        t1, t2, t3 = _parse_floats(thresholds, 3, "--thresholds")
        cutpoints = DifficultyThresholds(t1=t1, t2=t2, t3=t3)

    counts = {level.as_str(): 0 for level in DifficultyLevel}
    for pair in pairs:
        level = classify(pair.query_name, pair.logical_name, cutpoints)
        pair.difficulty = level.as_str()
        counts[level.as_str()] += 1
    write_pairs_jsonl(pairs, pairs_path)
    log.info("classify-difficulty: %s", counts)
    _write_run_manifest(
        "classify-difficulty",
        pairs_path,
        {"thresholds": dataclasses.asdict(cutpoints), "calibrate": calibrate_targets},
        [pairs_path],
        [pairs_path],
        seed=None,
        counts={"pairs": len(pairs), **counts},
        started=started,
    )


@cli.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tables", "tables_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=10, show_default=True, help="Query columns per prompt.")
@click.option("--n", default=10, show_default=True, help="Sampled rows per prompt.")
@click.option("--mode", default="train", type=click.Choice(["train", "infer"]), show_default=True)
@click.option("--demo", is_flag=True, help="Prepend the one-shot demonstration (infer mode).")
@click.option("--sample-seed", type=int, default=None,
              help="Sample cell values uniformly at random instead of first-N.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def prompts(
    pairs_path: str,
    tables_path: str,
    k: int,
    n: int,
    mode: str,
    demo: bool,
    sample_seed: int | None,
    out: str,
) -> None:
    """Serialize table context and task prompts for training or inference."""
    started = time.time()
    pairs = read_pairs_jsonl(pairs_path)
    tables = {t.id: t for t in _load_tables_arg(tables_path)}
    rng = random.Random(sample_seed) if sample_seed is not None else None
    bundles = build_bundles(tables, pairs, k=k, n=n, mode=mode, with_demo=demo, sample_rng=rng)
    write_bundles_jsonl(bundles, out)
    log.info("prompts: %d pairs -> %d bundles", len(pairs), len(bundles))
    _write_run_manifest(
        "prompts",
        out,
        {"k": k, "n": n, "mode": mode, "demo": demo},
        [pairs_path, tables_path],
        [out],
        seed=sample_seed,
        counts={"pairs": len(pairs), "bundles": len(bundles)},
        started=started,
    )


def _extract_predictions(
    bundles: Sequence[PromptBundle], completions: dict[str, str | None]
) -> tuple[list[dict[str, Any]], int]:
    predictions: list[dict[str, Any]] = []
    extracted_bundles = 0
    for bundle in bundles:
        completion = completions.get(bundle.bundle_id)
        answers = (
            extract_answers(completion, len(bundle.column_indices))
            if completion is not None
            else None
        )
        if answers is not None:
            extracted_bundles += 1
        for i, column in enumerate(bundle.column_indices):
            predictions.append(
                {
                    "table_id": bundle.table_id,
                    "column_index": column,
                    "prediction": answers[i] if answers is not None else None,
                }
            )
    return predictions, extracted_bundles


@cli.command()
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Predictions (JSON lines).")
@click.option("--raw-out", "raw_out", type=click.Path(dir_okay=False),
              help="Raw completion log [default: <out stem>.raw.jsonl].")
@click.option("--endpoint", help="Completion endpoint base URL (POST <url>/v1/completions).")
@click.option("--model", default="", help="Model name sent to the endpoint.")
@click.option("--max-new-tokens", default=128, show_default=True)
@click.option("--temperature", default=0.0, show_default=True)
@click.option("--no-stop", is_flag=True, help="Do not send the default '.' stop sequence.")
@click.option("--extra-params", "extra_params", default=None,
              help="JSON object of extra request fields passed through to the endpoint, "
                   "e.g. '{\"best_of\": 5}'.")
@click.option("--timeout", default=30.0, show_default=True)
@click.option("--max-retries", default=3, show_default=True)
@click.option("--max-in-flight", default=4, show_default=True)
@click.option("--stub", type=click.Choice(STUB_KINDS), help="Offline stub model instead of HTTP.")
@click.option("--stub-seed", type=int, default=0, show_default=True)
@click.option("--from-raw", "from_raw", type=click.Path(exists=True, dir_okay=False),
              help="Re-extract predictions from a persisted raw log; no network.")
def infer(
    prompts_path: str,
    out: str,
    raw_out: str | None,
    endpoint: str | None,
    model: str,
    max_new_tokens: int,
    temperature: float,
    no_stop: bool,
    extra_params: str | None,
    timeout: float,
    max_retries: int,
    max_in_flight: int,
    stub: str | None,
    stub_seed: int,
    from_raw: str | None,
) -> None:
    """Run prompts against an endpoint (or stub) and extract answers."""
    started = time.time()
    modes = sum(1 for flag in (endpoint, stub, from_raw) if flag)
    if modes != 1:
        raise click.UsageError("pass exactly one of --endpoint, --stub or --from-raw")
    passthrough: dict[str, Any] = {}
    if extra_params:
        try:
            passthrough = json.loads(extra_params)
        except ValueError as exc:
            raise click.UsageError(f"--extra-params must be a JSON object: {exc}")
        if not isinstance(passthrough, dict):
            raise click.UsageError("--extra-params must be a JSON object")
    bundles = read_bundles_jsonl(prompts_path)
    if not bundles:
        raise click.UsageError(f"{prompts_path} holds no prompt bundles")

    failed = 0
    if from_raw:
        completions = read_raw_log(from_raw)
        raw_file = from_raw
    else:
        raw_file = raw_out or str(Path(out).with_suffix(".raw.jsonl"))
        Path(raw_file).unlink(missing_ok=True)
        config = EndpointConfig(
            base_url=endpoint or "stub://local",
            model=model,
            max_new_tokens=max_new_tokens,
            temperature=temperature,
            stop=None if no_stop else (".",),
            timeout=timeout,
            max_retries=max_retries,
            max_in_flight=max_in_flight,
            extra_params=passthrough,
        )
        completer = make_stub_completer(stub, random.Random(stub_seed)) if stub else None
        results = run_inference(bundles, config, completer=completer, raw_log_path=raw_file)
        failed = sum(1 for r in results if not r.ok)
        if failed == len(results):
            raise EndpointError(f"all {failed} requests failed; see {raw_file}")
        completions = {r.bundle.bundle_id: r.completion for r in results}

    predictions, extracted_bundles = _extract_predictions(bundles, completions)
    with open(out, "w", encoding="utf-8") as f:
        for record in predictions:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
    log.info(
        "infer: %d bundles, %d failed requests, %d extracted", len(bundles), failed, extracted_bundles
    )
    _write_run_manifest(
        "infer",
        out,
        {
            "endpoint": endpoint,
            "model": model,
            "stub": stub,
            "from_raw": from_raw,
            "max_new_tokens": max_new_tokens,
            "temperature": temperature,
        },
        [prompts_path],
        [out, raw_file],
        seed=stub_seed if stub else None,
        counts={
            "bundles": len(bundles),
            "failed_requests": failed,
            "extracted_bundles": extracted_bundles,
            "predictions": len(predictions),
        },
        started=started,
    )


def _read_predictions(path: str) -> dict[tuple[str, int], str | None]:
    preds: dict[tuple[str, int], str | None] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                raw = json.loads(line)
                preds[(raw["table_id"], raw["column_index"])] = raw.get("prediction")
    return preds


def _build_report(pairs: Sequence[NamePair], preds_path: str) -> EvalReport:
    preds = _read_predictions(preds_path)
    records = []
    for pair in pairs:
        if pair.difficulty:
            level = DifficultyLevel.from_str(pair.difficulty)
        else:
            level = classify(pair.query_name, pair.logical_name)
        records.append(
            score_record(
                pair.table_id,
                pair.column_index,
                preds.get((pair.table_id, pair.column_index)),
                pair.logical_name,
                level,
            )
        )
    return aggregate(records)


@cli.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--preds", "preds_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Report JSON.")
def score(pairs_path: str, preds_path: str, out: str) -> None:
    """Score predictions against gold names; writes EM/F1 report JSON."""
    started = time.time()
    pairs = read_pairs_jsonl(pairs_path)
    if not pairs:
        raise click.UsageError(f"{pairs_path} holds no pairs")
    report = _build_report(pairs, preds_path)
    Path(out).write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    click.echo(render_report({"t'+q": report}))
    _write_run_manifest(
        "score",
        out,
        {},
        [pairs_path, preds_path],
        [out],
        seed=None,
        counts={"records": report.n, "extraction_rate": report.extraction_rate},
        started=started,
    )


@cli.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--preds", "preds_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Predictions from prompts without table context (q).")
@click.option("--preds-context", "preds_context_path", type=click.Path(exists=True, dir_okay=False),
              help="Predictions from prompts with table context (t'+q).")
@click.option("--out", default="report.txt", show_default=True, type=click.Path(dir_okay=False))
def report(pairs_path: str, preds_path: str, preds_context_path: str | None, out: str) -> None:
    """Render EM/F1 tables overall and per difficulty, q vs t'+q side by side."""
    started = time.time()
    pairs = read_pairs_jsonl(pairs_path)
    if not pairs:
        raise click.UsageError(f"{pairs_path} holds no pairs")
    reports = {"q": _build_report(pairs, preds_path)}
    inputs = [pairs_path, preds_path]
    if preds_context_path:
        reports["t'+q"] = _build_report(pairs, preds_context_path)
        inputs.append(preds_context_path)
    rendered = render_report(reports)
    click.echo(rendered)
    Path(out).write_text(rendered + "\n", encoding="utf-8")
    _write_run_manifest(
        "report",
        out,
        {"variants": list(reports)},
        inputs,
        [out],
        seed=None,
        counts={label: rep.n for label, rep in reports.items()},
        started=started,
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point mapping failures to exit codes (1 input, 2 endpoint)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (EndpointError, SocrataError) as exc:
        click.echo(f"endpoint failure: {exc}", err=True)
        return 2
    except INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
