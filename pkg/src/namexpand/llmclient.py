"""Drive a completion-style HTTP endpoint with inference prompts.

Requests run with bounded concurrency and exponential-backoff retries; every
raw completion is persisted before any parsing so answer extraction can be
re-run offline.  Built-in stub completers (oracle / identity / scrambler)
make the whole pipeline testable without a network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import requests

from .promptkit import PromptBundle

log = logging.getLogger(__name__)

API_KEY_ENV = "NAMEGUESS_API_KEY"
RETRYABLE_STATUSES = {429, 500, 502, 503, 504}
STUB_KINDS = ("oracle", "identity", "scrambler")


class EndpointError(RuntimeError):
    """Raised when the inference endpoint cannot produce a completion."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    max_new_tokens: int = 128
    temperature: float = 0.0
    stop: tuple[str, ...] | None = (".",)
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5
    extra_params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


class OpenAICompletionsAdapter:
    """Wire adapter for the /v1/completions JSON shape.

    Swap in another adapter object (same two methods) for endpoints that
    speak a different dialect.
    """

    def build_request(self, prompt: str, config: EndpointConfig) -> tuple[str, dict[str, Any]]:
        url = config.base_url.rstrip("/") + "/v1/completions"
        payload: dict[str, Any] = {
            "model": config.model,
            "prompt": prompt,
            "max_tokens": config.max_new_tokens,
            "temperature": config.temperature,
        }
        if config.stop:
            payload["stop"] = list(config.stop)
        payload.update(config.extra_params)
        return url, payload

    def parse_response(self, body: dict[str, Any]) -> str:
        try:
            return body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"cannot find completion text in response: {exc}")


DEFAULT_ADAPTER = OpenAICompletionsAdapter()


def _auth_headers() -> dict[str, str]:
    token = os.environ.get(API_KEY_ENV)
    return {"Authorization": f"Bearer {token}"} if token else {}


def complete(
    prompt: str,
    config: EndpointConfig,
    adapter: OpenAICompletionsAdapter = DEFAULT_ADAPTER,
    session: requests.Session | None = None,
    rng: random.Random | None = None,
) -> str:
    """One completion with retries on transport errors, timeouts, 429 and 5xx.

    Non-retryable 4xx statuses raise immediately; exhausted retries raise an
    EndpointError carrying the last status seen.
    """
    rng = rng or random.Random()
    http = session or requests
    url, payload = adapter.build_request(prompt, config)
    last_status: int | None = None
    last_error = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt:
            delay = config.backoff_base * (2 ** (attempt - 1)) * (1 + 0.25 * rng.random())
            time.sleep(delay)
        try:
            response = http.post(
                url, json=payload, headers=_auth_headers(), timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = f"transport error: {exc}"
            continue
        last_status = response.status_code
        if 200 <= response.status_code < 300:
            try:
                body = response.json()
            except ValueError as exc:
                raise EndpointError(f"non-JSON response from {url}: {exc}", status=last_status)
            return adapter.parse_response(body)
        if response.status_code in RETRYABLE_STATUSES:
            last_error = f"HTTP {response.status_code}"
            continue
        raise EndpointError(
            f"POST {url} failed with HTTP {response.status_code}", status=response.status_code
        )
    raise EndpointError(
        f"POST {url} failed after {config.max_retries + 1} attempts ({last_error})",
        status=last_status,
    )


@dataclass
class InferenceResult:
    bundle: PromptBundle
    completion: str | None
    error: str | None = None
    status: str = "ok"
    latency_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.completion is not None


Completer = Callable[[PromptBundle], str]


def make_stub_completer(kind: str, rng: random.Random | None = None) -> Completer:
    """Offline completers: oracle echoes golds, identity echoes query names,
    scrambler returns the golds shuffled within each bundle."""
    if kind not in STUB_KINDS:
        raise ValueError(f"unknown stub kind {kind!r}; expected one of {STUB_KINDS}")
    rng = rng or random.Random(0)

    def completer(bundle: PromptBundle) -> str:
        if kind == "identity":
            answers = list(bundle.queries)
        else:
            if not bundle.golds:
                raise ValueError(f"bundle {bundle.bundle_id} has no golds for stub {kind!r}")
            answers = list(bundle.golds)
            if kind == "scrambler":
                rng.shuffle(answers)
        return " " + " | ".join(answers) + "."

    return completer


def run_inference(
    bundles: Sequence[PromptBundle],
    config: EndpointConfig,
    adapter: OpenAICompletionsAdapter = DEFAULT_ADAPTER,
    completer: Completer | None = None,
    raw_log_path: str | None = None,
) -> list[InferenceResult]:
    """Complete every bundle with at most max_in_flight requests in flight.

    Per-bundle failures are recorded and the run continues.  When a raw log
    path is given, each raw completion is appended (whole lines, under a
    lock) before the function returns, keyed by bundle id.
    """
    session = requests.Session() if completer is None else None
    if completer is None:
        def completer_fn(bundle: PromptBundle) -> str:
            return complete(bundle.prompt, config, adapter, session=session)
    else:
        completer_fn = completer

    lock = threading.Lock()
    raw_file = open(raw_log_path, "a", encoding="utf-8") if raw_log_path else None

    def log_raw(bundle: PromptBundle, completion: str | None, status: str, latency_ms: float) -> None:
        if raw_file is None:
            return
        line = json.dumps(
            {
                "bundle_id": bundle.bundle_id,
                "prompt_sha256": hashlib.sha256(bundle.prompt.encode("utf-8")).hexdigest(),
                "completion": completion,
                "latency_ms": round(latency_ms, 3),
                "status": status,
            },
            ensure_ascii=False,
        )
        with lock:
            raw_file.write(line + "\n")
            raw_file.flush()

    def work(bundle: PromptBundle) -> InferenceResult:
        start = time.monotonic()
        try:
            completion = completer_fn(bundle)
        except EndpointError as exc:
            latency = (time.monotonic() - start) * 1000
            status = f"error:{exc.status}" if exc.status else "error"
            log_raw(bundle, None, status, latency)
            return InferenceResult(bundle, None, error=str(exc), status=status, latency_ms=latency)
        latency = (time.monotonic() - start) * 1000
        status = "stub" if completer is not None else "200"
        log_raw(bundle, completion, status, latency)
        return InferenceResult(bundle, completion, status=status, latency_ms=latency)

    try:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            results = list(pool.map(work, bundles))
    finally:
        if raw_file is not None:
            raw_file.close()
        if session is not None:
            session.close()
    return results


def read_raw_log(path: str) -> dict[str, str | None]:
    """bundle_id -> raw completion (None for failed requests)."""
    completions: dict[str, str | None] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                entry = json.loads(line)
                completions[entry["bundle_id"]] = entry["completion"]
    return completions
