import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from namexpand.llmclient import (
    EndpointConfig,
    EndpointError,
    complete,
    make_stub_completer,
    read_raw_log,
    run_inference,
)
from namexpand.promptkit import PromptBundle


class _CompletionsHandler(BaseHTTPRequestHandler):
    """Behavior keyed on the prompt text: 'flaky' fails twice then succeeds,
    'fail' always 500s, 'badreq' 400s, anything else echoes a completion."""

    flaky_counts: dict = {}
    in_flight = 0
    max_in_flight = 0
    lock = threading.Lock()
    seen_auth: list = []
    last_payload: dict = {}

    def do_POST(self):
        cls = type(self)
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        prompt = payload["prompt"]
        cls.seen_auth.append(self.headers.get("Authorization"))
        cls.last_payload = payload

        with cls.lock:
            cls.in_flight += 1
            cls.max_in_flight = max(cls.max_in_flight, cls.in_flight)
        try:
            if "slow" in prompt:
                time.sleep(0.05)
            if "flaky" in prompt:
                count = cls.flaky_counts.get(prompt, 0)
                cls.flaky_counts[prompt] = count + 1
                if count < 2:
                    self._respond(429, {})
                    return
            if "fail" in prompt:
                self._respond(500, {})
                return
            if "badreq" in prompt:
                self._respond(400, {})
                return
            self._respond(200, {"choices": [{"text": f" echo:{prompt}."}]})
        finally:
            with cls.lock:
                cls.in_flight -= 1

    def _respond(self, status, body):
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def endpoint():
    _CompletionsHandler.flaky_counts = {}
    _CompletionsHandler.max_in_flight = 0
    _CompletionsHandler.seen_auth = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _CompletionsHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def config_for(url, **overrides):
    defaults = dict(
        base_url=url, model="m", backoff_base=0.005, timeout=5.0, max_retries=3, max_in_flight=4
    )
    defaults.update(overrides)
    return EndpointConfig(**defaults)


def bundle_for(prompt, table_id="t", cols=(0,)):
    return PromptBundle(
        table_id=table_id,
        column_indices=list(cols),
        context="",
        prompt=prompt,
        queries=[f"q{c}" for c in cols],
        golds=[f"Gold {c}" for c in cols],
    )


class TestComplete:
    def test_happy_path(self, endpoint):
        out = complete("hello", config_for(endpoint))
        assert out == " echo:hello."

    def test_retries_through_429(self, endpoint):
        out = complete("flaky-1", config_for(endpoint))
        assert out.startswith(" echo:")
        assert _CompletionsHandler.flaky_counts["flaky-1"] == 3

    def test_persistent_500_exhausts_retries(self, endpoint):
        with pytest.raises(EndpointError) as err:
            complete("fail", config_for(endpoint, max_retries=2))
        assert err.value.status == 500

    def test_non_retryable_400_is_immediate(self, endpoint):
        with pytest.raises(EndpointError) as err:
            complete("badreq", config_for(endpoint))
        assert err.value.status == 400

    def test_connection_refused_retries_then_errors(self):
        config = config_for("http://127.0.0.1:1", max_retries=1)
        with pytest.raises(EndpointError):
            complete("x", config)

    def test_bearer_token_from_env(self, endpoint, monkeypatch):
        monkeypatch.setenv("NAMEGUESS_API_KEY", "tok123")
        complete("hello", config_for(endpoint))
        assert "Bearer tok123" in _CompletionsHandler.seen_auth

    def test_wire_payload_shape(self, endpoint):
        complete("hello", config_for(endpoint, model="mdl", max_new_tokens=64, temperature=0.5))
        payload = _CompletionsHandler.last_payload
        assert payload == {
            "model": "mdl",
            "prompt": "hello",
            "max_tokens": 64,
            "temperature": 0.5,
            "stop": ["."],
        }

    def test_stop_disabled(self, endpoint):
        complete("hello", config_for(endpoint, stop=None))
        assert "stop" not in _CompletionsHandler.last_payload


class TestRunInference:
    def test_every_bundle_gets_one_result(self, endpoint, tmp_path):
        bundles = [bundle_for(f"slow p{i}", table_id=f"t{i}") for i in range(8)]
        bundles[3] = bundle_for("fail", table_id="t3")
        raw = tmp_path / "raw.jsonl"
        results = run_inference(bundles, config_for(endpoint), raw_log_path=str(raw))
        assert len(results) == 8
        by_id = {r.bundle.bundle_id: r for r in results}
        assert len(by_id) == 8
        assert not by_id["t3:0-0"].ok
        assert sum(1 for r in results if r.ok) == 7

    def test_concurrency_bounded(self, endpoint):
        bundles = [bundle_for(f"slow p{i}", table_id=f"t{i}") for i in range(12)]
        run_inference(bundles, config_for(endpoint, max_in_flight=3))
        assert 1 <= _CompletionsHandler.max_in_flight <= 3

    def test_raw_log_written_per_bundle(self, endpoint, tmp_path):
        bundles = [bundle_for(f"p{i}", table_id=f"t{i}") for i in range(4)]
        raw = tmp_path / "raw.jsonl"
        run_inference(bundles, config_for(endpoint), raw_log_path=str(raw))
        entries = [json.loads(line) for line in raw.read_text().splitlines()]
        assert len(entries) == 4
        assert {e["bundle_id"] for e in entries} == {f"t{i}:0-0" for i in range(4)}
        for entry in entries:
            assert set(entry) == {"bundle_id", "prompt_sha256", "completion", "latency_ms", "status"}
            assert entry["status"] == "200"

    def test_raw_log_reload_is_deterministic(self, endpoint, tmp_path):
        bundles = [bundle_for(f"p{i}", table_id=f"t{i}") for i in range(3)]
        raw = tmp_path / "raw.jsonl"
        results = run_inference(bundles, config_for(endpoint), raw_log_path=str(raw))
        reloaded = read_raw_log(str(raw))
        assert reloaded == {r.bundle.bundle_id: r.completion for r in results}


class TestStubs:
    def test_oracle_echoes_golds(self):
        completer = make_stub_completer("oracle")
        bundle = bundle_for("p", cols=(0, 1))
        assert completer(bundle) == " Gold 0 | Gold 1."

    def test_identity_echoes_queries(self):
        completer = make_stub_completer("identity")
        bundle = bundle_for("p", cols=(0, 1))
        assert completer(bundle) == " q0 | q1."

    def test_scrambler_permutes_golds(self):
        import random

        completer = make_stub_completer("scrambler", random.Random(1))
        bundle = bundle_for("p", cols=tuple(range(6)))
        answers = completer(bundle).rstrip(".").split(" | ")
        assert sorted(a.strip() for a in answers) == sorted(bundle.golds)

    def test_unknown_stub_kind(self):
        with pytest.raises(ValueError):
            make_stub_completer("wat")

    def test_stub_run_writes_stub_status(self, tmp_path):
        bundles = [bundle_for("p", table_id="t0")]
        raw = tmp_path / "raw.jsonl"
        run_inference(
            bundles,
            config_for("http://unused.invalid"),
            completer=make_stub_completer("oracle"),
            raw_log_path=str(raw),
        )
        entry = json.loads(raw.read_text().splitlines()[0])
        assert entry["status"] == "stub"
        assert entry["completion"] == " Gold 0."
