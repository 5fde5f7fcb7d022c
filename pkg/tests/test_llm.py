from __future__ import annotations

import json

import pytest

from resketch.llm import (
    CassetteEntry,
    CassetteMissError,
    LLMError,
    LLMParams,
    MockScriptClient,
    RecordingClient,
    ReplayClient,
    TokenBucket,
    count_calls,
    extract_code,
    load_cassette,
    request_digest,
)
from resketch.prompts import TemplateId

PARAMS = LLMParams(model="mock-model")


def test_digest_is_stable():
    a = request_digest("hello", PARAMS)
    b = request_digest("hello", PARAMS)
    assert a == b
    assert len(a) == 64
    assert all(c in "0123456789abcdef" for c in a)


def test_digest_sensitive_to_each_field():
    base = request_digest("hello", PARAMS)
    assert request_digest("hello!", PARAMS) != base
    assert request_digest("hello", LLMParams(model="other")) != base
    assert request_digest("hello", LLMParams(model="mock-model",
                                             temperature=0.5)) != base
    assert request_digest("hello", LLMParams(model="mock-model",
                                             max_tokens=1)) != base
    assert request_digest("hello", LLMParams(model="mock-model",
                                             sample_count=2)) != base


def test_params_validation():
    with pytest.raises(ValueError):
        LLMParams(model="")
    with pytest.raises(ValueError):
        LLMParams(model="m", temperature=-0.1)
    with pytest.raises(ValueError):
        LLMParams(model="m", max_tokens=0)
    with pytest.raises(ValueError):
        LLMParams(model="m", sample_count=0)


def test_extract_code_takes_first_fenced_block():
    reply = "Here you go:\n```python\nprint(1)\n```\nand a note\n```\nx = 2\n```"
    assert extract_code(reply) == "print(1)"


def test_extract_code_bare_reply_passthrough():
    assert extract_code("  print(3)\n") == "print(3)"


def test_extract_code_empty_fence_rejected():
    with pytest.raises(LLMError, match="no code produced"):
        extract_code("```python\n\n```")


def test_extract_code_blank_reply_rejected():
    with pytest.raises(LLMError, match="no code produced"):
        extract_code("   \n  ")


def test_mock_script_serves_in_order():
    client = MockScriptClient(["A", "B"])
    first = client.complete(TemplateId.SEED_GENERATE, "p1", PARAMS)
    second = client.complete(TemplateId.SEED_GENERATE, "p2", PARAMS)
    assert first == ["A"]
    assert second == ["B"]


def test_mock_script_exhaustion_is_an_error():
    client = MockScriptClient(["only"])
    client.complete(TemplateId.SEED_GENERATE, "p", PARAMS)
    with pytest.raises(LLMError, match="exhausted"):
        client.complete(TemplateId.SEED_GENERATE, "p", PARAMS)


def test_mock_script_per_template_queues():
    client = MockScriptClient({
        "Regenerate": ["code-1"],
        "*": ["fallback-1", "fallback-2"],
    })
    assert client.complete(TemplateId.SEED_GENERATE, "p", PARAMS) == ["fallback-1"]
    assert client.complete(TemplateId.REGENERATE, "p", PARAMS) == ["code-1"]
    assert client.complete(TemplateId.SELF_EDIT, "p", PARAMS) == ["fallback-2"]


def test_mock_script_named_queue_exhaustion_does_not_fall_through():
    client = MockScriptClient({
        "Regenerate": ["code-1"],
        "*": ["fallback"],
    })
    client.complete(TemplateId.REGENERATE, "p", PARAMS)
    with pytest.raises(LLMError, match="Regenerate"):
        client.complete(TemplateId.REGENERATE, "p", PARAMS)


def test_mock_script_sample_count_pops_that_many():
    client = MockScriptClient(["a", "b", "c"])
    params = LLMParams(model="m", sample_count=2)
    assert client.complete(TemplateId.REGENERATE, "p", params) == ["a", "b"]
    assert client.remaining() == 1


def test_empty_prompt_rejected():
    client = MockScriptClient(["x"])
    with pytest.raises(LLMError, match="empty prompt"):
        client.complete(TemplateId.SEED_GENERATE, "", PARAMS)


def test_call_log_records_each_call():
    client = MockScriptClient(["a", "b"])
    client.complete(TemplateId.SEED_GENERATE, "first", PARAMS)
    client.complete(TemplateId.REGENERATE, "second", PARAMS)
    assert [r.template_id for r in client.call_log] == \
        ["SeedGenerate", "Regenerate"]
    assert client.call_log[0].prompt == "first"
    assert client.call_log[1].responses == ("b",)


def test_count_calls_totals_and_filters():
    client = MockScriptClient(["a", "b", "c"])
    client.complete(TemplateId.SEED_GENERATE, "p", PARAMS)
    client.complete(TemplateId.REGENERATE, "p", PARAMS)
    client.complete(TemplateId.REGENERATE, "q", PARAMS)
    assert count_calls(client.call_log) == 3
    assert count_calls(client.call_log, TemplateId.REGENERATE) == 2
    assert count_calls(client.call_log, TemplateId.SELF_EDIT) == 0


def test_replay_round_trip(tmp_path):
    cassette = tmp_path / "cassette.jsonl"
    inner = MockScriptClient(["seed code", "new code"])
    recorder = RecordingClient(inner, cassette)
    got_a = recorder.complete(TemplateId.SEED_GENERATE, "gen prompt", PARAMS)
    got_b = recorder.complete(TemplateId.REGENERATE, "regen prompt", PARAMS)

    replayer = ReplayClient(cassette)
    assert replayer.complete(TemplateId.SEED_GENERATE, "gen prompt",
                             PARAMS) == got_a
    assert replayer.complete(TemplateId.REGENERATE, "regen prompt",
                             PARAMS) == got_b


def test_replay_miss_cites_digest(tmp_path):
    cassette = tmp_path / "empty.jsonl"
    cassette.write_text("", encoding="utf-8")
    replayer = ReplayClient(cassette)
    digest = request_digest("never seen", PARAMS)
    with pytest.raises(CassetteMissError) as excinfo:
        replayer.complete(TemplateId.SEED_GENERATE, "never seen", PARAMS)
    assert digest in str(excinfo.value)
    assert excinfo.value.digest == digest


def test_recording_cache_hit_skips_inner_client(tmp_path):
    cassette = tmp_path / "cassette.jsonl"
    inner = MockScriptClient(["one answer"])
    recorder = RecordingClient(inner, cassette)
    first = recorder.complete(TemplateId.SEED_GENERATE, "same prompt", PARAMS)
    # Inner script is exhausted; a repeat must come from the cache.
    second = recorder.complete(TemplateId.SEED_GENERATE, "same prompt", PARAMS)
    assert first == second == ["one answer"]
    assert inner.remaining() == 0
    lines = cassette.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 1


def test_cassette_line_key_order(tmp_path):
    entry = CassetteEntry(digest="d" * 64, template_id="SeedGenerate",
                          prompt="p", responses=("r",))
    record = json.loads(entry.to_line())
    assert list(record) == ["digest", "template_id", "prompt", "responses"]


def test_cassette_later_duplicate_wins(tmp_path):
    cassette = tmp_path / "cassette.jsonl"
    first = CassetteEntry(digest="d" * 64, template_id="SeedGenerate",
                          prompt="p", responses=("old",))
    second = CassetteEntry(digest="d" * 64, template_id="SeedGenerate",
                           prompt="p", responses=("new",))
    cassette.write_text(first.to_line() + "\n" + second.to_line() + "\n",
                        encoding="utf-8")
    entries = load_cassette(cassette)
    assert entries["d" * 64].responses == ("new",)


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps: list[float] = []

    def time(self):
        return self.now

    def sleep(self, seconds):
        self.sleeps.append(seconds)
        self.now += seconds


def test_token_bucket_spaces_out_requests():
    clock = FakeClock()
    bucket = TokenBucket(requests_per_minute=60, clock=clock.time,
                         sleep=clock.sleep)
    bucket.acquire()  # first call is free
    bucket.acquire()
    bucket.acquire()
    assert clock.sleeps == pytest.approx([1.0, 1.0])


def test_token_bucket_no_wait_when_idle_long_enough():
    clock = FakeClock()
    bucket = TokenBucket(requests_per_minute=60, clock=clock.time,
                         sleep=clock.sleep)
    bucket.acquire()
    clock.now += 5.0
    bucket.acquire()
    assert clock.sleeps == []


def test_token_bucket_validation():
    with pytest.raises(ValueError):
        TokenBucket(requests_per_minute=0)


class FakeResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


class FakeSession:
    """Stand-in for requests.Session that serves queued responses."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.requests: list[dict] = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append({"url": url, "json": json, "headers": headers})
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def ok_payload(*texts):
    return {"choices": [{"message": {"content": t}} for t in texts]}


def live_client(session, **kwargs):
    from resketch.llm import LiveClient
    kwargs.setdefault("sleep", lambda _s: None)
    return LiveClient("http://llm.test/v1", session=session, **kwargs)


def test_live_client_success_parses_choices():
    session = FakeSession([FakeResponse(200, ok_payload("hi there"))])
    client = live_client(session)
    got = client.complete(TemplateId.SEED_GENERATE, "prompt", PARAMS)
    assert got == ["hi there"]
    sent = session.requests[0]
    assert sent["url"] == "http://llm.test/v1/chat/completions"
    assert sent["json"]["messages"] == [{"role": "user", "content": "prompt"}]
    assert sent["json"]["n"] == 1


def test_live_client_sends_bearer_token(monkeypatch):
    monkeypatch.setenv("FAKE_LLM_KEY", "sekrit")
    session = FakeSession([FakeResponse(200, ok_payload("x"))])
    client = live_client(session, api_key_env="FAKE_LLM_KEY")
    client.complete(TemplateId.SEED_GENERATE, "prompt", PARAMS)
    headers = session.requests[0]["headers"]
    assert headers["Authorization"] == "Bearer sekrit"


def test_live_client_retries_server_errors_then_succeeds():
    session = FakeSession([
        FakeResponse(503, text="overloaded"),
        FakeResponse(500, text="oops"),
        FakeResponse(200, ok_payload("finally")),
    ])
    client = live_client(session)
    got = client.complete(TemplateId.SEED_GENERATE, "prompt", PARAMS)
    assert got == ["finally"]
    assert len(session.requests) == 3


def test_live_client_gives_up_after_three_attempts():
    import requests as requests_lib
    session = FakeSession([
        requests_lib.ConnectionError("refused"),
        requests_lib.ConnectionError("refused"),
        requests_lib.ConnectionError("refused"),
    ])
    client = live_client(session)
    with pytest.raises(LLMError, match="after 3 attempts"):
        client.complete(TemplateId.SEED_GENERATE, "prompt", PARAMS)
    assert len(session.requests) == 3


def test_live_client_client_error_is_not_retried():
    session = FakeSession([FakeResponse(401, text="bad key")])
    client = live_client(session)
    with pytest.raises(LLMError, match="status 401"):
        client.complete(TemplateId.SEED_GENERATE, "prompt", PARAMS)
    assert len(session.requests) == 1


def test_live_client_multi_sample_choices():
    session = FakeSession([FakeResponse(200, ok_payload("a", "b", "c"))])
    client = live_client(session)
    params = LLMParams(model="m", sample_count=3)
    assert client.complete(TemplateId.REGENERATE, "prompt", params) == \
        ["a", "b", "c"]


def test_live_client_choice_count_mismatch():
    session = FakeSession([FakeResponse(200, ok_payload("only one"))])
    client = live_client(session)
    params = LLMParams(model="m", sample_count=2)
    with pytest.raises(LLMError, match="expected 2"):
        client.complete(TemplateId.REGENERATE, "prompt", params)
